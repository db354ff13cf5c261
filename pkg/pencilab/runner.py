import contextlib
import csv
import dataclasses
import itertools
import json
import os
import time
import typing

import numpy as np

from . import AsJSONEncoder, __version__, families, log
from .dressing import dress
from .errors import (
    DegenerateMetricError,
    InvalidConstantsError,
    MissingSectionError,
    PencilabError,
    ScenarioError,
    SingularPairError,
)
from .fields import Grid, Point, as_point
from .lame import SystemInstance, constant_f_residual, residual_suite, rotation_from_frame
from .lax import lambda_sweep, zero_curvature_residual
from .metric import (
    LameFrame,
    compatibility_check,
    constant_curvature_residual,
    frame_to_metric,
    h_form_residual,
    partner_metric,
)
from .report import ResidualReport
from .scenario import (
    DressingSection,
    ExplicitFrameSection,
    Scenario,
    SourceKind,
    SpecialSection,
    Tolerances,
)
from .special import (
    Branch,
    change_variables_f4_to_f1,
    classify_pair,
    darboux_initial_conditions,
    darboux_separated,
    general_solution_f2,
    general_solution_f3,
    mean_value_solution,
    residual_darboux,
    residual_f1,
    residual_f2,
    residual_f3,
    separated_ode_residuals,
)

REPORT_SCHEMA = "pencilab/report/1"
EXPORT_KINDS = ("beta-field", "H-field", "residual-map", "monodromy-vs-lambda")
RANDOM_POINTS = 8


def _pair(value: complex) -> typing.List[float]:
    value = complex(value)
    return [value.real, value.imag]


@dataclasses.dataclass(eq=False)
class RunReport:
    """Everything a run produced; equality is equality of the JSON form."""

    scenario: typing.Dict[str, typing.Any]
    seed: int
    tolerance: float
    sections: typing.Dict[str, ResidualReport] = dataclasses.field(default_factory=dict)
    monodromy: typing.List[typing.Dict[str, typing.Any]] = dataclasses.field(default_factory=list)
    pencil: str = "n/a"
    beta_field: typing.List[typing.Dict[str, typing.Any]] = dataclasses.field(default_factory=list)
    h_field: typing.List[typing.Dict[str, typing.Any]] = dataclasses.field(default_factory=list)
    residual_map: typing.List[typing.Dict[str, typing.Any]] = dataclasses.field(default_factory=list)
    timings: typing.Optional[typing.Dict[str, float]] = None
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(section.passed for section in self.sections.values())

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def failures(self) -> typing.List[str]:
        return [
            f"{name}: {eq}" for name, section in self.sections.items() for eq in section.failures()
        ]

    def as_json(self) -> typing.Dict[str, typing.Any]:
        out: typing.Dict[str, typing.Any] = {
            "schema": REPORT_SCHEMA,
            "version": self.version,
            "scenario": self.scenario,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "pencil": self.pencil,
            "sections": {name: section.as_json() for name, section in self.sections.items()},
            "monodromy": self.monodromy,
            "beta_field": self.beta_field,
            "h_field": self.h_field,
            "residual_map": self.residual_map,
        }
        if self.timings is not None:
            out["timings"] = self.timings
        return out

    def dumps(self) -> str:
        return json.dumps(self.as_json(), indent=2, sort_keys=True, cls=AsJSONEncoder)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunReport):
            return NotImplemented
        return self.dumps() == other.dumps()

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "RunReport":
        return cls(
            scenario=dict(data.get("scenario", {})),
            seed=int(data.get("seed", 0)),
            tolerance=float(data.get("tolerance", 1e-6)),
            sections={
                name: ResidualReport.from_dict(section)
                for name, section in data.get("sections", {}).items()
            },
            monodromy=list(data.get("monodromy", [])),
            pencil=data.get("pencil", "n/a"),
            beta_field=list(data.get("beta_field", [])),
            h_field=list(data.get("h_field", [])),
            residual_map=list(data.get("residual_map", [])),
            timings=data.get("timings"),
            version=data.get("version", __version__),
        )


def write_report(report: RunReport, directory: str, name: str = "report.json") -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, "w") as outf:
        outf.write(report.dumps())
        outf.write("\n")
    log.info(f"wrote report path={path!r} verdict={report.verdict}")
    return path


def load_report(path: str) -> RunReport:
    with open(path) as inf:
        try:
            data = json.load(inf)
        except json.JSONDecodeError as exc:
            raise ScenarioError(exc.msg, path=path, line=exc.lineno) from exc
    if not isinstance(data, dict) or data.get("schema", REPORT_SCHEMA) != REPORT_SCHEMA:
        raise ScenarioError("not a pencilab report", path=path)
    try:
        return RunReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed report: {exc}", path=path) from exc


class _Clock:
    """Per-section wall time; failures are logged with the section that raised."""

    def __init__(self) -> None:
        self.times: typing.Dict[str, float] = {}

    @contextlib.contextmanager
    def section(self, name: str) -> typing.Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        except PencilabError as exc:
            log.error(f"section={name!r} failed err={exc}")
            raise
        finally:
            elapsed = time.perf_counter() - start
            self.times[name] = round(elapsed, 6)
            log.info(f"section={name!r} seconds={elapsed:.3f}")


def _coords(p: Point) -> typing.List[float]:
    return [complex(v).real for v in p]


def _field_rows(
    instance: SystemInstance, grid: Grid
) -> typing.Tuple[typing.List[typing.Dict[str, typing.Any]], typing.List[typing.Dict[str, typing.Any]]]:
    n = instance.dimension
    beta_rows, h_rows = [], []
    for p in grid.points():
        b = instance.beta.matrix(p)
        beta_rows.append(
            {
                "point": _coords(p),
                "beta": {
                    f"{i + 1}{j + 1}": _pair(b[i, j]) for i, j in itertools.permutations(range(n), 2)
                },
            }
        )
        h_rows.append({"point": _coords(p), "H": [_pair(h) for h in instance.frame.values(p)]})
    return beta_rows, h_rows


def _residual_rows(
    name: str, report: ResidualReport, n: int, skip: typing.Sequence[str] = ()
) -> typing.List[typing.Dict[str, typing.Any]]:
    rows = []
    for eq_name, eq in report.equations.items():
        if eq_name.startswith(tuple(skip)):
            continue
        for point, value in eq.pointwise:
            if len(point) == n:
                rows.append({"section": name, "equation": eq_name, "point": point, "residual": value})
    return rows


def _lax(
    scenario: Scenario,
    data: SystemInstance,
    grid: Grid,
    tolerance: float,
    threads: typing.Optional[int],
    seed: int,
) -> typing.Tuple[ResidualReport, typing.List[typing.Dict[str, typing.Any]]]:
    kind = scenario.lax.resolve_kind(scenario.kind)
    rectangle = scenario.lax.resolve_rectangle(grid)
    rows = lambda_sweep(kind, data, scenario.lax.lambdas, rectangle, threads, scenario.lax.steps)
    report = ResidualReport(
        title=f"lax {kind.value}", tolerance=tolerance, grid=json.dumps(rectangle.as_json(), sort_keys=True)
    )
    report.equation("monodromy")
    report.equation("zero-curvature")
    for row in rows:
        report.add("monodromy", row.defect, (row.lam.real, row.lam.imag))
        report.add("zero-curvature", row.zero_curvature, (row.lam.real, row.lam.imag))
        if row.shifted:
            report.note(f"lambda shifted off the spectral singularity to {row.lam!r}")
    if rows:
        rng = np.random.default_rng(seed)
        lower, upper = np.array(grid.lower), np.array(grid.upper)
        lam = rows[0].lam
        spot = report.equation("zero-curvature (random points)")
        for u in lower + rng.random((RANDOM_POINTS, grid.dimension)) * (upper - lower):
            spot.add(zero_curvature_residual(kind, data, u, lam), as_point(u))
    log.info(f"lax kind={kind.value} lambdas={len(rows)} max={report.max_norm:.3e}")
    return report, [row.as_json() for row in rows]


@dataclasses.dataclass
class _Context:
    scenario: Scenario
    grid: Grid
    tolerances: Tolerances
    threads: typing.Optional[int]
    seed: int
    clock: _Clock
    report: RunReport


def _finish_instance(ctx: _Context, instance: SystemInstance, skip: typing.Sequence[str] = ()) -> None:
    """Pencil status, sampled fields and the Lax sweep for a certified instance."""
    if instance.nonsingular is None:
        instance.record_singularity(ctx.grid)
    ctx.report.pencil = "nonsingular" if instance.nonsingular else "singular"
    ctx.report.beta_field, ctx.report.h_field = _field_rows(instance, ctx.grid)
    for name, section in ctx.report.sections.items():
        ctx.report.residual_map.extend(_residual_rows(name, section, ctx.grid.dimension, skip))
    if not ctx.scenario.lax.enabled:
        return
    with ctx.clock.section("lax"):
        lax, rows = _lax(
            ctx.scenario, instance, ctx.grid, ctx.tolerances.get("lax"), ctx.threads, ctx.seed
        )
    ctx.report.sections["lax"] = lax
    ctx.report.monodromy = rows


def _explicit(ctx: _Context, source: ExplicitFrameSection) -> None:
    scenario, grid, threads = ctx.scenario, ctx.grid, ctx.threads
    pencil = scenario.pencil.build()
    built = families.frame(source.frame, scenario.dimension, "source.frame")
    frame = LameFrame(H=built.H, epsilon=list(scenario.pencil.epsilon))
    beta = rotation_from_frame(frame)
    if source.perturb is not None:
        i, j, delta = source.perturb
        beta = beta.perturbed(i, j, delta)
        log.info(f"perturbed beta{i + 1}{j + 1} delta={delta!r}")
    instance = SystemInstance(beta=beta, frame=frame, pencil=pencil)

    with ctx.clock.section("metric"):
        tolerance = ctx.tolerances.get("metric")
        metric = ResidualReport(title="metric", tolerance=tolerance, grid=grid.describe())
        g2 = frame_to_metric(frame)
        metric.merge(constant_curvature_residual(g2, pencil.K2, grid, tolerance, threads), "g2 ")
        metric.merge(h_form_residual(frame, pencil.K2, grid, tolerance, threads), "g2 H-form ")
        g1 = partner_metric(g2, pencil.f)
        try:
            metric.merge(constant_curvature_residual(g1, pencil.K1, grid, tolerance, threads), "g1 ")
            metric.merge(compatibility_check(g1, g2, [(1.0, 1.0), (1.0, 2.0)], grid, tolerance, threads))
        except DegenerateMetricError as exc:
            metric.note(f"partner metric degenerate on the grid: {exc}")
    ctx.report.sections["metric"] = metric

    with ctx.clock.section("lame"):
        tolerance = ctx.tolerances.get("lame")
        lame = residual_suite(instance, grid, tolerance, threads)
        if all(f.is_constant for f in pencil.f):
            consts = pencil.values(grid.lower)
            try:
                lame.merge(
                    constant_f_residual(beta, frame, consts, pencil.K1, pencil.K2, grid, tolerance, threads),
                    "constant-f ",
                )
            except InvalidConstantsError as exc:
                lame.note(f"constant-eigenvalue system skipped: {exc}")
    ctx.report.sections["lame"] = lame
    _finish_instance(ctx, instance)


def _dressing(ctx: _Context, source: DressingSection) -> None:
    scenario = ctx.scenario
    pencil = scenario.pencil.build()
    potentials = source.build_potentials(scenario.dimension)
    first = None
    for s in source.s:
        name = f"dressing s={s:g}"
        with ctx.clock.section(name):
            result = dress(
                potentials,
                pencil,
                s,
                ctx.grid,
                source.quadrature,
                ctx.tolerances.get("dressing"),
                source.substeps,
                ctx.threads,
                source.frame_tolerance,
            )
        ctx.report.sections[name] = result.report
        first = first or result
    if first is not None:
        _finish_instance(ctx, first.instance, skip=("reduction", "zakharov", "path-independence"))


def _special(ctx: _Context, source: SpecialSection) -> None:
    tolerance = ctx.tolerances.get("special")
    params = source.params
    plane = Grid.box(
        [source.first[0], source.second[0]], [source.first[1], source.second[1]], source.samples
    )
    samples = [(p[0].real, p[1].real) for p in plane.points()]
    report = ResidualReport(title=f"special {source.family}", tolerance=tolerance, grid=plane.describe())
    pencil = ctx.scenario.pencil.build()
    try:
        kind = classify_pair(pencil.f[0], pencil.f[1])
        report.note(f"pencil pair reduces to type {kind.value}")
    except (SingularPairError, InvalidConstantsError) as exc:
        report.note(f"pencil pair not classified: {exc}")

    with ctx.clock.section("special"):
        if source.family == "mean-value":
            psi = families.univariate(params["psi"], "source.psi")
            solution = mean_value_solution(psi, int(params.get("nodes", 64)))
            report.merge(residual_darboux(solution.field, samples, tolerance))
            ts = sorted({t for t, _ in samples})
            report.merge(darboux_initial_conditions(solution, psi, ts, tolerance))
            u_samples = [(t + r, t - r) for t, r in samples]
            report.merge(residual_f1(change_variables_f4_to_f1(solution.field), u_samples, tolerance))
        elif source.family == "separated":
            a = complex(*params["a"]) if isinstance(params.get("a"), list) else complex(params.get("a", -1.0))
            solution = darboux_separated(
                a,
                Branch(params.get("branch", "regular")),
                complex(params.get("c1", 1.0)),
                complex(params.get("c2", 0.0)),
            )
            report.merge(residual_darboux(solution.field, samples, tolerance))
            rs = sorted({r for _, r in samples})
            report.merge(separated_ode_residuals(a, rs, tolerance))
        else:
            g = families.univariate(params["g"], "source.g")
            h = families.univariate(params["h"], "source.h")
            if source.family == "f2-general":
                report.merge(residual_f2(general_solution_f2(g, h), samples, tolerance))
            else:
                report.merge(residual_f3(general_solution_f3(g, h), samples, tolerance))
    ctx.report.sections["special"] = report


PIPELINES: typing.Dict[SourceKind, typing.Callable[[_Context, typing.Any], None]] = {
    SourceKind.explicit_frame: _explicit,
    SourceKind.dressing: _dressing,
    SourceKind.special_solution: _special,
}


def run(
    scenario: Scenario,
    tolerance: typing.Optional[float] = None,
    threads: typing.Optional[int] = None,
    seed: typing.Optional[int] = None,
    timings: bool = False,
) -> RunReport:
    """Construct, dress or evaluate, and certify what the scenario declares.

    A tolerance override replaces every per-section tolerance.
    """
    tolerances = Tolerances(default=tolerance) if tolerance is not None else scenario.tolerances
    seed = scenario.seed if seed is None else seed
    report = RunReport(scenario=scenario.as_json(), seed=seed, tolerance=tolerances.default)
    ctx = _Context(
        scenario=scenario,
        grid=scenario.grid.build(),
        tolerances=tolerances,
        threads=threads,
        seed=seed,
        clock=_Clock(),
        report=report,
    )
    log.info(f"running scenario name={scenario.name!r} source={scenario.kind.value} seed={seed}")
    PIPELINES[scenario.kind](ctx, scenario.source)
    if timings:
        report.timings = dict(ctx.clock.times)
    if not report.passed:
        log.warning(f"residual failures count={len(report.failures())} first={report.failures()[:3]}")
    log.info(f"verdict={report.verdict} pencil={report.pencil}")
    return report


def _header(kind: str, n: int) -> typing.Tuple[typing.List[str], typing.List[str]]:
    """Column names and their documentation lines."""
    coords = [f"u{k + 1}" for k in range(n)]
    coord_docs = [f"{c}: coordinate of the grid sample" for c in coords]
    if kind == "beta-field":
        pairs = [f"{i + 1}{j + 1}" for i, j in itertools.permutations(range(n), 2)]
        cols = coords + [f"{part}_beta{p}" for p in pairs for part in ("re", "im")]
        return cols, coord_docs + ["re_betaIJ, im_betaIJ: rotation coefficient beta_IJ"]
    if kind == "H-field":
        cols = coords + [f"{part}_H{k + 1}" for k in range(n) for part in ("re", "im")]
        return cols, coord_docs + ["re_HK, im_HK: Lame coefficient H_K"]
    if kind == "residual-map":
        cols = ["section", "equation"] + coords + ["residual"]
        return cols, [
            "section: report section",
            "equation: residual family",
        ] + coord_docs + ["residual: absolute residual at the sample"]
    cols = ["re_lambda", "im_lambda", "shifted", "defect", "zero_curvature"]
    return cols, [
        "re_lambda, im_lambda: spectral parameter used",
        "shifted: 1 when lambda was moved off a spectral singularity",
        "defect: Frobenius norm of monodromy minus identity (Richardson extrapolated)",
        "zero_curvature: max zero-curvature residual at the rectangle center",
    ]


def _dimension(report: RunReport) -> int:
    for rows in (report.beta_field, report.h_field, report.residual_map):
        if rows:
            return len(rows[0]["point"])
    return int(report.scenario.get("dimension", 0))


def export_plot_data(report: RunReport, what: str, out: str) -> str:
    """One CSV row per grid or lambda sample, preceded by '#' column documentation."""
    if what not in EXPORT_KINDS:
        raise InvalidConstantsError([], f"unknown export kind {what!r}, expected one of {list(EXPORT_KINDS)}")
    n = _dimension(report)
    data: typing.List[typing.List[typing.Any]] = []
    if what == "beta-field":
        if not report.beta_field:
            raise MissingSectionError(what)
        for row in report.beta_field:
            values = [part for key in sorted(row["beta"]) for part in row["beta"][key]]
            data.append(list(row["point"]) + values)
    elif what == "H-field":
        if not report.h_field:
            raise MissingSectionError(what)
        for row in report.h_field:
            data.append(list(row["point"]) + [part for h in row["H"] for part in h])
    elif what == "residual-map":
        if not report.residual_map:
            raise MissingSectionError(what)
        for row in report.residual_map:
            data.append([row["section"], row["equation"]] + list(row["point"]) + [row["residual"]])
    else:
        if not report.monodromy:
            raise MissingSectionError(what)
        for row in report.monodromy:
            lam = row["lambda"]
            data.append([lam[0], lam[1], int(row["shifted"]), row["defect"], row["zero_curvature"]])
    columns, docs = _header(what, n)
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(out, "w", newline="") as outf:
        for line in docs:
            outf.write(f"# {line}\n")
        writer = csv.writer(outf)
        writer.writerow(columns)
        writer.writerows(data)
    log.info(f"exported what={what} rows={len(data)} path={out!r}")
    return out
