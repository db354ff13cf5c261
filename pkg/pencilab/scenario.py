import dataclasses
import enum
import json
import math
import re
import typing

from . import families, log
from .dressing import Potentials, QuadratureConfig
from .errors import ScenarioError
from .fields import Grid
from .lax import LaxKind, Rectangle
from .pencil import PencilSpec
from .special import Branch

SCHEMA = "pencilab/scenario/1"

DEFAULT_LAMBDAS = [0.5, 1.0, 2.0, 4.0, 8.0]


class SourceKind(enum.Enum):
    explicit_frame = "explicit-frame"
    dressing = "dressing"
    special_solution = "special-solution"


def _number(value: typing.Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", field=field)
    if not math.isfinite(value):
        raise ScenarioError(f"expected a finite number, got {value!r}", field=field)
    return float(value)


def _integer(value: typing.Any, field: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", field=field)
    if value < minimum:
        raise ScenarioError(f"expected an integer >= {minimum}, got {value}", field=field)
    return value


def _complex(value: typing.Any, field: str) -> complex:
    """A number or a [re, im] pair."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ScenarioError(f"complex values are [re, im], got {value!r}", field=field)
        return complex(_number(value[0], f"{field}[0]"), _number(value[1], f"{field}[1]"))
    return complex(_number(value, field))


def _list(value: typing.Any, field: str) -> typing.List[typing.Any]:
    if not isinstance(value, list):
        raise ScenarioError(f"expected a list, got {value!r}", field=field)
    return value


def _section(data: typing.Mapping[str, typing.Any], key: str, field: str) -> typing.Dict[str, typing.Any]:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioError(f"expected an object, got {value!r}", field=field)
    return value


def _unknown(data: typing.Mapping[str, typing.Any], known: typing.Iterable[str], field: str) -> None:
    extra = sorted(set(data) - set(known))
    if extra:
        name = f"{field}.{extra[0]}" if field else extra[0]
        raise ScenarioError(f"unknown field {extra[0]!r}", field=name)


def _check_params(ref: typing.Any, field: str) -> None:
    """Family parameters must be finite wherever they are numbers."""
    if isinstance(ref, dict):
        for key, value in ref.items():
            _check_params(value, f"{field}.{key}")
    elif isinstance(ref, list):
        for k, value in enumerate(ref):
            _check_params(value, f"{field}[{k}]")
    elif isinstance(ref, float) and not math.isfinite(ref):
        raise ScenarioError(f"expected a finite number, got {ref!r}", field=field)


@dataclasses.dataclass
class PencilSection:
    f: typing.List[families.Reference]
    K1: complex = 0j
    K2: complex = 0j
    epsilon: typing.List[int] = dataclasses.field(default_factory=list)

    def build(self) -> PencilSpec:
        return PencilSpec(
            f=[families.univariate(ref, f"pencil.f[{k}]") for k, ref in enumerate(self.f)],
            K1=self.K1,
            K2=self.K2,
        )

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any], dimension: int) -> "PencilSection":
        _unknown(data, ("f", "K1", "K2", "epsilon"), "pencil")
        f = _list(data.get("f", ["identity"] * dimension), "pencil.f")
        if len(f) != dimension:
            raise ScenarioError(f"expected {dimension} eigenvalue functions, got {len(f)}", field="pencil.f")
        for k, ref in enumerate(f):
            _check_params(ref, f"pencil.f[{k}]")
        epsilon = _list(data.get("epsilon", [1] * dimension), "pencil.epsilon")
        if len(epsilon) != dimension or any(isinstance(e, bool) or e not in (1, -1) for e in epsilon):
            raise ScenarioError(f"epsilon must be {dimension} signs of +1/-1, got {epsilon!r}", field="pencil.epsilon")
        section = cls(
            f=f,
            K1=_complex(data.get("K1", 0.0), "pencil.K1"),
            K2=_complex(data.get("K2", 0.0), "pencil.K2"),
            epsilon=epsilon,
        )
        section.build()
        return section


@dataclasses.dataclass
class GridSection:
    lower: typing.List[float]
    upper: typing.List[float]
    resolution: typing.List[int]

    def build(self) -> Grid:
        return Grid.box(self.lower, self.upper, self.resolution)

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any], dimension: int) -> "GridSection":
        _unknown(data, ("lower", "upper", "resolution"), "grid")
        if "lower" not in data or "upper" not in data:
            raise ScenarioError("grid needs 'lower' and 'upper' corners", field="grid")
        lower = [_number(v, f"grid.lower[{k}]") for k, v in enumerate(_list(data["lower"], "grid.lower"))]
        upper = [_number(v, f"grid.upper[{k}]") for k, v in enumerate(_list(data["upper"], "grid.upper"))]
        raw = data.get("resolution", 5)
        resolution = (
            [_integer(raw, "grid.resolution", 2)] * dimension
            if isinstance(raw, int)
            else [_integer(v, f"grid.resolution[{k}]", 2) for k, v in enumerate(_list(raw, "grid.resolution"))]
        )
        for name, values in (("lower", lower), ("upper", upper), ("resolution", resolution)):
            if len(values) != dimension:
                raise ScenarioError(f"expected {dimension} entries, got {len(values)}", field=f"grid.{name}")
        for k, (lo, hi) in enumerate(zip(lower, upper)):
            if not lo < hi:
                raise ScenarioError(f"empty interval [{lo:g}, {hi:g}]", field=f"grid.upper[{k}]")
        return cls(lower=lower, upper=upper, resolution=resolution)


@dataclasses.dataclass
class PotentialEntry:
    pair: typing.Optional[typing.Tuple[int, int]]
    ref: families.Reference


@dataclasses.dataclass
class DressingSection:
    potentials: typing.List[PotentialEntry]
    s: typing.List[float]
    quadrature: QuadratureConfig = dataclasses.field(default_factory=QuadratureConfig)
    substeps: int = 2
    frame_tolerance: float = 1e-4

    def build_potentials(self, dimension: int) -> Potentials:
        phi = {}
        for k, entry in enumerate(self.potentials):
            built = families.potential(entry.ref, f"source.potentials[{k}]")
            pairs = (
                [entry.pair]
                if entry.pair is not None
                else [(i, j) for i in range(dimension) for j in range(i + 1, dimension)]
            )
            for pair in pairs:
                phi[pair] = built
        return Potentials(phi=phi, dimension=dimension)

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any], dimension: int) -> "DressingSection":
        _unknown(data, ("kind", "potentials", "s", "quadrature", "substeps", "frame_tolerance"), "source")
        entries = []
        for k, item in enumerate(_list(data.get("potentials"), "source.potentials")):
            field = f"source.potentials[{k}]"
            if isinstance(item, dict) and "pair" in item:
                item = dict(item)
                raw = _list(item.pop("pair"), f"{field}.pair")
                if len(raw) != 2:
                    raise ScenarioError(f"pair is [i, j], got {raw!r}", field=f"{field}.pair")
                i, j = (_integer(v, f"{field}.pair", 1) - 1 for v in raw)
                if i > j or j >= dimension:
                    raise ScenarioError(f"pair needs 1 <= i <= j <= {dimension}, got {raw!r}", field=f"{field}.pair")
                entries.append(PotentialEntry(pair=(i, j), ref=item))
            else:
                entries.append(PotentialEntry(pair=None, ref=item))
            _check_params(entries[-1].ref, field)
        if not entries:
            raise ScenarioError("dressing needs at least one potential", field="source.potentials")
        s = [_number(v, f"source.s[{k}]") for k, v in enumerate(_list(data.get("s", [0.0]), "source.s"))]
        if not s:
            raise ScenarioError("dressing needs at least one s value", field="source.s")
        quad = _section(data, "quadrature", "source.quadrature")
        _unknown(quad, [f.name for f in dataclasses.fields(QuadratureConfig)], "source.quadrature")
        config = QuadratureConfig(
            **{
                key: (
                    _integer(value, f"source.quadrature.{key}", 1)
                    if key in ("nodes", "panel_nodes")
                    else _number(value, f"source.quadrature.{key}")
                )
                for key, value in quad.items()
            }
        )
        if config.nodes % config.panel_nodes != 0:
            raise ScenarioError("nodes must be a multiple of panel_nodes", field="source.quadrature.nodes")
        section = cls(
            potentials=entries,
            s=s,
            quadrature=config,
            substeps=_integer(data.get("substeps", 2), "source.substeps", 1),
            frame_tolerance=_number(data.get("frame_tolerance", 1e-4), "source.frame_tolerance"),
        )
        section.build_potentials(dimension)
        return section


@dataclasses.dataclass
class ExplicitFrameSection:
    frame: families.Reference
    perturb: typing.Optional[typing.Tuple[int, int, float]] = None

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any], dimension: int) -> "ExplicitFrameSection":
        _unknown(data, ("kind", "frame", "perturb"), "source")
        if "frame" not in data:
            raise ScenarioError("explicit-frame source needs a 'frame'", field="source.frame")
        _check_params(data["frame"], "source.frame")
        families.frame(data["frame"], dimension, "source.frame")
        perturb = None
        if data.get("perturb") is not None:
            raw = _section(data, "perturb", "source.perturb")
            _unknown(raw, ("pair", "delta"), "source.perturb")
            pair = _list(raw.get("pair"), "source.perturb.pair")
            if len(pair) != 2:
                raise ScenarioError(f"pair is [i, j], got {pair!r}", field="source.perturb.pair")
            i, j = (_integer(v, "source.perturb.pair", 1) - 1 for v in pair)
            if i == j or max(i, j) >= dimension:
                raise ScenarioError(f"pair needs distinct indices <= {dimension}", field="source.perturb.pair")
            perturb = (i, j, _number(raw.get("delta", 0.01), "source.perturb.delta"))
        return cls(frame=data["frame"], perturb=perturb)


SPECIAL_FAMILIES = ("mean-value", "separated", "f2-general", "f3-general")


@dataclasses.dataclass
class SpecialSection:
    """A closed-form or quadrature solution of one of the reduction equations.

    Samples cover ``first`` x ``second``: (t, r) for the Darboux families and
    (u1, u2) for the general solutions.
    """

    family: str
    first: typing.Tuple[float, float]
    second: typing.Tuple[float, float]
    samples: int = 5
    params: typing.Dict[str, typing.Any] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any], dimension: int) -> "SpecialSection":
        family = data.get("family")
        if family not in SPECIAL_FAMILIES:
            raise ScenarioError(
                f"unknown special-solution family {family!r}, expected one of {list(SPECIAL_FAMILIES)}",
                field="source.family",
            )
        if dimension != 2:
            raise ScenarioError("special solutions live in two variables", field="dimension")
        known = {
            "mean-value": ("psi", "nodes"),
            "separated": ("a", "branch", "c1", "c2"),
            "f2-general": ("g", "h"),
            "f3-general": ("g", "h"),
        }[family]
        _unknown(data, ("kind", "family", "first", "second", "samples") + known, "source")
        ranges = []
        for key in ("first", "second"):
            raw = _list(data.get(key, [0.0, 1.0]), f"source.{key}")
            if len(raw) != 2:
                raise ScenarioError(f"expected [low, high], got {raw!r}", field=f"source.{key}")
            lo, hi = (_number(v, f"source.{key}") for v in raw)
            if not lo < hi:
                raise ScenarioError(f"empty interval [{lo:g}, {hi:g}]", field=f"source.{key}")
            ranges.append((lo, hi))
        if family in ("mean-value", "separated") and ranges[1][0] <= 0:
            raise ScenarioError("r samples must stay off the axis r = 0", field="source.second")
        params = {key: data[key] for key in known if key in data}
        _check_params(params, "source")
        for key in ("psi", "g", "h"):
            if key in params:
                families.univariate(params[key], f"source.{key}")
        if "nodes" in params:
            _integer(params["nodes"], "source.nodes", 2)
        for key in ("a", "c1", "c2"):
            if key in params:
                _complex(params[key], f"source.{key}")
        if "branch" in params and params["branch"] not in [b.value for b in Branch]:
            raise ScenarioError(f"unknown branch {params['branch']!r}", field="source.branch")
        if family == "mean-value" and "psi" not in params:
            raise ScenarioError("mean-value needs 'psi'", field="source.psi")
        if family in ("f2-general", "f3-general") and not ("g" in params and "h" in params):
            raise ScenarioError(f"{family} needs 'g' and 'h'", field="source")
        return cls(
            family=family,
            first=ranges[0],
            second=ranges[1],
            samples=_integer(data.get("samples", 5), "source.samples", 2),
            params=params,
        )


@dataclasses.dataclass
class LaxSection:
    kind: typing.Optional[LaxKind] = None
    lambdas: typing.List[complex] = dataclasses.field(
        default_factory=lambda: [complex(v) for v in DEFAULT_LAMBDAS]
    )
    rectangle: typing.Optional[Rectangle] = None
    steps: int = 64
    enabled: bool = True

    def resolve_kind(self, source: SourceKind) -> LaxKind:
        if self.kind is not None:
            return self.kind
        return LaxKind.flat_pencil if source is SourceKind.dressing else LaxKind.full_pencil

    def resolve_rectangle(self, grid: Grid) -> Rectangle:
        if self.rectangle is not None:
            return self.rectangle
        lower, upper = grid.lower, grid.upper
        return Rectangle(
            corner=list(lower),
            i=0,
            j=1,
            h_i=(upper[0] - lower[0]) / 2,
            h_j=(upper[1] - lower[1]) / 2,
        )

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any], dimension: int) -> "LaxSection":
        _unknown(data, ("kind", "lambdas", "rectangle", "steps", "enabled"), "lax")
        kind = None
        if data.get("kind", "auto") != "auto":
            try:
                kind = LaxKind(data["kind"])
            except ValueError as exc:
                raise ScenarioError(
                    f"unknown lax kind {data['kind']!r}, expected one of {[k.value for k in LaxKind]}",
                    field="lax.kind",
                ) from exc
        lambdas = [
            _complex(v, f"lax.lambdas[{k}]")
            for k, v in enumerate(_list(data.get("lambdas", DEFAULT_LAMBDAS), "lax.lambdas"))
        ]
        rectangle = None
        if "rectangle" in data:
            raw = _section(data, "rectangle", "lax.rectangle")
            _unknown(raw, ("corner", "i", "j", "h_i", "h_j"), "lax.rectangle")
            corner = [
                _number(v, f"lax.rectangle.corner[{k}]")
                for k, v in enumerate(_list(raw.get("corner"), "lax.rectangle.corner"))
            ]
            if len(corner) != dimension:
                raise ScenarioError(f"expected {dimension} entries", field="lax.rectangle.corner")
            i = _integer(raw.get("i", 1), "lax.rectangle.i", 1) - 1
            j = _integer(raw.get("j", 2), "lax.rectangle.j", 1) - 1
            if i == j or max(i, j) >= dimension:
                raise ScenarioError("rectangle needs two distinct axes", field="lax.rectangle.j")
            rectangle = Rectangle(
                corner=corner,
                i=i,
                j=j,
                h_i=_number(raw.get("h_i", 0.5), "lax.rectangle.h_i"),
                h_j=_number(raw.get("h_j", 0.5), "lax.rectangle.h_j"),
            )
        enabled = data.get("enabled", True)
        if not isinstance(enabled, bool):
            raise ScenarioError(f"expected true or false, got {enabled!r}", field="lax.enabled")
        return cls(
            kind=kind,
            lambdas=lambdas,
            rectangle=rectangle,
            steps=_integer(data.get("steps", 64), "lax.steps", 4),
            enabled=enabled,
        )


@dataclasses.dataclass
class Tolerances:
    default: float = 1e-6
    sections: typing.Dict[str, float] = dataclasses.field(default_factory=dict)

    def get(self, section: str) -> float:
        return self.sections.get(section, self.default)

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "Tolerances":
        known = ("default", "metric", "lame", "dressing", "lax", "special")
        _unknown(data, known, "tolerances")
        values = {key: _number(value, f"tolerances.{key}") for key, value in data.items()}
        for key, value in values.items():
            if value <= 0:
                raise ScenarioError(f"tolerance must be positive, got {value!r}", field=f"tolerances.{key}")
        default = values.pop("default", 1e-6)
        return cls(default=default, sections=values)


@dataclasses.dataclass
class OutputSection:
    directory: str = "pencilab-out"
    report: str = "report.json"

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "OutputSection":
        _unknown(data, ("directory", "report"), "output")
        for key in ("directory", "report"):
            if key in data and not isinstance(data[key], str):
                raise ScenarioError(f"expected a path string, got {data[key]!r}", field=f"output.{key}")
        return cls(**data)


Source = typing.Union[ExplicitFrameSection, DressingSection, SpecialSection]
SOURCES: typing.Dict[SourceKind, typing.Any] = {
    SourceKind.explicit_frame: ExplicitFrameSection,
    SourceKind.dressing: DressingSection,
    SourceKind.special_solution: SpecialSection,
}


@dataclasses.dataclass
class Scenario:
    name: str
    dimension: int
    pencil: PencilSection
    kind: SourceKind
    source: Source
    grid: GridSection
    lax: LaxSection
    tolerances: Tolerances
    output: OutputSection
    seed: int = 0
    raw: typing.Dict[str, typing.Any] = dataclasses.field(default_factory=dict)
    path: str = ""

    @classmethod
    def from_dict(cls, data: typing.Any, path: str = "") -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object", path=path)
        schema = data.get("schema")
        if schema != SCHEMA:
            raise ScenarioError(f"unsupported schema {schema!r}, expected {SCHEMA!r}", field="schema", path=path)
        _unknown(
            data,
            ("schema", "name", "dimension", "pencil", "source", "grid", "lax", "tolerances", "output", "seed"),
            "",
        )
        dimension = _integer(data.get("dimension"), "dimension", 2)
        source = _section(data, "source", "source")
        try:
            kind = SourceKind(source.get("kind"))
        except ValueError as exc:
            raise ScenarioError(
                f"unknown source kind {source.get('kind')!r}, expected one of {[k.value for k in SourceKind]}",
                field="source.kind",
            ) from exc
        name = data.get("name", "")
        if not isinstance(name, str):
            raise ScenarioError(f"expected a string, got {name!r}", field="name")
        return cls(
            name=name,
            dimension=dimension,
            pencil=PencilSection.from_dict(_section(data, "pencil", "pencil"), dimension),
            kind=kind,
            source=SOURCES[kind].from_dict(source, dimension),
            grid=GridSection.from_dict(_section(data, "grid", "grid"), dimension),
            lax=LaxSection.from_dict(_section(data, "lax", "lax"), dimension),
            tolerances=Tolerances.from_dict(_section(data, "tolerances", "tolerances")),
            output=OutputSection.from_dict(_section(data, "output", "output")),
            seed=_integer(data.get("seed", 0), "seed"),
            raw=data,
            path=path,
        )

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return self.raw


def _line_of(text: str, field: str) -> typing.Optional[int]:
    """Line of the first occurrence of the field's last key in the source text."""
    keys = [k for k in re.split(r"[.\[\]]", field) if k and not k.isdigit()]
    if not keys:
        return None
    match = re.search(r'"' + re.escape(keys[-1]) + r'"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def loads(text: str, path: str = "") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc
    try:
        return Scenario.from_dict(data, path=path)
    except ScenarioError as exc:
        exc.path = exc.path or path
        if exc.line is None and exc.field:
            exc.line = _line_of(text, exc.field)
        log.debug(f"scenario rejected path={path!r} field={exc.field!r} line={exc.line}")
        raise


def load(path: str) -> Scenario:
    try:
        with open(path) as inf:
            text = inf.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", path=path) from exc
    return loads(text, path=path)
