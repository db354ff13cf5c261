import dataclasses
import itertools
import typing

import numpy as np

from . import get_settings, log, parallel_map
from .errors import (
    DegenerateMetricError,
    DimensionMismatchError,
    InvalidConstantsError,
    NonFiniteError,
    ZeroLameCoefficientError,
)
from .fields import Grid, Point, ScalarField, UnivariateFunction, as_point, principal_sqrt
from .report import ResidualReport


@dataclasses.dataclass
class DiagonalMetric:
    """Contravariant diagonal metric g^i(u)."""

    g: typing.List[ScalarField]
    degeneracy: typing.Optional[float] = None

    @property
    def dimension(self) -> int:
        return len(self.g)

    def point(self, u: typing.Iterable[typing.Any]) -> Point:
        p = as_point(u)
        if len(p) != self.dimension:
            raise DimensionMismatchError(self.dimension, len(p))
        return p

    def values(self, u: typing.Iterable[typing.Any]) -> np.ndarray:
        p = self.point(u)
        vals = np.array([gi(p) for gi in self.g], dtype=complex)
        threshold = (
            self.degeneracy if self.degeneracy is not None else get_settings().degeneracy
        ) * float(np.max(np.abs(vals)))
        for i, v in enumerate(vals):
            if abs(v) <= threshold:
                raise DegenerateMetricError(i, p, complex(v))
        return vals

    def jet(
        self, u: typing.Iterable[typing.Any], second: bool = True
    ) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values, first partials dg[i, k] and second partials d2g[i, j, k]."""
        p = self.point(u)
        n = self.dimension
        g = self.values(p)
        dg = np.array([[self.g[i].d(p, k) for k in range(n)] for i in range(n)], dtype=complex)
        d2g = np.zeros((n, n, n), dtype=complex)
        if second:
            for i in range(n):
                for j in range(n):
                    for k in range(j, n):
                        d2g[i, j, k] = d2g[i, k, j] = self.g[i].d2(p, j, k)
        if not (np.all(np.isfinite(dg)) and np.all(np.isfinite(d2g))):
            raise NonFiniteError("metric derivative", p)
        return g, dg, d2g

    @classmethod
    def constant(cls, values: typing.Sequence[complex]) -> "DiagonalMetric":
        return cls(g=[ScalarField.constant(v, name=f"g{i + 1}") for i, v in enumerate(values)])

    @classmethod
    def euclidean(cls, n: int) -> "DiagonalMetric":
        return cls.constant([1.0] * n)


@dataclasses.dataclass
class LameFrame:
    """Lame coefficients H_i(u) with signature signs epsilon^i."""

    H: typing.List[ScalarField]
    epsilon: typing.List[int] = dataclasses.field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.epsilon:
            self.epsilon = [1] * len(self.H)
        if len(self.epsilon) != len(self.H):
            raise DimensionMismatchError(len(self.H), len(self.epsilon), "signature")
        if any(e not in (1, -1) for e in self.epsilon):
            raise InvalidConstantsError(self.epsilon, "signature signs must be +1 or -1")

    @property
    def dimension(self) -> int:
        return len(self.H)

    def values(self, u: typing.Iterable[typing.Any]) -> np.ndarray:
        p = as_point(u)
        if len(p) != self.dimension:
            raise DimensionMismatchError(self.dimension, len(p))
        vals = np.array([h(p) for h in self.H], dtype=complex)
        for i, v in enumerate(vals):
            if v == 0:
                raise ZeroLameCoefficientError(i, p)
        return vals


def frame_to_metric(frame: LameFrame) -> DiagonalMetric:
    """g^i = eps^i / H_i^2 with partials by the chain rule."""

    def component(i: int) -> ScalarField:
        h = frame.H[i]
        e = frame.epsilon[i]
        n = frame.dimension

        def hv(u: Point) -> complex:
            v = complex(h(u))
            if abs(v) <= get_settings().degeneracy:
                raise DegenerateMetricError(i, as_point(u), complex(np.inf))
            return v

        return ScalarField(
            func=lambda u: e / hv(u) ** 2,
            partials={k: (lambda u, k=k: -2 * e * h.d(u, k) / hv(u) ** 3) for k in range(n)},
            second_partials={
                (j, k): (
                    lambda u, j=j, k=k: 6 * e * h.d(u, j) * h.d(u, k) / hv(u) ** 4
                    - 2 * e * h.d2(u, j, k) / hv(u) ** 3
                )
                for j in range(n)
                for k in range(j, n)
            },
            fd_step=h.fd_step,
            name=f"g{i + 1}",
        )

    return DiagonalMetric(g=[component(i) for i in range(frame.dimension)])


def metric_to_frame(
    metric: DiagonalMetric, epsilon: typing.Optional[typing.Sequence[int]] = None
) -> LameFrame:
    """H_i = 1/sqrt(eps^i g^i) on the principal branch."""
    eps = list(epsilon) if epsilon is not None else [1] * metric.dimension

    def component(i: int) -> ScalarField:
        g = metric.g[i]
        e = eps[i]

        def h(u: Point) -> complex:
            return 1 / principal_sqrt(e * g(u), what=f"eps{i + 1}*g{i + 1}")

        return ScalarField(
            func=h,
            partials={
                k: (lambda u, k=k: -0.5 * e * h(u) ** 3 * g.d(u, k))
                for k in range(metric.dimension)
            },
            fd_step=g.fd_step,
            name=f"H{i + 1}",
        )

    return LameFrame(H=[component(i) for i in range(metric.dimension)], epsilon=eps)


def christoffel(metric: DiagonalMetric, point: typing.Iterable[typing.Any]) -> np.ndarray:
    """Gamma[i, j, k] = Gamma^i_{jk}; entries with three distinct indices are zero."""
    g, dg, _ = metric.jet(point, second=False)
    n = metric.dimension
    gamma = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for k in range(n):
            gamma[i, i, k] = gamma[i, k, i] = -dg[i, k] / (2 * g[i])
        for j in range(n):
            if j != i:
                gamma[i, j, j] = 0.5 * g[i] / g[j] ** 2 * dg[j, i]
    return gamma


def contravariant_connection(
    metric: DiagonalMetric, point: typing.Iterable[typing.Any]
) -> np.ndarray:
    """conn[i, j, k] = Gamma^{ij}_k = -g^i Gamma^j_{ik}."""
    gamma = christoffel(metric, point)
    g = metric.values(point)
    return -g[:, None, None] * np.transpose(gamma, (1, 0, 2))


@dataclasses.dataclass
class CurvatureComponents:
    point: Point
    values: typing.Dict[typing.Tuple[int, int, int], complex]

    def __getitem__(self, key: typing.Tuple[int, int, int]) -> complex:
        return self.values[key]

    def keys(self) -> typing.Iterable[typing.Tuple[int, int, int]]:
        return self.values.keys()


def _component_off(g: np.ndarray, dg: np.ndarray, d2g: np.ndarray, i: int, j: int, l: int) -> complex:
    dlF = (
        dg[j, l] * dg[i, j] / g[i] ** 2
        - 2 * g[j] * dg[i, l] * dg[i, j] / g[i] ** 3
        + g[j] * d2g[i, l, j] / g[i] ** 2
    )
    return (
        -0.5 * g[i] * dlF
        - 0.25 * g[j] / g[i] ** 2 * dg[i, j] * dg[i, l]
        + 0.25 / g[i] * dg[i, j] * dg[j, l]
        - 0.25 * g[j] / (g[i] * g[l]) * dg[l, j] * dg[i, l]
    )


def _component_diag(g: np.ndarray, dg: np.ndarray, d2g: np.ndarray, i: int, j: int) -> complex:
    n = len(g)
    di_ratio = d2g[j, i, i] / g[j] - dg[j, i] ** 2 / g[j] ** 2
    dj_term = (
        dg[j, j] * dg[i, j] / g[i] ** 2
        - 2 * g[j] * dg[i, j] ** 2 / g[i] ** 3
        + g[j] * d2g[i, j, j] / g[i] ** 2
    )
    value = (
        -0.5 * g[i] * di_ratio
        - 0.5 * g[i] * dj_term
        - 0.25 * g[j] / g[i] ** 2 * dg[i, j] ** 2
        + 0.25 * g[i] / g[j] ** 2 * dg[j, i] ** 2
        - 0.25 / g[j] * dg[j, i] * dg[i, i]
    )
    for s in range(n):
        if s != i:
            value += 0.25 * g[s] / (g[i] * g[j]) * dg[j, s] * dg[i, s]
    return value


def riemann_components(
    metric: DiagonalMetric, point: typing.Iterable[typing.Any]
) -> CurvatureComponents:
    """R^{ij}_{il} for i != j, i != l; the only components a diagonal metric needs."""
    p = metric.point(point)
    g, dg, d2g = metric.jet(p)
    n = metric.dimension
    values: typing.Dict[typing.Tuple[int, int, int], complex] = {}
    for i, j, l in itertools.product(range(n), repeat=3):
        if i == j or i == l:
            continue
        if j == l:
            values[(i, j, l)] = complex(_component_diag(g, dg, d2g, i, j))
        else:
            values[(i, j, l)] = complex(_component_off(g, dg, d2g, i, j, l))
    for key, v in values.items():
        if not np.isfinite(v):
            raise NonFiniteError(f"R{key}", p)
    return CurvatureComponents(point=p, values=values)


def _evaluate(
    func: typing.Callable[[Point], typing.Any], grid: Grid, threads: typing.Optional[int]
) -> typing.List[typing.Tuple[Point, typing.Any]]:
    points = list(grid.points())
    return list(zip(points, parallel_map(func, points, threads)))


def constant_curvature_residual(
    metric: DiagonalMetric,
    K: complex,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    """Residual of R^{ij}_{il} = -K delta^j_l over the grid."""
    report = ResidualReport(
        title="constant-curvature", tolerance=tolerance, grid=grid.describe()
    )
    report.equation("R^ij_il (j!=l)")
    report.equation("R^ij_ij + K")
    for p, comps in _evaluate(lambda u: riemann_components(metric, u), grid, threads):
        for (i, j, l), value in comps.values.items():
            if j == l:
                report.add("R^ij_ij + K", value + K, p)
            else:
                report.add("R^ij_il (j!=l)", value, p)
    log.debug(f"constant curvature K={K!r} max={report.max_norm:.3e}")
    return report


def partner_metric(
    metric: DiagonalMetric, f: typing.Sequence[UnivariateFunction]
) -> DiagonalMetric:
    """g1^i = f^i(u^i) g2^i, the pencil partner of g2 in canonical form."""
    n = metric.dimension
    if len(f) != n:
        raise DimensionMismatchError(n, len(f), "eigenvalue functions")

    def component(i: int) -> ScalarField:
        g, fi = metric.g[i], f[i]

        def partial(u: Point, k: int) -> complex:
            value = fi(u[i]) * g.d(u, k)
            if k == i:
                value += fi.d(u[i]) * g(u)
            return value

        return ScalarField(
            func=lambda u: fi(u[i]) * g(u),
            partials={k: (lambda u, k=k: partial(u, k)) for k in range(n)},
            fd_step=g.fd_step,
            name=f"{fi.name}*{g.name}",
        )

    return DiagonalMetric(g=[component(i) for i in range(n)], degeneracy=metric.degeneracy)


def pencil_combination(
    g1: DiagonalMetric,
    g2: DiagonalMetric,
    l1: complex,
    l2: complex,
    grid: typing.Optional[Grid] = None,
) -> DiagonalMetric:
    """Entrywise l1*g1 + l2*g2; degeneracy on the grid is raised."""
    if g1.dimension != g2.dimension:
        raise DimensionMismatchError(g1.dimension, g2.dimension, "metric pair")
    l1, l2 = complex(l1), complex(l2)

    def component(i: int) -> ScalarField:
        a, b = g1.g[i], g2.g[i]
        n = g1.dimension
        return ScalarField(
            func=lambda u: l1 * a(u) + l2 * b(u),
            partials={k: (lambda u, k=k: l1 * a.d(u, k) + l2 * b.d(u, k)) for k in range(n)},
            second_partials={
                (j, k): (lambda u, j=j, k=k: l1 * a.d2(u, j, k) + l2 * b.d2(u, j, k))
                for j in range(n)
                for k in range(j, n)
            },
            fd_step=a.fd_step,
            name=f"g{i + 1}",
        )

    combined = DiagonalMetric(g=[component(i) for i in range(g1.dimension)])
    if grid is not None:
        for p in grid.points():
            combined.values(p)
    return combined


def compatibility_check(
    g1: DiagonalMetric,
    g2: DiagonalMetric,
    lambdas: typing.Sequence[typing.Tuple[complex, complex]],
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    """Linearity of the contravariant connection and curvature along the pencil.

    connection-linearity certifies the compatibility definition; curvature-linearity
    additionally certifies the full component set.
    """
    report = ResidualReport(title="compatibility", tolerance=tolerance, grid=grid.describe())

    def at(comb: DiagonalMetric, l1: complex, l2: complex, u: Point) -> typing.Tuple[float, float]:
        conn = contravariant_connection(comb, u) - (
            l1 * contravariant_connection(g1, u) + l2 * contravariant_connection(g2, u)
        )
        rc, r1, r2 = (riemann_components(m, u) for m in (comb, g1, g2))
        curv = max(abs(rc[key] - l1 * r1[key] - l2 * r2[key]) for key in rc.keys())
        return float(np.max(np.abs(conn))), float(curv)

    for l1, l2 in lambdas:
        label = f"({complex(l1).real:g},{complex(l2).real:g})"
        try:
            comb = pencil_combination(g1, g2, l1, l2, grid)
        except DegenerateMetricError as exc:
            report.note(f"lambda={label} skipped: {exc}")
            continue
        conn_eq = report.equation(f"connection-linearity {label}")
        curv_eq = report.equation(f"curvature-linearity {label}")
        for p, (conn, curv) in _evaluate(
            lambda u: at(comb, complex(l1), complex(l2), u), grid, threads
        ):
            conn_eq.add(conn, p)
            curv_eq.add(curv, p)
    return report


@dataclasses.dataclass
class PencilRoots:
    roots: typing.List[complex]
    nonsingular: bool


def pencil_eigenvalues(
    g1: DiagonalMetric,
    g2: DiagonalMetric,
    point: typing.Iterable[typing.Any],
    rtol: float = 1e-12,
) -> PencilRoots:
    """Roots of det(g1 - lambda g2) = 0 for a diagonal pair."""
    if g1.dimension != g2.dimension:
        raise DimensionMismatchError(g1.dimension, g2.dimension, "metric pair")
    p = g2.point(point)
    denominators = g2.values(p)
    roots = [complex(g1.g[i](p) / denominators[i]) for i in range(g1.dimension)]
    scale = max(1.0, max(abs(r) for r in roots))
    nonsingular = all(
        abs(a - b) > rtol * scale for a, b in itertools.combinations(roots, 2)
    )
    return PencilRoots(roots=roots, nonsingular=nonsingular)


@dataclasses.dataclass
class CanonicalForm:
    """Sampled f^i along each axis and the residual of the single-variable test."""

    samples: typing.List[typing.List[typing.Tuple[float, complex]]]
    report: ResidualReport


def extract_canonical_f(
    g1: DiagonalMetric, g2: DiagonalMetric, grid: Grid, tolerance: float = 1e-8
) -> CanonicalForm:
    n = g1.dimension
    if grid.dimension != n:
        raise DimensionMismatchError(n, grid.dimension, "grid")
    report = ResidualReport(title="canonical-form", tolerance=tolerance, grid=grid.describe())
    ratios = np.empty(grid.shape + (n,), dtype=complex)
    for index in itertools.product(*(range(m) for m in grid.shape)):
        u = [grid.axes[k][index[k]] for k in range(n)]
        ratios[index] = pencil_eigenvalues(g1, g2, u).roots
    samples = []
    for i in range(n):
        eq = report.equation(f"r{i + 1} single-variable")
        line = []
        for a, x in enumerate(grid.axes[i]):
            block = np.take(ratios[..., i], a, axis=i)
            spread = float(np.max(block.real) - np.min(block.real)) + float(
                np.max(block.imag) - np.min(block.imag)
            )
            u = [float(ax[0]) for ax in grid.axes]
            u[i] = float(x)
            eq.add(spread, u)
            line.append((float(x), complex(np.mean(block))))
        samples.append(line)
    return CanonicalForm(samples=samples, report=report)


def h_form_residual(
    frame: LameFrame,
    K: complex,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    """Constant-curvature conditions written directly in the Lame coefficients."""
    n = frame.dimension
    eps = frame.epsilon
    report = ResidualReport(title="h-form", tolerance=tolerance, grid=grid.describe())
    report.equation("mixed", note="vacuous for N=2" if n < 3 else "")
    report.equation("curvature")

    def at(u: Point) -> typing.Tuple[typing.List[complex], typing.List[complex]]:
        H = frame.values(u)
        dH = [[frame.H[i].d(u, k) for k in range(n)] for i in range(n)]
        mixed = []
        for i, j, k in itertools.permutations(range(n), 3):
            mixed.append(
                frame.H[j].d2(u, i, k)
                - dH[j][i] * dH[i][k] / H[i]
                - dH[k][i] * dH[j][k] / H[k]
            )
        curvature = []
        for i, j in itertools.combinations(range(n), 2):
            value = (
                eps[i] * (frame.H[j].d2(u, i, i) / H[i] - dH[j][i] * dH[i][i] / H[i] ** 2)
                + eps[j] * (frame.H[i].d2(u, j, j) / H[j] - dH[i][j] * dH[j][j] / H[j] ** 2)
                + K * H[i] * H[j]
            )
            for s in range(n):
                if s not in (i, j):
                    value += eps[s] * dH[i][s] * dH[j][s] / H[s] ** 2
            curvature.append(value)
        return mixed, curvature

    for p, (mixed, curvature) in _evaluate(at, grid, threads):
        for v in mixed:
            report.add("mixed", v, p)
        for v in curvature:
            report.add("curvature", v, p)
    return report
