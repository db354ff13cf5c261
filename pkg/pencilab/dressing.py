import dataclasses
import functools
import itertools
import typing

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg

from . import get_settings, log
from .errors import (
    BranchError,
    DecayBoundError,
    DimensionMismatchError,
    IllConditionedError,
    InvalidConstantsError,
)
from .fields import Grid, Point, ScalarField, as_point
from .lame import (
    RotationCoefficients,
    SystemInstance,
    frame_from_rotation,
    residual_suite,
)
from .pencil import PencilSpec
from .report import ResidualReport

Pair = typing.Tuple[int, int]
Array = np.ndarray
BivariateFunc = typing.Callable[[Array, Array], Array]
KernelEntry = typing.Callable[[Array, Array], Array]


def _fd_step() -> float:
    return get_settings().fd_step


@dataclasses.dataclass
class Potential:
    """Vectorized function of two variables with optional analytic partials."""

    func: BivariateFunc
    dx: typing.Optional[BivariateFunc] = None
    dy: typing.Optional[BivariateFunc] = None
    dxy: typing.Optional[BivariateFunc] = None
    name: str = "phi"

    def __call__(self, x: typing.Any, y: typing.Any) -> Array:
        return np.asarray(self.func(np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)))

    def d_x(self, x: typing.Any, y: typing.Any) -> Array:
        x, y = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
        if self.dx is not None:
            return np.asarray(self.dx(x, y))
        h = _fd_step()
        return (self.func(x + h, y) - self.func(x - h, y)) / (2 * h)

    def d_y(self, x: typing.Any, y: typing.Any) -> Array:
        x, y = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
        if self.dy is not None:
            return np.asarray(self.dy(x, y))
        h = _fd_step()
        return (self.func(x, y + h) - self.func(x, y - h)) / (2 * h)

    def d_xy(self, x: typing.Any, y: typing.Any) -> Array:
        x, y = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
        if self.dxy is not None:
            return np.asarray(self.dxy(x, y))
        h = _fd_step()
        if self.dx is not None:
            return (self.dx(x, y + h) - self.dx(x, y - h)) / (2 * h)
        if self.dy is not None:
            return (self.dy(x + h, y) - self.dy(x - h, y)) / (2 * h)
        h *= 10
        f = self.func
        return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (
            4 * h * h
        )


@dataclasses.dataclass
class Potentials:
    """Phi_ij for i <= j; missing pairs are identically zero."""

    phi: typing.Dict[Pair, Potential]
    dimension: int

    def __post_init__(self) -> None:
        for i, j in self.phi:
            if i > j or j >= self.dimension or i < 0:
                raise DimensionMismatchError(self.dimension, j + 1, f"potential index ({i},{j})")

    def skew_residual(self, samples: typing.Sequence[typing.Tuple[float, float]]) -> float:
        """max |Phi_ii(x,y) + Phi_ii(y,x)| over the samples."""
        worst = 0.0
        x = np.array([s[0] for s in samples], dtype=complex)
        y = np.array([s[1] for s in samples], dtype=complex)
        for (i, j), p in self.phi.items():
            if i == j:
                worst = max(worst, float(np.max(np.abs(p(x, y) + p(y, x)))))
        return worst

    @classmethod
    def zero(cls, n: int) -> "Potentials":
        return cls(phi={}, dimension=n)


@dataclasses.dataclass
class Kernel:
    """Matrix kernel F_ij(s, s') at fixed coordinates u; entries are vectorized."""

    entries: typing.Dict[Pair, KernelEntry]
    dimension: int
    u: typing.Optional[Point] = None

    def entry(self, i: int, j: int, s: typing.Any, t: typing.Any) -> Array:
        s = np.asarray(s, dtype=complex)
        t = np.asarray(t, dtype=complex)
        func = self.entries.get((i, j))
        if func is None:
            return np.zeros(np.broadcast(s, t).shape, dtype=complex)
        return np.asarray(func(s, t), dtype=complex) * np.ones(np.broadcast(s, t).shape)

    def block(self, rows: Array, cols: Array) -> Array:
        """B[(l, m), (j, n)] = F_lj(rows[m], cols[n]), l-major."""
        n = self.dimension
        S, T = np.meshgrid(rows, cols, indexing="ij")
        out = np.zeros((n * len(rows), n * len(cols)), dtype=complex)
        for l, j in itertools.product(range(n), repeat=2):
            out[l * len(rows) : (l + 1) * len(rows), j * len(cols) : (j + 1) * len(cols)] = (
                self.entry(l, j, S, T)
            )
        return out

    def row(self, s: complex, cols: Array) -> Array:
        """R[i, (j, n)] = F_ij(s, cols[n])."""
        n = self.dimension
        return np.array(
            [np.concatenate([self.entry(i, j, s, cols) for j in range(n)]) for i in range(n)]
        )

    def at(self, s: complex, t: complex) -> Array:
        n = self.dimension
        return np.array(
            [[complex(self.entry(i, j, s, t)) for j in range(n)] for i in range(n)]
        )


def assemble_F(potentials: Potentials, u: typing.Iterable[typing.Any]) -> Kernel:
    """Kernel from potentials; F_ij = d_s Phi_ij(s-u^i, s'-u^j), F_ji by the skew rule."""
    p = as_point(u)
    n = potentials.dimension
    if len(p) != n:
        raise DimensionMismatchError(n, len(p))
    entries: typing.Dict[Pair, KernelEntry] = {}
    for (i, j), phi in potentials.phi.items():
        ui, uj = p[i], p[j]
        if i == j:
            entries[(i, i)] = lambda s, t, phi=phi, ui=ui: phi.d_x(s - ui, t - ui)
            continue
        entries[(i, j)] = lambda s, t, phi=phi, ui=ui, uj=uj: phi.d_x(s - ui, t - uj)
        entries[(j, i)] = lambda s, t, phi=phi, ui=ui, uj=uj: -phi.d_y(t - ui, s - uj)
    return Kernel(entries=entries, dimension=n, u=p)


def zakharov_relation_residual(
    kernel: Kernel,
    samples: typing.Sequence[typing.Tuple[float, float]],
    tolerance: float = 1e-6,
) -> ResidualReport:
    """max |d_s' F_ij(s,s') + d_s F_ji(s',s)| by central differences."""
    report = ResidualReport(title="zakharov", tolerance=tolerance, grid=f"{len(samples)} pairs")
    report.equation("zakharov")
    h = _fd_step()
    n = kernel.dimension
    s = np.array([p[0] for p in samples], dtype=complex)
    t = np.array([p[1] for p in samples], dtype=complex)
    for i, j in itertools.product(range(n), repeat=2):
        left = (kernel.entry(i, j, s, t + h) - kernel.entry(i, j, s, t - h)) / (2 * h)
        right = (kernel.entry(j, i, t, s + h) - kernel.entry(j, i, t, s - h)) / (2 * h)
        for k, value in enumerate(left + right):
            report.add("zakharov", value, (s[k], t[k]))
    return report


def reduction_pde_residual(
    potentials: Potentials,
    pencil: PencilSpec,
    samples: typing.Sequence[typing.Tuple[float, float]],
    tolerance: float = 1e-6,
) -> ResidualReport:
    """Second-order reduction equations in the potentials' own arguments (x, y).

    With x = s - u^i and y = s' - u^j the pencil enters as f^i(-x) and f^j(-y).
    """
    report = ResidualReport(title="reduction", tolerance=tolerance, grid=f"{len(samples)} pairs")
    x = np.array([p[0] for p in samples], dtype=complex)
    y = np.array([p[1] for p in samples], dtype=complex)
    fi_vals: typing.Dict[int, typing.Tuple[Array, Array, Array, Array]] = {}
    for k, fk in enumerate(pencil.f):
        fi_vals[k] = (
            np.array([fk(-v) for v in x]),
            np.array([fk.d(-v) for v in x]),
            np.array([fk(-v) for v in y]),
            np.array([fk.d(-v) for v in y]),
        )
    for (i, j), phi in potentials.phi.items():
        name = f"reduction {i + 1}{j + 1}"
        report.equation(name)
        fx, dfx, _, _ = fi_vals[i]
        _, _, fy, dfy = fi_vals[j]
        value = 2 * phi.d_xy(x, y) * (fx - fy) - phi.d_y(x, y) * dfx + phi.d_x(x, y) * dfy
        for k, v in enumerate(value):
            report.add(name, v, (x[k], y[k]))
    return report


@dataclasses.dataclass
class Discretization:
    """Composite Gauss-Legendre rule on [s_min, s_max]."""

    s_min: float
    s_max: float
    nodes: Array
    weights: Array

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def length(self) -> float:
        return self.s_max - self.s_min


def composite_gauss_legendre(
    s_min: float, s_max: float, nodes: int = 96, panel_nodes: int = 16
) -> Discretization:
    if s_max <= s_min:
        raise InvalidConstantsError([s_min, s_max], "s_max must exceed s_min")
    if nodes < panel_nodes or nodes % panel_nodes != 0:
        raise InvalidConstantsError([nodes, panel_nodes], "nodes must be a multiple of panel_nodes")
    x, w = legendre.leggauss(panel_nodes)
    edges = np.linspace(s_min, s_max, nodes // panel_nodes + 1)
    q, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        q.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    return Discretization(
        s_min=float(s_min), s_max=float(s_max), nodes=np.concatenate(q), weights=np.concatenate(weights)
    )


@dataclasses.dataclass
class QuadratureConfig:
    """How the half-line integral is truncated and discretized at a given s."""

    nodes: int = 96
    panel_nodes: int = 16
    span: float = 12.0
    trunc_tol: float = 1e-8
    cond_limit: typing.Optional[float] = None
    solver_tol: typing.Optional[float] = None

    def at(self, s: float) -> Discretization:
        return composite_gauss_legendre(s, s + self.span, self.nodes, self.panel_nodes)

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class DecayBound:
    observed: float
    trunc_tol: float
    s_max: float


def decay_check(kernel: Kernel, disc: Discretization, trunc_tol: float) -> DecayBound:
    """max |F_lj(s_max, s')| over the nodes must not exceed trunc_tol."""
    observed = 0.0
    for l, j in itertools.product(range(kernel.dimension), repeat=2):
        values = kernel.entry(l, j, disc.s_max, disc.nodes)
        observed = max(observed, float(np.max(np.abs(values))))
    if observed > trunc_tol:
        raise DecayBoundError(observed, trunc_tol, disc.s_max)
    return DecayBound(observed=observed, trunc_tol=trunc_tol, s_max=disc.s_max)


def born_norm(kernel: Kernel, disc: Discretization) -> float:
    """Crude operator norm N * L * max|F| on the node set."""
    block = kernel.block(disc.nodes, disc.nodes)
    return kernel.dimension * disc.length * float(np.max(np.abs(block)))


@dataclasses.dataclass
class ResolventKernel:
    """K_i.(s, q) on the nodes for fixed (s, u), with solve metadata."""

    kernel: Kernel
    s: float
    disc: Discretization
    X: Array
    cond: float
    residual: float

    def at(self, i: int, j: int, t: typing.Any) -> Array:
        """Nystrom interpolation of K_ij(s, t)."""
        n, m = self.kernel.dimension, self.disc.size
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        value = self.kernel.entry(i, j, self.s, t)
        for l in range(n):
            coeff = self.X[i, l * m : (l + 1) * m] * self.disc.weights
            value = value + coeff @ self.kernel.entry(
                l, j, self.disc.nodes[:, None], t[None, :]
            )
        return value

    def diagonal(self) -> Array:
        """K(s, s) as an N x N matrix."""
        n = self.kernel.dimension
        return np.array(
            [[complex(self.at(i, j, self.s)[0]) for j in range(n)] for i in range(n)]
        )

    def on_nodes(self) -> Array:
        n, m = self.kernel.dimension, self.disc.size
        return self.X.reshape(n, n, m)


def solve_marchenko(
    kernel: Kernel,
    s: float,
    disc: Discretization,
    cond_limit: typing.Optional[float] = None,
    solver_tol: typing.Optional[float] = None,
) -> ResolventKernel:
    """Nystrom solution of K = F + int_s K F dq on the given rule.

    For fixed s the unknown rows satisfy X (I - W F) = F_row; the transposed system
    is factorized once and solved for every row.
    """
    settings = get_settings()
    cond_limit = cond_limit if cond_limit is not None else settings.cond_limit
    solver_tol = solver_tol if solver_tol is not None else settings.solver_tol
    n, m = kernel.dimension, disc.size
    w = np.tile(disc.weights, n)
    WF = w[:, None] * kernel.block(disc.nodes, disc.nodes)
    A = np.eye(n * m) - WF
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedError(cond, cond_limit, s)
    rhs = kernel.row(s, disc.nodes)
    X = linalg.lu_solve(linalg.lu_factor(A.T), rhs.T).T
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    residual = float(np.max(np.abs(X @ A - rhs))) / scale
    if residual > solver_tol and float(np.max(np.abs(rhs))) > 0:
        log.warning(f"nystrom residual above tolerance s={s!r} residual={residual:.3e}")
    log.debug(f"solved s={s!r} cond={cond:.3e} residual={residual:.3e}")
    return ResolventKernel(kernel=kernel, s=float(s), disc=disc, X=X, cond=cond, residual=residual)


def beta_from_kernel(K: ResolventKernel) -> Array:
    """beta_ij(s, u) = K_ji(s, s, u); the diagonal is zero."""
    beta = K.diagonal().T.copy()
    np.fill_diagonal(beta, 0)
    return beta


def neumann_series(kernel: Kernel, s: float, disc: Discretization, terms: int = 3) -> typing.List[Array]:
    """Terms F, F o F, ... of the series on the nodes, each shaped like the Nystrom rows."""
    n = kernel.dimension
    WF = np.tile(disc.weights, n)[:, None] * kernel.block(disc.nodes, disc.nodes)
    term = kernel.row(s, disc.nodes)
    out = [term]
    for _ in range(terms - 1):
        term = term @ WF
        out.append(term)
    return out


def rank_one_resolvent(
    phi: typing.Callable[[Array], Array],
    psi: typing.Callable[[Array], Array],
    s: float,
    t: Array,
    disc: Discretization,
) -> Array:
    """Closed-form K for the scalar separable kernel phi(s) psi(s')."""
    integral = np.sum(disc.weights * psi(disc.nodes) * phi(disc.nodes))
    return phi(np.asarray(s)) * psi(np.asarray(t)) / (1 - integral)


def separable_kernel(
    phi: typing.Callable[[Array], Array], psi: typing.Callable[[Array], Array]
) -> Kernel:
    return Kernel(entries={(0, 0): lambda s, t: phi(s) * psi(t)}, dimension=1)


def scaled_kernel(kernel: Kernel, pencil: PencilSpec, disc: typing.Optional[Discretization] = None) -> Kernel:
    """F~_ij(s,s') = sqrt(f^j(u^j-s'))/sqrt(f^i(u^i-s)) F_ij(s,s') on principal branches.

    When a rule is given, a zero or sign change of Re f^i(u^i-q) across its nodes, or a
    step across the negative real axis between neighbouring nodes, is a branch crossing
    and raises.
    """
    if kernel.u is None:
        raise InvalidConstantsError([], "scaling needs a kernel assembled at coordinates u")
    u = kernel.u
    n = kernel.dimension

    def root(k: int, s: Array) -> Array:
        values = np.vectorize(lambda v: pencil.f[k](u[k] - v), otypes=[complex])(s)
        return np.sqrt(values)

    if disc is not None:
        for k in range(n):
            values = np.array([pencil.f[k](u[k] - q) for q in disc.nodes])
            re = values.real
            a, b = values[:-1], values[1:]
            wraps = (a.real < 0) & (b.real < 0) & (a.imag * b.imag < 0)
            if np.any(values == 0) or (np.any(re > 0) and np.any(re < 0)) or np.any(wraps):
                bad = int(np.argmin(np.abs(values)))
                raise BranchError(f"f{k + 1}(u{k + 1}-q)", complex(values[bad]), u)


    entries: typing.Dict[Pair, KernelEntry] = {}
    for (i, j), func in kernel.entries.items():
        entries[(i, j)] = lambda s, t, func=func, i=i, j=j: root(j, t) / root(i, s) * func(s, t)
    return Kernel(entries=entries, dimension=n, u=u)


def tilde_scaling_check(
    potentials: Potentials,
    pencil: PencilSpec,
    s: float,
    u: typing.Iterable[typing.Any],
    config: QuadratureConfig,
    tolerance: float = 1e-8,
) -> ResidualReport:
    """Solve with F and with F~ and compare K~ with the scaled K."""
    p = as_point(u)
    disc = config.at(s)
    kernel = assemble_F(potentials, p)
    tilde = scaled_kernel(kernel, pencil, disc)
    K = solve_marchenko(kernel, s, disc, config.cond_limit, config.solver_tol)
    Kt = solve_marchenko(tilde, s, disc, config.cond_limit, config.solver_tol)
    n, m = kernel.dimension, disc.size
    report = ResidualReport(title="tilde-scaling", tolerance=tolerance, grid=f"u={p!r} s={s!r}")
    fs = np.array([np.sqrt(complex(pencil.f[k](p[k] - s))) for k in range(n)])
    fq = np.array([[np.sqrt(complex(pencil.f[k](p[k] - q))) for q in disc.nodes] for k in range(n)])
    diag, diag_t = K.diagonal(), Kt.diagonal()
    nodes, nodes_t = K.on_nodes(), Kt.on_nodes()
    report.equation("diagonal")
    report.equation("nodes")
    for i, j in itertools.product(range(n), repeat=2):
        report.add("diagonal", diag_t[i, j] - fs[j] / fs[i] * diag[i, j], p)
        scaled = fq[j] / fs[i] * nodes[i, j]
        report.add("nodes", float(np.max(np.abs(nodes_t[i, j] - scaled))) if m else 0.0, p)
    return report


class DressedBeta:
    """Rotation coefficients of the dressed family at fixed s, one solve per point."""

    def __init__(
        self, potentials: Potentials, s: float, config: QuadratureConfig, cache_size: int = 4096
    ) -> None:
        self.potentials = potentials
        self.s = s
        self.config = config
        self.disc = config.at(s)
        self.solves = 0
        self._solve = functools.lru_cache(maxsize=cache_size)(self._compute)

    def _compute(self, key: typing.Tuple[float, ...]) -> Array:
        p = as_point(key)
        kernel = assemble_F(self.potentials, p)
        decay_check(kernel, self.disc, self.config.trunc_tol)
        K = solve_marchenko(
            kernel, self.s, self.disc, self.config.cond_limit, self.config.solver_tol
        )
        value = beta_from_kernel(K)
        self.solves += 1
        return value

    def matrix(self, u: typing.Iterable[typing.Any]) -> Array:
        return self._solve(tuple(round(v.real, 14) for v in as_point(u)))

    def coefficients(self) -> RotationCoefficients:
        n = self.potentials.dimension
        return RotationCoefficients(
            beta={
                (i, j): ScalarField(
                    func=lambda u, i=i, j=j: self.matrix(u)[i, j], name=f"beta{i + 1}{j + 1}"
                )
                for i, j in itertools.permutations(range(n), 2)
            },
            dimension=n,
        )


@dataclasses.dataclass
class DressingResult:
    instance: SystemInstance
    report: ResidualReport
    beta: DressedBeta
    path_residual: float


def _reduction_samples(
    grid: Grid, disc: Discretization, count: int = 4
) -> typing.List[typing.Tuple[float, float]]:
    ss = np.linspace(disc.s_min, disc.s_max, count)
    corners = [grid.lower, grid.upper]
    out = []
    for corner in corners:
        for a, b in itertools.product(ss, repeat=2):
            for i, j in itertools.product(range(grid.dimension), repeat=2):
                out.append((a - corner[i], b - corner[j]))
    return sorted(set(out))


def dress(
    potentials: Potentials,
    pencil: PencilSpec,
    s: float,
    grid: Grid,
    config: QuadratureConfig,
    tolerance: float = 1e-5,
    substeps: int = 2,
    threads: typing.Optional[int] = None,
    frame_tolerance: float = 1e-4,
) -> DressingResult:
    """Dressed rotation coefficients at parameter s, their frame, and the residual suite.

    The dressed family at s solves the flat system with the pencil f^i(u^i - s). The
    frame equation is held to frame_tolerance since H is an interpolant.
    """
    n = potentials.dimension
    if pencil.dimension != n or grid.dimension != n:
        got = pencil.dimension if pencil.dimension != n else grid.dimension
        raise DimensionMismatchError(n, got)
    report = ResidualReport(title="dressing", tolerance=tolerance, grid=grid.describe())
    disc = config.at(s)
    samples = _reduction_samples(grid, disc)
    report.merge(reduction_pde_residual(potentials, pencil, samples, tolerance))
    if not report.passed:
        log.warning(f"reduction equations fail on potentials failures={report.failures()}")
    zsamples = [(a, b) for a, b in itertools.product(disc.nodes[:: max(1, disc.size // 8)], repeat=2)]
    report.merge(zakharov_relation_residual(assemble_F(potentials, grid.lower), zsamples, tolerance))

    dressed = DressedBeta(potentials, s, config)
    beta = dressed.coefficients()
    reconstruction = frame_from_rotation(beta, grid, substeps=substeps, threads=threads)
    flat = pencil.shifted(s)
    flat.K1 = flat.K2 = 0j
    instance = SystemInstance(beta=beta, frame=reconstruction.frame, pencil=flat)
    report.merge(residual_suite(instance, grid, tolerance, threads))
    report["frame"].tolerance = max(tolerance, frame_tolerance)
    path = report.equation("path-independence", note="vacuous for N=2" if n < 3 else "")
    path.add(reconstruction.path_residual, grid.lower)
    log.info(
        f"dressed s={s!r} solves={dressed.solves} passed={report.passed} max={report.max_norm:.3e}"
    )
    return DressingResult(
        instance=instance, report=report, beta=dressed, path_residual=reconstruction.path_residual
    )
