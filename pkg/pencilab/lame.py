import dataclasses
import itertools
import typing

import numpy as np
from scipy import interpolate

from . import log, parallel_map
from .errors import (
    DimensionMismatchError,
    EigenvalueCollisionError,
    InvalidConstantsError,
    ZeroLameCoefficientError,
)
from .fields import Grid, Point, ScalarField, as_point, principal_sqrt
from .metric import LameFrame
from .pencil import PencilSpec
from .report import ResidualReport

Pair = typing.Tuple[int, int]


@dataclasses.dataclass
class RotationCoefficients:
    """Off-diagonal field matrix beta_ij(u); the diagonal is unused."""

    beta: typing.Dict[Pair, ScalarField]
    dimension: int

    def __post_init__(self) -> None:
        for i, j in self.beta:
            if i == j or not (0 <= i < self.dimension and 0 <= j < self.dimension):
                raise DimensionMismatchError(self.dimension, max(i, j) + 1, "rotation index")

    def __call__(self, u: typing.Iterable[typing.Any], i: int, j: int) -> complex:
        return self.beta[(i, j)](u)

    def d(self, u: typing.Iterable[typing.Any], i: int, j: int, k: int) -> complex:
        return self.beta[(i, j)].d(u, k)

    def matrix(self, u: typing.Iterable[typing.Any]) -> np.ndarray:
        p = as_point(u)
        out = np.zeros((self.dimension, self.dimension), dtype=complex)
        for (i, j), field in self.beta.items():
            out[i, j] = field(p)
        return out

    def perturbed(self, i: int, j: int, delta: complex) -> "RotationCoefficients":
        beta = dict(self.beta)
        base = beta[(i, j)]
        beta[(i, j)] = ScalarField(
            func=lambda u: base(u) + delta,
            partials={k: (lambda u, k=k: base.d(u, k)) for k in range(self.dimension)},
            fd_step=base.fd_step,
            name=f"{base.name}+{complex(delta).real:g}",
        )
        return RotationCoefficients(beta=beta, dimension=self.dimension)

    @classmethod
    def zero(cls, n: int) -> "RotationCoefficients":
        return cls(
            beta={
                (i, j): ScalarField.constant(0.0, name=f"beta{i + 1}{j + 1}")
                for i, j in itertools.permutations(range(n), 2)
            },
            dimension=n,
        )


@dataclasses.dataclass
class SystemInstance:
    beta: RotationCoefficients
    frame: LameFrame
    pencil: PencilSpec
    nonsingular: typing.Optional[bool] = None

    def __post_init__(self) -> None:
        n = self.frame.dimension
        for what, got in (("rotation", self.beta.dimension), ("pencil", self.pencil.dimension)):
            if got != n:
                raise DimensionMismatchError(n, got, what)

    @property
    def dimension(self) -> int:
        return self.frame.dimension

    def record_singularity(self, grid: Grid) -> bool:
        self.nonsingular = self.pencil.is_nonsingular(grid)
        return self.nonsingular


def rotation_from_frame(frame: LameFrame) -> RotationCoefficients:
    """beta_ik = (1/H_i) dH_k/du^i with analytic partials from the frame's jet."""
    n = frame.dimension

    def entry(i: int, k: int) -> ScalarField:
        hi, hk = frame.H[i], frame.H[k]

        def value(u: Point) -> complex:
            h = hi(u)
            if h == 0:
                raise ZeroLameCoefficientError(i, u)
            return hk.d(u, i) / h

        def partial(u: Point, j: int) -> complex:
            h = hi(u)
            if h == 0:
                raise ZeroLameCoefficientError(i, u)
            return -hi.d(u, j) / h ** 2 * hk.d(u, i) + hk.d2(u, j, i) / h

        return ScalarField(
            func=value,
            partials={j: (lambda u, j=j: partial(u, j)) for j in range(n)},
            fd_step=hk.fd_step,
            name=f"beta{i + 1}{k + 1}",
        )

    return RotationCoefficients(
        beta={(i, k): entry(i, k) for i, k in itertools.permutations(range(n), 2)},
        dimension=n,
    )


def _others(n: int, *skip: int) -> typing.Iterator[int]:
    return (s for s in range(n) if s not in skip)


def lam1_pointwise(
    beta: RotationCoefficients, u: Point
) -> typing.Dict[typing.Tuple[int, int, int], complex]:
    n = beta.dimension
    return {
        (i, j, k): beta.d(u, i, j, k) - beta(u, i, k) * beta(u, k, j)
        for i, j, k in itertools.permutations(range(n), 3)
    }


def lam2_pointwise(
    beta: RotationCoefficients, frame: LameFrame, K2: complex, u: Point
) -> typing.Dict[Pair, complex]:
    n = beta.dimension
    eps = frame.epsilon
    H = frame.values(u)
    out = {}
    for i, j in itertools.combinations(range(n), 2):
        value = eps[i] * beta.d(u, i, j, i) + eps[j] * beta.d(u, j, i, j) + K2 * H[i] * H[j]
        for s in _others(n, i, j):
            value += eps[s] * beta(u, s, i) * beta(u, s, j)
        out[(i, j)] = value
    return out


def lam3_pointwise(
    beta: RotationCoefficients, frame: LameFrame, pencil: PencilSpec, u: Point
) -> typing.Dict[Pair, complex]:
    n = beta.dimension
    eps = frame.epsilon
    H = frame.values(u)
    f = pencil.values(u)
    df = pencil.derivatives(u)
    out = {}
    for i, j in itertools.combinations(range(n), 2):
        value = (
            eps[i] * f[i] * beta.d(u, i, j, i)
            + 0.5 * eps[i] * df[i] * beta(u, i, j)
            + eps[j] * f[j] * beta.d(u, j, i, j)
            + 0.5 * eps[j] * df[j] * beta(u, j, i)
            + pencil.K1 * H[i] * H[j]
        )
        for s in _others(n, i, j):
            value += eps[s] * f[s] * beta(u, s, i) * beta(u, s, j)
        out[(i, j)] = value
    return out


def frame_pointwise(
    beta: RotationCoefficients, frame: LameFrame, u: Point
) -> typing.Dict[Pair, complex]:
    H = frame.values(u)
    return {
        (i, j): frame.H[j].d(u, i) - beta(u, i, j) * H[i]
        for i, j in itertools.permutations(range(beta.dimension), 2)
    }


def alt_form_pointwise(
    beta: RotationCoefficients, frame: LameFrame, pencil: PencilSpec, u: Point
) -> typing.Dict[Pair, complex]:
    n = beta.dimension
    eps = frame.epsilon
    H = frame.values(u)
    f = pencil.values(u)
    df = pencil.derivatives(u)
    scale = max(1.0, max(abs(v) for v in f))
    out = {}
    for i, j in itertools.permutations(range(n), 2):
        gap = f[j] - f[i]
        if abs(gap) <= 1e-12 * scale:
            raise EigenvalueCollisionError(i, j, u)
        value = (
            beta.d(u, i, j, i)
            - 0.5 * df[i] / gap * beta(u, i, j)
            - 0.5 * eps[i] * eps[j] * df[j] / gap * beta(u, j, i)
            - eps[i] * (pencil.K1 - pencil.K2 * f[j]) / gap * H[i] * H[j]
        )
        for s in _others(n, i, j):
            value += eps[i] * eps[s] * (f[j] - f[s]) / gap * beta(u, s, i) * beta(u, s, j)
        out[(i, j)] = value
    return out


def constant_f_pointwise(
    beta: RotationCoefficients,
    frame: LameFrame,
    c: typing.Sequence[complex],
    K1: complex,
    K2: complex,
    u: Point,
) -> typing.Dict[Pair, complex]:
    n = beta.dimension
    eps = frame.epsilon
    H = frame.values(u)
    out = {}
    for i, j in itertools.permutations(range(n), 2):
        gap = c[j] - c[i]
        value = beta.d(u, i, j, i) - eps[i] * (K1 - K2 * c[j]) / gap * H[i] * H[j]
        for s in _others(n, i, j):
            value += eps[i] * eps[s] * (c[j] - c[s]) / gap * beta(u, s, i) * beta(u, s, j)
        out[(i, j)] = value
    return out


def _report(
    title: str,
    equation: str,
    pointwise: typing.Callable[[Point], typing.Mapping[typing.Any, complex]],
    grid: Grid,
    tolerance: float,
    threads: typing.Optional[int],
    note: str = "",
) -> ResidualReport:
    report = ResidualReport(title=title, tolerance=tolerance, grid=grid.describe())
    report.equation(equation, note=note)
    points = list(grid.points())
    for p, values in zip(points, parallel_map(pointwise, points, threads)):
        for value in values.values():
            report.add(equation, value, p)
    return report


def residual_lam1(
    beta: RotationCoefficients,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    note = "vacuous for N=2" if beta.dimension < 3 else ""
    return _report(
        "lam1", "lam1", lambda u: lam1_pointwise(beta, u), grid, tolerance, threads, note
    )


def residual_lam2(
    beta: RotationCoefficients,
    frame: LameFrame,
    K2: complex,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    return _report(
        "lam2", "lam2", lambda u: lam2_pointwise(beta, frame, K2, u), grid, tolerance, threads
    )


def residual_lam3(
    beta: RotationCoefficients,
    frame: LameFrame,
    pencil: PencilSpec,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    return _report(
        "lam3", "lam3", lambda u: lam3_pointwise(beta, frame, pencil, u), grid, tolerance, threads
    )


def residual_frame(
    beta: RotationCoefficients,
    frame: LameFrame,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    return _report(
        "frame", "frame", lambda u: frame_pointwise(beta, frame, u), grid, tolerance, threads
    )


def residual_alt_form(
    beta: RotationCoefficients,
    frame: LameFrame,
    pencil: PencilSpec,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    pencil.check_nonsingular(grid)
    return _report(
        "alt-form",
        "alt-form",
        lambda u: alt_form_pointwise(beta, frame, pencil, u),
        grid,
        tolerance,
        threads,
    )


def constant_f_residual(
    beta: RotationCoefficients,
    frame: LameFrame,
    c: typing.Sequence[complex],
    K1: complex,
    K2: complex,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    consts = [complex(v) for v in c]
    if len(consts) != beta.dimension:
        raise DimensionMismatchError(beta.dimension, len(consts), "constants")
    if any(v == 0 for v in consts):
        raise InvalidConstantsError(consts, "constants must be nonzero")
    if len(set(consts)) != len(consts):
        raise InvalidConstantsError(consts, "constants must be pairwise distinct")
    report = ResidualReport(title="constant-f", tolerance=tolerance, grid=grid.describe())
    report.merge(residual_lam1(beta, grid, tolerance, threads))
    report.merge(
        _report(
            "lam2co",
            "lam2co",
            lambda u: constant_f_pointwise(beta, frame, consts, K1, K2, u),
            grid,
            tolerance,
            threads,
        )
    )
    report.merge(residual_frame(beta, frame, grid, tolerance, threads))
    return report


@dataclasses.dataclass
class ScaledFrame:
    H_tilde: LameFrame
    beta_tilde: RotationCoefficients
    eps_hat: typing.List[int]


def scale_frame(
    frame: LameFrame,
    pencil: PencilSpec,
    eps_hat: typing.Optional[typing.Sequence[int]] = None,
    beta: typing.Optional[RotationCoefficients] = None,
) -> ScaledFrame:
    """H_i/sqrt(eps_hat^i f^i) and the matching rotation coefficients.

    The scaled frame carries signature eps^i * eps_hat^i.
    """
    n = frame.dimension
    signs = list(eps_hat) if eps_hat is not None else [1] * n
    if len(signs) != n:
        raise DimensionMismatchError(n, len(signs), "eps_hat")
    beta = beta if beta is not None else rotation_from_frame(frame)

    def D(u: Point, i: int) -> complex:
        return principal_sqrt(signs[i] * pencil.f[i](u[i]), what=f"eps_hat{i + 1}*f{i + 1}")

    def dD(u: Point, i: int) -> complex:
        return signs[i] * pencil.f[i].d(u[i]) / (2 * D(u, i))

    def h_tilde(i: int) -> ScalarField:
        h = frame.H[i]

        def partial(u: Point, k: int) -> complex:
            value = h.d(u, k) / D(u, i)
            if k == i:
                value -= h(u) * dD(u, i) / D(u, i) ** 2
            return value

        return ScalarField(
            func=lambda u: h(u) / D(u, i),
            partials={k: (lambda u, k=k: partial(u, k)) for k in range(n)},
            fd_step=h.fd_step,
            name=f"H~{i + 1}",
        )

    def beta_tilde(i: int, j: int) -> ScalarField:
        def partial(u: Point, k: int) -> complex:
            ratio = D(u, i) / D(u, j)
            value = ratio * beta.d(u, i, j, k)
            if k == i:
                value += dD(u, i) / D(u, j) * beta(u, i, j)
            if k == j:
                value -= ratio * dD(u, j) / D(u, j) * beta(u, i, j)
            return value

        return ScalarField(
            func=lambda u: D(u, i) / D(u, j) * beta(u, i, j),
            partials={k: (lambda u, k=k: partial(u, k)) for k in range(n)},
            name=f"beta~{i + 1}{j + 1}",
        )

    return ScaledFrame(
        H_tilde=LameFrame(
            H=[h_tilde(i) for i in range(n)],
            epsilon=[e * s for e, s in zip(frame.epsilon, signs)],
        ),
        beta_tilde=RotationCoefficients(
            beta={(i, j): beta_tilde(i, j) for i, j in itertools.permutations(range(n), 2)},
            dimension=n,
        ),
        eps_hat=signs,
    )


def residual_suite(
    instance: SystemInstance,
    grid: Grid,
    tolerance: float = 1e-5,
    threads: typing.Optional[int] = None,
) -> ResidualReport:
    """All residual families; alt-form only where the pencil is nonsingular."""
    beta, frame, pencil = instance.beta, instance.frame, instance.pencil
    report = ResidualReport(title="lame-system", tolerance=tolerance, grid=grid.describe())
    report.merge(residual_lam1(beta, grid, tolerance, threads))
    report.merge(residual_lam2(beta, frame, pencil.K2, grid, tolerance, threads))
    report.merge(residual_lam3(beta, frame, pencil, grid, tolerance, threads))
    report.merge(residual_frame(beta, frame, grid, tolerance, threads))
    if instance.record_singularity(grid):
        report.merge(residual_alt_form(beta, frame, pencil, grid, tolerance, threads))
    else:
        report.note("pencil is singular on the grid; alt-form skipped, residuals not claimed equivalent")
    log.debug(f"residual suite passed={report.passed} max={report.max_norm:.3e}")
    return report


@dataclasses.dataclass
class Reconstruction:
    frame: LameFrame
    path_residual: float
    richardson_estimate: float
    axes: typing.List[np.ndarray]
    values: np.ndarray

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "path_residual": self.path_residual,
            "richardson_estimate": self.richardson_estimate,
        }


def _refined_axes(grid: Grid, substeps: int) -> typing.List[np.ndarray]:
    return [
        np.linspace(ax[0], ax[-1], (len(ax) - 1) * substeps + 1) for ax in grid.axes
    ]


def _march(
    bmat: np.ndarray,
    axes: typing.List[np.ndarray],
    line_data: typing.Sequence[typing.Callable[[complex], complex]],
    choose: typing.Callable[[typing.List[int]], int],
) -> np.ndarray:
    """Implicit trapezoid Goursat march of dH_j/du^i = beta_ij H_i.

    H_j is prescribed on the j-th coordinate line through the lower corner; every
    other node steps backward along one direction i != j picked by ``choose``.
    """
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    H = np.zeros(shape + (n,), dtype=complex)
    for idx in np.ndindex(*shape):
        A = np.eye(n, dtype=complex)
        rhs = np.zeros(n, dtype=complex)
        for j in range(n):
            active = [i for i in range(n) if i != j and idx[i] > 0]
            if not active:
                rhs[j] = line_data[j](complex(axes[j][idx[j]]))
                continue
            i = choose(active)
            prev = idx[:i] + (idx[i] - 1,) + idx[i + 1 :]
            h = axes[i][idx[i]] - axes[i][idx[i] - 1]
            rhs[j] = H[prev + (j,)] + 0.5 * h * bmat[prev + (i, j)] * H[prev + (i,)]
            A[j, i] -= 0.5 * h * bmat[idx + (i, j)]
        H[idx] = np.linalg.solve(A, rhs)
    return H


def _interpolated(
    axes: typing.List[np.ndarray], values: np.ndarray, j: int
) -> ScalarField:
    method = "cubic" if all(len(a) >= 4 for a in axes) else "linear"
    real = interpolate.RegularGridInterpolator(
        axes, values[..., j].real, method=method, bounds_error=False, fill_value=None
    )
    imag = interpolate.RegularGridInterpolator(
        axes, values[..., j].imag, method=method, bounds_error=False, fill_value=None
    )

    def h(u: Point) -> complex:
        x = np.array([[complex(v).real for v in u]])
        return complex(real(x)[0], imag(x)[0])

    return ScalarField(func=h, name=f"H{j + 1}")


def frame_from_rotation(
    beta: RotationCoefficients,
    grid: Grid,
    epsilon: typing.Optional[typing.Sequence[int]] = None,
    line_data: typing.Optional[typing.Sequence[typing.Callable[[complex], complex]]] = None,
    substeps: int = 4,
    threads: typing.Optional[int] = None,
) -> Reconstruction:
    """Lame coefficients from rotation coefficients by Goursat marching.

    Two refinements (substeps, 2*substeps) are Richardson extrapolated onto the
    coarser one; the frame is the cubic interpolant of the result. The path residual
    compares marching along the largest and smallest admissible directions.
    """
    n = beta.dimension
    if grid.dimension != n:
        raise DimensionMismatchError(n, grid.dimension, "grid")
    if any(m < 2 for m in grid.shape):
        raise InvalidConstantsError(list(grid.shape), "reconstruction needs two nodes per axis")
    if substeps < 1:
        raise InvalidConstantsError([substeps], "substeps must be positive")
    data = list(line_data) if line_data is not None else [lambda x: 1 + 0j] * n
    if len(data) != n:
        raise DimensionMismatchError(n, len(data), "line data")

    fine_axes = _refined_axes(grid, 2 * substeps)
    fine_shape = tuple(len(a) for a in fine_axes)
    fine_points = [
        [fine_axes[k][idx[k]] for k in range(n)] for idx in np.ndindex(*fine_shape)
    ]
    log.debug(f"reconstructing frame nodes={len(fine_points)} substeps={substeps}")
    bmat = np.array(parallel_map(beta.matrix, fine_points, threads)).reshape(
        fine_shape + (n, n)
    )
    coarse_slice = tuple(slice(None, None, 2) for _ in range(n))
    coarse_axes = [a[::2] for a in fine_axes]

    fine = _march(bmat, fine_axes, data, max)
    coarse = _march(bmat[coarse_slice], coarse_axes, data, max)
    values = (4 * fine[coarse_slice] - coarse) / 3
    estimate = float(np.max(np.abs(fine[coarse_slice] - coarse))) / 3
    if n > 2:
        fine_alt = _march(bmat, fine_axes, data, min)
        coarse_alt = _march(bmat[coarse_slice], coarse_axes, data, min)
        values_alt = (4 * fine_alt[coarse_slice] - coarse_alt) / 3
        path_residual = float(np.max(np.abs(values - values_alt)))
    else:
        path_residual = 0.0
    zeros = np.argwhere(values == 0)
    if len(zeros):
        *idx, j = (int(v) for v in zeros[0])
        raise ZeroLameCoefficientError(j, as_point([coarse_axes[k][idx[k]] for k in range(n)]))
    frame = LameFrame(
        H=[_interpolated(coarse_axes, values, j) for j in range(n)],
        epsilon=list(epsilon) if epsilon is not None else [1] * n,
    )
    return Reconstruction(
        frame=frame,
        path_residual=path_residual,
        richardson_estimate=estimate,
        axes=coarse_axes,
        values=values,
    )
