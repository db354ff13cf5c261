import dataclasses
import enum
import itertools
import math
import typing

import numpy as np

from . import get_settings, log, parallel_map
from .errors import DimensionMismatchError, SingularSpectralPointError, StepSizeError
from .fields import Point, as_point
from .lame import SystemInstance

SPECTRAL_OFFSET = 1e-6


class LaxKind(enum.Enum):
    darboux = "darboux"
    constant_curvature = "constant-curvature"
    flat_pencil = "flat-pencil"
    full_pencil = "full-pencil"

    @property
    def has_psi(self) -> bool:
        return self is not LaxKind.darboux


@dataclasses.dataclass
class LaxState:
    phi: np.ndarray
    psi: typing.Optional[complex] = None
    lam: complex = 0j

    def vector(self) -> np.ndarray:
        if self.psi is None:
            return np.asarray(self.phi, dtype=complex)
        return np.concatenate([np.asarray(self.phi, dtype=complex), [self.psi]])

    @classmethod
    def from_vector(cls, v: np.ndarray, kind: LaxKind, n: int, lam: complex) -> "LaxState":
        if kind.has_psi:
            return cls(phi=np.array(v[:n]), psi=complex(v[n]), lam=lam)
        return cls(phi=np.array(v[:n]), psi=None, lam=lam)


def _scales(
    kind: LaxKind, data: SystemInstance, u: Point, lam: complex
) -> typing.Tuple[np.ndarray, complex]:
    """Per-index factors D_i and the psi-coupling constant c for a kind."""
    n = data.dimension
    eps = np.array(data.frame.epsilon, dtype=complex)
    if kind is LaxKind.darboux:
        return np.ones(n, dtype=complex), 0j
    if kind is LaxKind.constant_curvature:
        return np.sqrt(eps), complex(np.sqrt(complex(data.pencil.K2)))
    f = np.array(data.pencil.values(u), dtype=complex)
    shifted = lam + f
    for i, v in enumerate(shifted):
        if abs(v) <= 1e-14 * max(1.0, abs(lam)):
            raise SingularSpectralPointError(lam, i, u)
    D = np.sqrt(eps * shifted)
    if kind is LaxKind.flat_pencil:
        return D, 0j
    return D, complex(np.sqrt(complex(data.pencil.at_lambda(lam))))


def connection_matrix(
    kind: typing.Union[LaxKind, str],
    data: SystemInstance,
    point: typing.Iterable[typing.Any],
    lam: complex = 0j,
) -> np.ndarray:
    """A[j] is the coefficient matrix of d/du^j acting on (phi, psi)."""
    kind = LaxKind(kind)
    u = as_point(point)
    n = data.dimension
    if len(u) != n:
        raise DimensionMismatchError(n, len(u))
    size = n + 1 if kind.has_psi else n
    D, c = _scales(kind, data, u, complex(lam))
    beta = data.beta.matrix(u)
    H = data.frame.values(u) if c != 0 else np.zeros(n, dtype=complex)
    A = np.zeros((n, size, size), dtype=complex)
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            A[j, i, j] = D[i] / D[j] * beta[i, j]
            A[j, j, i] = -D[i] / D[j] * beta[i, j]
        if kind.has_psi:
            A[j, j, n] = c * H[j] / D[j]
            A[j, n, j] = -c * H[j] / D[j]
    return A


def lax_rhs(
    kind: typing.Union[LaxKind, str],
    state: LaxState,
    direction: int,
    data: SystemInstance,
    point: typing.Iterable[typing.Any],
) -> LaxState:
    kind = LaxKind(kind)
    A = connection_matrix(kind, data, point, state.lam)[direction]
    v = state.vector()
    if len(v) != A.shape[0]:
        raise DimensionMismatchError(A.shape[0], len(v), "lax state")
    return LaxState.from_vector(A @ v, kind, data.dimension, state.lam)


def _transport_array(
    kind: LaxKind,
    y0: np.ndarray,
    path: typing.Sequence[Point],
    data: SystemInstance,
    lam: complex,
    step: float,
    max_steps: int,
) -> np.ndarray:
    y = np.array(y0, dtype=complex)
    for a, b in zip(path[:-1], path[1:]):
        p = np.array([complex(v).real for v in a])
        q = np.array([complex(v).real for v in b])
        delta = q - p
        length = float(np.linalg.norm(delta))
        if length == 0:
            continue
        if step <= 0 or length / step > max_steps:
            raise StepSizeError(step, length)
        steps = int(math.ceil(length / step))
        h = 1.0 / steps

        def rhs(tau: float, y: np.ndarray) -> np.ndarray:
            A = connection_matrix(kind, data, p + tau * delta, lam)
            return np.tensordot(delta, A, axes=1) @ y

        tau = 0.0
        for _ in range(steps):
            k1 = rhs(tau, y)
            k2 = rhs(tau + h / 2, y + h / 2 * k1)
            k3 = rhs(tau + h / 2, y + h / 2 * k2)
            k4 = rhs(tau + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tau += h
    return y


def transport(
    kind: typing.Union[LaxKind, str],
    state0: LaxState,
    path: typing.Sequence[typing.Iterable[typing.Any]],
    data: SystemInstance,
    step: float = 1e-2,
    max_steps: int = 1_000_000,
) -> LaxState:
    """Fixed-step RK4 integration of the linear problem along a polyline."""
    kind = LaxKind(kind)
    points = [as_point(p) for p in path]
    y = _transport_array(kind, state0.vector(), points, data, state0.lam, step, max_steps)
    return LaxState.from_vector(y, kind, data.dimension, state0.lam)


@dataclasses.dataclass
class Rectangle:
    corner: typing.List[float]
    i: int
    j: int
    h_i: float
    h_j: float

    def path(self) -> typing.List[Point]:
        c = np.array(self.corner, dtype=float)
        ei = np.eye(len(c))[self.i] * self.h_i
        ej = np.eye(len(c))[self.j] * self.h_j
        return [as_point(v) for v in (c, c + ei, c + ei + ej, c + ej, c)]

    def center(self) -> Point:
        c = np.array(self.corner, dtype=float)
        c[self.i] += self.h_i / 2
        c[self.j] += self.h_j / 2
        return as_point(c)

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return dataclasses.asdict(self)


def _round_trip(kind: LaxKind, data: SystemInstance, rect: Rectangle, lam: complex, steps: int) -> np.ndarray:
    size = data.dimension + (1 if kind.has_psi else 0)
    step = max(rect.h_i, rect.h_j) / steps
    return _transport_array(kind, np.eye(size, dtype=complex), rect.path(), data, lam, step, 10 * steps)


def monodromy_defect(
    kind: typing.Union[LaxKind, str],
    data: SystemInstance,
    rectangle: Rectangle,
    lam: complex = 0j,
    steps: int = 64,
) -> float:
    """||M - I|| of the round trip, Richardson extrapolated over (steps, 2*steps)."""
    kind = LaxKind(kind)
    coarse = _round_trip(kind, data, rectangle, complex(lam), steps)
    fine = _round_trip(kind, data, rectangle, complex(lam), 2 * steps)
    extrapolated = fine + (fine - coarse) / 15
    defect = float(np.linalg.norm(extrapolated - np.eye(len(fine))))
    log.debug(f"monodromy kind={kind.value} lam={lam!r} defect={defect:.3e}")
    return defect


def zero_curvature_residual(
    kind: typing.Union[LaxKind, str],
    data: SystemInstance,
    point: typing.Iterable[typing.Any],
    lam: complex = 0j,
    fd_step: typing.Optional[float] = None,
) -> float:
    """max over pairs of ||d_i A_j - d_j A_i - [A_i, A_j]||_F."""
    kind = LaxKind(kind)
    u = np.array([complex(v).real for v in as_point(point)])
    n = data.dimension
    step = fd_step if fd_step is not None else get_settings().fd_step
    A = connection_matrix(kind, data, u, lam)
    dA = []
    for k in range(n):
        h = step * max(1.0, abs(u[k]))
        e = np.eye(n)[k] * h
        dA.append(
            (connection_matrix(kind, data, u + e, lam) - connection_matrix(kind, data, u - e, lam))
            / (2 * h)
        )
    worst = 0.0
    for i, j in itertools.combinations(range(n), 2):
        Z = dA[i][j] - dA[j][i] - (A[i] @ A[j] - A[j] @ A[i])
        worst = max(worst, float(np.linalg.norm(Z)))
    return worst


def spectral_shift(data: SystemInstance, lam: complex, points: typing.Iterable[Point]) -> complex:
    """lam + i*delta when a real lam meets -f^i(u^i) on the sampled points."""
    lam = complex(lam)
    if lam.imag != 0:
        return lam
    values = np.array([data.pencil.values(p) for p in points]).real
    low, high = -values.max(axis=0), -values.min(axis=0)
    if np.any((low <= lam.real) & (lam.real <= high)):
        return lam + 1j * SPECTRAL_OFFSET
    return lam


@dataclasses.dataclass
class SweepRow:
    lam: complex
    shifted: bool
    defect: float
    zero_curvature: float

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "shifted": self.shifted,
            "defect": self.defect,
            "zero_curvature": self.zero_curvature,
        }


def lambda_sweep(
    kind: typing.Union[LaxKind, str],
    data: SystemInstance,
    lambdas: typing.Sequence[complex],
    rectangle: Rectangle,
    threads: typing.Optional[int] = None,
    steps: int = 64,
) -> typing.List[SweepRow]:
    kind = LaxKind(kind)
    samples = rectangle.path()[:-1] + [rectangle.center()]

    def row(lam: complex) -> SweepRow:
        used = spectral_shift(data, lam, samples) if kind in (LaxKind.flat_pencil, LaxKind.full_pencil) else complex(lam)
        return SweepRow(
            lam=used,
            shifted=used != complex(lam),
            defect=monodromy_defect(kind, data, rectangle, used, steps),
            zero_curvature=zero_curvature_residual(kind, data, rectangle.center(), used),
        )

    return parallel_map(row, list(lambdas), threads)
