import dataclasses
import enum
import functools
import math
import typing

import numpy as np

from .errors import InvalidConstantsError, QuadratureError, SingularPairError
from .fields import UnivariateFunction, principal_sqrt
from .report import ResidualReport

Func2 = typing.Callable[[complex, complex], complex]


class ReductionType(enum.Enum):
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"


class Branch(enum.Enum):
    regular = "regular"
    modified = "modified"


@dataclasses.dataclass
class Bivariate:
    """F(a, b) with optional analytic partials; missing ones use central differences."""

    func: Func2
    d1: typing.Optional[Func2] = None
    d2: typing.Optional[Func2] = None
    d11: typing.Optional[Func2] = None
    d22: typing.Optional[Func2] = None
    d12: typing.Optional[Func2] = None
    name: str = "F"
    fd_step: float = 1e-3

    def __call__(self, a: complex, b: complex) -> complex:
        return complex(self.func(complex(a), complex(b)))

    def _first(self, k: int, a: complex, b: complex) -> complex:
        h = self.fd_step
        f = self.func
        if k == 0:
            return (f(a + h, b) - f(a - h, b)) / (2 * h)
        return (f(a, b + h) - f(a, b - h)) / (2 * h)

    def p1(self, a: complex, b: complex) -> complex:
        return complex(self.d1(a, b)) if self.d1 else self._first(0, a, b)

    def p2(self, a: complex, b: complex) -> complex:
        return complex(self.d2(a, b)) if self.d2 else self._first(1, a, b)

    def p11(self, a: complex, b: complex) -> complex:
        if self.d11:
            return complex(self.d11(a, b))
        h, f = self.fd_step, self.func
        return (f(a + h, b) - 2 * f(a, b) + f(a - h, b)) / (h * h)

    def p22(self, a: complex, b: complex) -> complex:
        if self.d22:
            return complex(self.d22(a, b))
        h, f = self.fd_step, self.func
        return (f(a, b + h) - 2 * f(a, b) + f(a, b - h)) / (h * h)

    def p12(self, a: complex, b: complex) -> complex:
        if self.d12:
            return complex(self.d12(a, b))
        h, f = self.fd_step, self.func
        return (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (
            4 * h * h
        )


def _monotone_kind(f: UnivariateFunction, interval: typing.Tuple[float, float]) -> str:
    if f.is_constant:
        return "constant"
    xs = np.linspace(interval[0], interval[1], 17)
    d = np.array([f.d(x) for x in xs])
    scale = max(1.0, float(np.max(np.abs([f(x) for x in xs]))))
    if np.all(np.abs(d) <= 1e-12 * scale):
        return "constant"
    if np.all(d.real > 0) or np.all(d.real < 0):
        return "monotone"
    raise InvalidConstantsError(
        [f(interval[0]), f(interval[1])],
        f"{f.name} is neither constant nor strictly monotone on {interval!r}",
    )


def classify_pair(
    f_i: UnivariateFunction,
    f_j: UnivariateFunction,
    interval: typing.Tuple[float, float] = (1.0, 2.0),
) -> ReductionType:
    kinds = (_monotone_kind(f_i, interval), _monotone_kind(f_j, interval))
    if kinds == ("monotone", "monotone"):
        return ReductionType.F1
    if "monotone" in kinds:
        return ReductionType.F2
    x = interval[0]
    if abs(f_i(x) - f_j(x)) <= 1e-12 * max(1.0, abs(f_i(x))):
        raise SingularPairError()
    return ReductionType.F3


def general_solution_f2(
    g: UnivariateFunction, h: UnivariateFunction, real: typing.Optional[bool] = None
) -> Bivariate:
    """F(u1, u2) = g(u1)/sqrt(u2) + h(u2)."""

    def root(u2: complex) -> complex:
        return principal_sqrt(u2, real=real, what="u2")

    return Bivariate(
        func=lambda a, b: g(a) / root(b) + h(b),
        d1=lambda a, b: g.d(a) / root(b),
        d2=lambda a, b: -0.5 * g(a) / root(b) ** 3 + h.d(b),
        d11=lambda a, b: g.d2(a) / root(b),
        d22=lambda a, b: 0.75 * g(a) / root(b) ** 5 + h.d2(b),
        d12=lambda a, b: -0.5 * g.d(a) / root(b) ** 3,
        name="f2-general",
    )


def general_solution_f3(g: UnivariateFunction, h: UnivariateFunction) -> Bivariate:
    """F(u1, u2) = g(u1) + h(u2)."""
    return Bivariate(
        func=lambda a, b: g(a) + h(b),
        d1=lambda a, b: g.d(a),
        d2=lambda a, b: h.d(b),
        d11=lambda a, b: g.d2(a),
        d22=lambda a, b: h.d2(b),
        d12=lambda a, b: 0j,
        name="f3-general",
    )


def change_variables_f1_to_f4(F: Bivariate) -> Bivariate:
    """G(t, r) = F(t + r, t - r)."""
    return Bivariate(
        func=lambda t, r: F(t + r, t - r),
        d1=lambda t, r: F.p1(t + r, t - r) + F.p2(t + r, t - r),
        d2=lambda t, r: F.p1(t + r, t - r) - F.p2(t + r, t - r),
        d11=lambda t, r: F.p11(t + r, t - r) + 2 * F.p12(t + r, t - r) + F.p22(t + r, t - r),
        d22=lambda t, r: F.p11(t + r, t - r) - 2 * F.p12(t + r, t - r) + F.p22(t + r, t - r),
        d12=lambda t, r: F.p11(t + r, t - r) - F.p22(t + r, t - r),
        name=f"{F.name}(t,r)",
    )


def change_variables_f4_to_f1(G: Bivariate) -> Bivariate:
    """F(u1, u2) = G((u1 + u2)/2, (u1 - u2)/2)."""

    def tr(a: complex, b: complex) -> typing.Tuple[complex, complex]:
        return (a + b) / 2, (a - b) / 2

    return Bivariate(
        func=lambda a, b: G(*tr(a, b)),
        d1=lambda a, b: (G.p1(*tr(a, b)) + G.p2(*tr(a, b))) / 2,
        d2=lambda a, b: (G.p1(*tr(a, b)) - G.p2(*tr(a, b))) / 2,
        d11=lambda a, b: (G.p11(*tr(a, b)) + 2 * G.p12(*tr(a, b)) + G.p22(*tr(a, b))) / 4,
        d22=lambda a, b: (G.p11(*tr(a, b)) - 2 * G.p12(*tr(a, b)) + G.p22(*tr(a, b))) / 4,
        d12=lambda a, b: (G.p11(*tr(a, b)) - G.p22(*tr(a, b))) / 4,
        name=f"{G.name}(u1,u2)",
    )


def _residual(
    title: str,
    F: Bivariate,
    samples: typing.Iterable[typing.Tuple[float, float]],
    equation: typing.Callable[[Bivariate, complex, complex], complex],
    tolerance: float,
) -> ResidualReport:
    points = list(samples)
    report = ResidualReport(title=title, tolerance=tolerance, grid=f"{len(points)} samples")
    report.equation(title)
    for a, b in points:
        report.add(title, equation(F, complex(a), complex(b)), (a, b))
    return report


def residual_f1(F: Bivariate, samples: typing.Iterable[typing.Tuple[float, float]], tolerance: float = 1e-8) -> ResidualReport:
    """2(u1 - u2) F_12 - F_1 + F_2, regular on the diagonal."""
    return _residual(
        "f1", F, samples, lambda F, a, b: 2 * (a - b) * F.p12(a, b) - F.p1(a, b) + F.p2(a, b), tolerance
    )


def residual_f2(F: Bivariate, samples: typing.Iterable[typing.Tuple[float, float]], tolerance: float = 1e-8) -> ResidualReport:
    return _residual("f2", F, samples, lambda F, a, b: F.p12(a, b) + F.p1(a, b) / (2 * b), tolerance)


def residual_f3(F: Bivariate, samples: typing.Iterable[typing.Tuple[float, float]], tolerance: float = 1e-8) -> ResidualReport:
    return _residual("f3", F, samples, lambda F, a, b: F.p12(a, b), tolerance)


def residual_darboux(
    F: Bivariate, samples: typing.Iterable[typing.Tuple[float, float]], tolerance: float = 1e-8
) -> ResidualReport:
    """F_tt - F_rr - F_r/r; samples must avoid the axis r = 0."""
    return _residual(
        "darboux", F, samples, lambda F, t, r: F.p11(t, r) - F.p22(t, r) - F.p2(t, r) / r, tolerance
    )


@functools.lru_cache(maxsize=16)
def chebyshev_nodes(n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    return np.cos((2 * k - 1) * np.pi / (2 * n))


def _mean(values: typing.Sequence[complex]) -> complex:
    return complex(np.mean(np.asarray(values, dtype=complex)))


def darboux_mean_value(
    psi: UnivariateFunction, t: complex, r: complex, nodes: int = 64, tol: float = 1e-10
) -> complex:
    """(1/pi) int_{-1}^{1} psi(t + x r)/sqrt(1 - x^2) dx by Gauss-Chebyshev.

    The node-doubling difference must stay below tol.
    """
    coarse = _mean([psi(t + x * r) for x in chebyshev_nodes(nodes)])
    fine = _mean([psi(t + x * r) for x in chebyshev_nodes(2 * nodes)])
    scale = max(1.0, abs(fine))
    if abs(fine - coarse) > tol * scale:
        raise QuadratureError(abs(fine - coarse) / scale, tol)
    return fine


@dataclasses.dataclass
class DarbouxSolution:
    field: Bivariate
    family: str
    parameters: typing.Dict[str, typing.Any]

    def __call__(self, t: complex, r: complex) -> complex:
        return self.field(t, r)

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {"family": self.family, "parameters": self.parameters}


def mean_value_solution(psi: UnivariateFunction, nodes: int = 64) -> DarbouxSolution:
    """The mean-value family with partials from psi' and psi''."""
    xs = chebyshev_nodes(nodes)

    def avg(func: typing.Callable[[complex], complex], weight: int) -> Func2:
        return lambda t, r: _mean([x ** weight * func(t + x * r) for x in xs])

    field = Bivariate(
        func=avg(psi, 0),
        d1=avg(psi.d, 0),
        d2=avg(psi.d, 1),
        d11=avg(psi.d2, 0),
        d22=avg(psi.d2, 2),
        d12=avg(psi.d2, 1),
        name=f"mean-value({psi.name})",
    )
    return DarbouxSolution(field=field, family="mean-value", parameters={"psi": psi.name, "nodes": nodes})


def darboux_initial_conditions(
    solution: DarbouxSolution, psi: UnivariateFunction, ts: typing.Iterable[float], tolerance: float = 1e-10
) -> ResidualReport:
    """F(t, 0) = psi(t) and F_r(t, 0) = 0."""
    points = list(ts)
    report = ResidualReport(title="initial-conditions", tolerance=tolerance, grid=f"{len(points)} samples")
    for t in points:
        report.add("F(t,0)-psi(t)", solution(t, 0) - psi(t), (t, 0.0))
        report.add("F_r(t,0)", solution.field.p2(t, 0), (t, 0.0))
    return report


class RadialProfile:
    """Regular solution of r R'' + R' - a r R = 0 with R(0) = 1.

    Series up to r = 0.5, RK4 continuation with step at most 1e-3 beyond.
    """

    series_radius = 0.5
    max_step = 1e-3

    def __init__(self, a: complex) -> None:
        self.a = complex(a)

    def _series(self, r: float) -> typing.Tuple[complex, complex]:
        z = self.a * r * r / 4
        value, deriv = 0j, 0j
        term = 1 + 0j
        m = 0
        while True:
            value += term
            if m > 0:
                deriv += 2 * m * term / r if r else 0j
            m += 1
            term = term * z / (m * m)
            if abs(term) < 1e-18 * max(1.0, abs(value)) and m > 3:
                break
            if m > 200:
                break
        return value, deriv

    def _rhs(self, r: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], self.a * y[0] - y[1] / r], dtype=complex)

    @functools.lru_cache(maxsize=4096)
    def values(self, r: float) -> typing.Tuple[complex, complex, complex]:
        """R, R', R''."""
        r = abs(float(r))
        if r <= self.series_radius:
            value, deriv = self._series(r)
        else:
            r0 = self.series_radius
            y = np.array(self._series(r0), dtype=complex)
            steps = int(math.ceil((r - r0) / self.max_step))
            h = (r - r0) / steps
            x = r0
            for _ in range(steps):
                k1 = self._rhs(x, y)
                k2 = self._rhs(x + h / 2, y + h / 2 * k1)
                k3 = self._rhs(x + h / 2, y + h / 2 * k2)
                k4 = self._rhs(x + h, y + h * k3)
                y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                x += h
            value, deriv = complex(y[0]), complex(y[1])
        second = self.a / 2 if r == 0 else self.a * value - deriv / r
        return value, deriv, second

    def second_difference(self, r: float, h: float = 1e-3) -> complex:
        """R'' by a five-point difference of R', independent of the radial equation."""

        def deriv(x: float) -> complex:
            return math.copysign(1.0, x) * self.values(abs(x))[1]

        return (-deriv(r + 2 * h) + 8 * deriv(r + h) - 8 * deriv(r - h) + deriv(r - 2 * h)) / (12 * h)



def darboux_separated(
    a: complex,
    branch: typing.Union[Branch, str],
    c1: complex = 1.0,
    c2: complex = 0.0,
) -> DarbouxSolution:
    """S(t) R(r) with S'' = a S and the regular radial profile.

    The regular branch needs a < 0 and the modified branch a > 0; a = 0 gives S linear
    and R = 1 on either branch.
    """
    branch = Branch(branch)
    a = complex(a)
    if a != 0:
        if branch is Branch.regular and not a.real < 0:
            raise InvalidConstantsError([a], "regular branch needs a < 0")
        if branch is Branch.modified and not a.real > 0:
            raise InvalidConstantsError([a], "modified branch needs a > 0")
    k = complex(np.sqrt(a))
    c1, c2 = complex(c1), complex(c2)

    if a == 0:
        S = UnivariateFunction(lambda t: c1 + c2 * t, lambda t: c2, lambda t: 0j, name="linear")
    else:
        S = UnivariateFunction(
            lambda t: c1 * np.cosh(k * t) + c2 * np.sinh(k * t),
            lambda t: k * (c1 * np.sinh(k * t) + c2 * np.cosh(k * t)),
            lambda t: a * (c1 * np.cosh(k * t) + c2 * np.sinh(k * t)),
            name="cosh" if branch is Branch.modified else "cos",
        )
    R = RadialProfile(a)
    field = Bivariate(
        func=lambda t, r: S(t) * R.values(complex(r).real)[0],
        d1=lambda t, r: S.d(t) * R.values(complex(r).real)[0],
        d2=lambda t, r: S(t) * R.values(complex(r).real)[1],
        d11=lambda t, r: S.d2(t) * R.values(complex(r).real)[0],
        d22=lambda t, r: S(t) * R.second_difference(complex(r).real),
        d12=lambda t, r: S.d(t) * R.values(complex(r).real)[1],
        name=f"separated({a.real:g})",
    )
    return DarbouxSolution(
        field=field,
        family="separated",
        parameters={"a": [a.real, a.imag], "branch": branch.value, "c1": [c1.real, c1.imag], "c2": [c2.real, c2.imag]},
    )


def separated_ode_residuals(
    a: complex, rs: typing.Iterable[float], tolerance: float = 1e-8
) -> ResidualReport:
    """r R'' + R' - a r R from the profile, with R'' taken by differencing R'."""
    profile = RadialProfile(a)
    points = list(rs)
    report = ResidualReport(title="radial-ode", tolerance=tolerance, grid=f"{len(points)} samples")
    h = 1e-4
    for r in points:
        value, deriv, _ = profile.values(r)
        second = (profile.values(r + h)[1] - profile.values(r - h)[1]) / (2 * h)
        report.add("radial", r * second + deriv - a * r * value, (r,))
    return report
