"""Named function families referenced from scenario files.

A reference is either a bare family name or a mapping with a ``family`` key and
keyword parameters, e.g. ``{"family": "linear", "a": 2.0, "b": 1.0}``.
"""
import typing

import numpy as np

from . import log
from .dressing import Potential
from .errors import DimensionMismatchError, ScenarioError
from .fields import Point, ScalarField, UnivariateFunction
from .metric import LameFrame
from .special import chebyshev_nodes

Reference = typing.Union[str, typing.Mapping[str, typing.Any]]
Builder = typing.Callable[..., typing.Any]


def _exp(a: complex = 1.0, rate: complex = 1.0) -> UnivariateFunction:
    a, k = complex(a), complex(rate)
    return UnivariateFunction(
        lambda x: a * np.exp(k * x),
        lambda x: a * k * np.exp(k * x),
        lambda x: a * k * k * np.exp(k * x),
        name=f"exp({a.real:g},{k.real:g})",
        known_constant=a == 0 or k == 0,
    )


def _monomial(n: int = 2, a: complex = 1.0) -> UnivariateFunction:
    a, n = complex(a), int(n)
    if n < 0:
        raise ValueError(f"monomial degree must be non-negative, got {n}")
    return UnivariateFunction(
        lambda x: a * x ** n,
        lambda x: a * n * x ** (n - 1) if n >= 1 else 0j,
        lambda x: a * n * (n - 1) * x ** (n - 2) if n >= 2 else 0j,
        name=f"monomial({n})",
        known_constant=n == 0 or a == 0,
    )


def _sin(a: complex = 1.0, k: complex = 1.0) -> UnivariateFunction:
    a, k = complex(a), complex(k)
    return UnivariateFunction(
        lambda x: a * np.sin(k * x),
        lambda x: a * k * np.cos(k * x),
        lambda x: -a * k * k * np.sin(k * x),
        name=f"sin({k.real:g})",
        known_constant=a == 0 or k == 0,
    )


def _cos(a: complex = 1.0, k: complex = 1.0) -> UnivariateFunction:
    a, k = complex(a), complex(k)
    return UnivariateFunction(
        lambda x: a * np.cos(k * x),
        lambda x: -a * k * np.sin(k * x),
        lambda x: -a * k * k * np.cos(k * x),
        name=f"cos({k.real:g})",
        known_constant=a == 0 or k == 0,
    )


UNIVARIATE: typing.Dict[str, Builder] = {
    "constant": lambda c=1.0: UnivariateFunction.constant(c),
    "identity": UnivariateFunction.identity,
    "linear": lambda a=1.0, b=0.0: UnivariateFunction.linear(a, b),
    "exp": _exp,
    "monomial": _monomial,
    "sin": _sin,
    "cos": _cos,
}


def _fixed(name: str, expected: int, dimension: typing.Optional[int]) -> None:
    if dimension is not None and dimension != expected:
        raise DimensionMismatchError(expected, dimension, f"{name} frame")


def _signs(epsilon: typing.Optional[typing.Sequence[int]], n: int) -> typing.List[int]:
    return [int(e) for e in epsilon] if epsilon else [1] * n


def euclidean_frame(
    dimension: int = 2, epsilon: typing.Optional[typing.Sequence[int]] = None
) -> LameFrame:
    """H_i = 1 in Cartesian coordinates."""
    return LameFrame(
        H=[ScalarField.constant(1.0, name=f"H{i + 1}") for i in range(dimension)],
        epsilon=_signs(epsilon, dimension),
    )


def sphere_frame(dimension: typing.Optional[int] = None, R: float = 1.0) -> LameFrame:
    """H_1 = R, H_2 = R sin u^1 on the round 2-sphere of radius R."""
    _fixed("sphere", 2, dimension)
    R = float(R)
    h2 = ScalarField(
        func=lambda u: R * np.sin(u[0]),
        partials={0: lambda u: R * np.cos(u[0]), 1: lambda u: 0j},
        second_partials={
            (0, 0): lambda u: -R * np.sin(u[0]),
            (0, 1): lambda u: 0j,
            (1, 1): lambda u: 0j,
        },
        name="H2",
    )
    return LameFrame(H=[ScalarField.constant(R, name="H1"), h2], epsilon=[1, 1])


def spherical3_frame(dimension: typing.Optional[int] = None) -> LameFrame:
    """Spherical coordinates (r, theta, phi) in flat R^3."""
    _fixed("spherical3", 3, dimension)
    zero: typing.Callable[[Point], complex] = lambda u: 0j
    h2 = ScalarField(
        func=lambda u: u[0],
        partials={0: lambda u: 1 + 0j, 1: zero, 2: zero},
        second_partials={(j, k): zero for j in range(3) for k in range(j, 3)},
        name="H2",
    )
    h3 = ScalarField(
        func=lambda u: u[0] * np.sin(u[1]),
        partials={0: lambda u: np.sin(u[1]), 1: lambda u: u[0] * np.cos(u[1]), 2: zero},
        second_partials={
            (0, 0): zero,
            (0, 1): lambda u: np.cos(u[1]),
            (0, 2): zero,
            (1, 1): lambda u: -u[0] * np.sin(u[1]),
            (1, 2): zero,
            (2, 2): zero,
        },
        name="H3",
    )
    return LameFrame(H=[ScalarField.constant(1.0, name="H1"), h2, h3], epsilon=[1, 1, 1])


def example_constant_frame(
    dimension: typing.Optional[int] = None, a: float = 1.0, b: float = 1.0
) -> LameFrame:
    """H_1 = H_2 = exp(a u^1 + b u^2), so beta_12 = a and beta_21 = b are constant.

    Flat (K = 0) solution of the constant-eigenvalue system for any distinct constants.
    """
    _fixed("example-constant", 2, dimension)
    a, b = complex(a), complex(b)

    def e(u: Point) -> complex:
        return complex(np.exp(a * u[0] + b * u[1]))

    def h(name: str) -> ScalarField:
        return ScalarField(
            func=e,
            partials={0: lambda u: a * e(u), 1: lambda u: b * e(u)},
            second_partials={
                (0, 0): lambda u: a * a * e(u),
                (0, 1): lambda u: a * b * e(u),
                (1, 1): lambda u: b * b * e(u),
            },
            name=name,
        )

    return LameFrame(H=[h("H1"), h("H2")], epsilon=[1, 1])


FRAMES: typing.Dict[str, Builder] = {
    "euclidean": euclidean_frame,
    "sphere": sphere_frame,
    "spherical3": spherical3_frame,
    "example-constant": example_constant_frame,
}


def gaussian_potential(a: complex = 1e-2, width: float = 1.0) -> Potential:
    a, w2 = complex(a), float(width) ** 2

    def g(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return a * np.exp(-(x * x + y * y) / w2)

    return Potential(
        func=g,
        dx=lambda x, y: -2 * x / w2 * g(x, y),
        dy=lambda x, y: -2 * y / w2 * g(x, y),
        dxy=lambda x, y: 4 * x * y / (w2 * w2) * g(x, y),
        name="gaussian",
    )


def skew_gaussian_potential(a: complex = 1e-2, width: float = 1.0) -> Potential:
    """(x - y) exp(-(x^2 + y^2)/w^2); skew, so usable on the diagonal."""
    a, w2 = complex(a), float(width) ** 2

    def g(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return a * np.exp(-(x * x + y * y) / w2)

    return Potential(
        func=lambda x, y: (x - y) * g(x, y),
        dx=lambda x, y: (1 - 2 * x * (x - y) / w2) * g(x, y),
        dy=lambda x, y: (-1 - 2 * y * (x - y) / w2) * g(x, y),
        dxy=lambda x, y: 2 * (x - y) / w2 * (1 + 2 * x * y / w2) * g(x, y),
        name="skew-gaussian",
    )


def exponential_potential(a: complex = 1e-2, rate: float = 1.0) -> Potential:
    a, k = complex(a), float(rate)

    def g(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return a * np.exp(-k * (x + y))

    return Potential(
        func=g,
        dx=lambda x, y: -k * g(x, y),
        dy=lambda x, y: -k * g(x, y),
        dxy=lambda x, y: k * k * g(x, y),
        name="exponential",
    )


def f3_exponential_potential(a: complex = 1e-2, b: complex = 1e-2, rate: float = 1.0) -> Potential:
    """a e^{-kx} + b e^{-ky}: solves the reduction for two distinct constant eigenvalues."""
    a, b, k = complex(a), complex(b), float(rate)
    return Potential(
        func=lambda x, y: a * np.exp(-k * x) + b * np.exp(-k * y),
        dx=lambda x, y: -k * a * np.exp(-k * x) + 0 * y,
        dy=lambda x, y: -k * b * np.exp(-k * y) + 0 * x,
        dxy=lambda x, y: 0 * x * y,
        name="f3-exponential",
    )


def f2_closed_potential(
    a: complex = 1e-4,
    b: complex = 1e-4,
    rate: float = 1.0,
    c: float = 1.0,
    monotone: str = "first",
) -> Potential:
    """b e^{-ky}/sqrt(x + c) + a e^{-kx} for f^i = u, f^j = c.

    With ``monotone="second"`` the roles of x and y swap (f^i = c, f^j = u). The
    first-argument tail is algebraic, so amplitudes stay small.
    """
    a, b, k, c = complex(a), complex(b), float(rate), complex(c)
    if monotone not in ("first", "second"):
        raise ValueError(f"monotone must be 'first' or 'second', got {monotone!r}")

    def parts(
        w: np.ndarray, z: np.ndarray
    ) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        root = np.sqrt(w + c)
        e = b * np.exp(-k * z)
        value = e / root + a * np.exp(-k * w)
        dw = -e / (2 * root ** 3) - k * a * np.exp(-k * w)
        dz = -k * e / root
        dwz = k * e / (2 * root ** 3)
        return value, dw, dz, dwz, root

    if monotone == "first":
        return Potential(
            func=lambda x, y: parts(x, y)[0],
            dx=lambda x, y: parts(x, y)[1],
            dy=lambda x, y: parts(x, y)[2],
            dxy=lambda x, y: parts(x, y)[3],
            name="f2-closed",
        )
    return Potential(
        func=lambda x, y: parts(y, x)[0],
        dx=lambda x, y: parts(y, x)[2],
        dy=lambda x, y: parts(y, x)[1],
        dxy=lambda x, y: parts(y, x)[3],
        name="f2-closed",
    )


def f1_mean_value_potential(
    psi: typing.Optional[Reference] = None,
    amplitude: complex = 1e-4,
    rate: complex = 1.0,
    nodes: int = 64,
) -> Potential:
    """Potential from the mean-value Darboux solution for f^i = u, f^j = u.

    Phi(x, y) = G(t, r) with t = -(x + y)/2, r = (y - x)/2 and G the Chebyshev mean of
    psi(t + xi r); psi defaults to amplitude * exp(rate * t).
    """
    f = univariate(psi, "psi") if psi is not None else _exp(amplitude, rate)
    xs = chebyshev_nodes(int(nodes))

    def moment(
        func: typing.Callable[[typing.Any], typing.Any], weight: int
    ) -> typing.Callable[[np.ndarray, np.ndarray], np.ndarray]:
        def value(x: np.ndarray, y: np.ndarray) -> np.ndarray:
            t = np.asarray(-(x + y) / 2)
            r = np.asarray((y - x) / 2)
            arg = t[..., None] + xs * r[..., None]
            return np.mean(xs ** weight * np.broadcast_to(func(arg), arg.shape), axis=-1)

        return value

    d1 = f.deriv if f.deriv is not None else np.vectorize(f.d, otypes=[complex])
    d2 = f.deriv2 if f.deriv2 is not None else np.vectorize(f.d2, otypes=[complex])
    g_t, g_r = moment(d1, 0), moment(d1, 1)
    g_tt, g_rr = moment(d2, 0), moment(d2, 2)
    return Potential(
        func=moment(f.func, 0),
        dx=lambda x, y: -(g_t(x, y) + g_r(x, y)) / 2,
        dy=lambda x, y: -(g_t(x, y) - g_r(x, y)) / 2,
        dxy=lambda x, y: (g_tt(x, y) - g_rr(x, y)) / 4,
        name=f"f1-mean-value({f.name})",
    )


POTENTIALS: typing.Dict[str, Builder] = {
    "gaussian": gaussian_potential,
    "skew-gaussian": skew_gaussian_potential,
    "exponential": exponential_potential,
    "f3-exponential": f3_exponential_potential,
    "f2-closed": f2_closed_potential,
    "f1-mean-value": f1_mean_value_potential,
}


def _lookup(
    registry: typing.Mapping[str, Builder],
    kind: str,
    ref: Reference,
    field: str,
    **extra: typing.Any,
) -> typing.Any:
    if isinstance(ref, str):
        name, params = ref, {}
    elif isinstance(ref, typing.Mapping) and "family" in ref:
        params = dict(ref)
        name = params.pop("family")
    else:
        raise ScenarioError(f"{kind} must be a family name or a mapping with 'family'", field=field)
    builder = registry.get(name)
    if builder is None:
        raise ScenarioError(
            f"unknown {kind} family {name!r}, expected one of {sorted(registry)}", field=field
        )
    params.update(extra)
    try:
        built = builder(**params)
    except ScenarioError as exc:
        exc.field = f"{field}.{exc.field}" if exc.field else field
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad parameters for {kind} family {name!r}: {exc}", field=field) from exc
    log.debug(f"built {kind} family={name} params={params!r}")
    return built


def univariate(ref: Reference, field: str = "") -> UnivariateFunction:
    return typing.cast(UnivariateFunction, _lookup(UNIVARIATE, "function", ref, field))


def frame(ref: Reference, dimension: int, field: str = "") -> LameFrame:
    return typing.cast(LameFrame, _lookup(FRAMES, "frame", ref, field, dimension=dimension))


def potential(ref: Reference, field: str = "") -> Potential:
    return typing.cast(Potential, _lookup(POTENTIALS, "potential", ref, field))
