import dataclasses
import itertools
import typing

import numpy as np

from . import get_settings
from .errors import BranchError, DimensionMismatchError, NonFiniteError

Point = typing.Tuple[complex, ...]
Func = typing.Callable[[Point], complex]


def as_point(u: typing.Iterable[typing.Any]) -> Point:
    return tuple(complex(v) for v in u)


def _shift(u: Point, k: int, delta: float) -> Point:
    v = list(u)
    v[k] = v[k] + delta
    return tuple(v)


def principal_sqrt(z: complex, real: typing.Optional[bool] = None, what: str = "value") -> complex:
    """Principal square root; in real mode a non-positive radicand is an error."""
    real = get_settings().real_mode if real is None else real
    z = complex(z)
    if real:
        if abs(z.imag) > 1e-14 * max(1.0, abs(z.real)) or z.real <= 0.0:
            raise BranchError(what, z)
        return complex(np.sqrt(z.real))
    return complex(np.sqrt(z))


@dataclasses.dataclass
class ScalarField:
    """A complex scalar on a coordinate domain with optional analytic partials.

    Missing partials fall back to central differences with step
    ``fd_step * max(1, |u_k|)``.
    """

    func: Func
    partials: typing.Dict[int, Func] = dataclasses.field(default_factory=dict)
    second_partials: typing.Dict[typing.Tuple[int, int], Func] = dataclasses.field(
        default_factory=dict
    )
    fd_step: typing.Optional[float] = None
    name: str = "field"

    @property
    def step(self) -> float:
        return self.fd_step if self.fd_step is not None else get_settings().fd_step

    def _h(self, u: Point, k: int) -> float:
        return self.step * max(1.0, abs(u[k]))

    def __call__(self, u: typing.Iterable[typing.Any]) -> complex:
        p = as_point(u)
        value = complex(self.func(p))
        if not np.isfinite(value):
            raise NonFiniteError(self.name, p)
        return value

    def d(self, u: typing.Iterable[typing.Any], k: int) -> complex:
        p = as_point(u)
        if k in self.partials:
            return complex(self.partials[k](p))
        h = self._h(p, k)
        return (self.func(_shift(p, k, h)) - self.func(_shift(p, k, -h))) / (2 * h)

    def d2(self, u: typing.Iterable[typing.Any], j: int, k: int) -> complex:
        p = as_point(u)
        for key in ((j, k), (k, j)):
            if key in self.second_partials:
                return complex(self.second_partials[key](p))
        if k in self.partials:
            h = self._h(p, j)
            dk = self.partials[k]
            return (dk(_shift(p, j, h)) - dk(_shift(p, j, -h))) / (2 * h)
        if j in self.partials:
            h = self._h(p, k)
            dj = self.partials[j]
            return (dj(_shift(p, k, h)) - dj(_shift(p, k, -h))) / (2 * h)
        f = self.func
        if j == k:
            h = self._h(p, k) * 10.0
            return (f(_shift(p, k, h)) - 2 * f(p) + f(_shift(p, k, -h))) / (h * h)
        hj = self._h(p, j) * 10.0
        hk = self._h(p, k) * 10.0
        pp = _shift(_shift(p, j, hj), k, hk)
        pm = _shift(_shift(p, j, hj), k, -hk)
        mp = _shift(_shift(p, j, -hj), k, hk)
        mm = _shift(_shift(p, j, -hj), k, -hk)
        return (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * hj * hk)

    def derivative_field(self, k: int) -> "ScalarField":
        return ScalarField(
            func=lambda u: self.d(u, k), fd_step=self.fd_step, name=f"d{k + 1}({self.name})"
        )

    @classmethod
    def constant(cls, value: complex, name: str = "const") -> "ScalarField":
        c = complex(value)
        return cls(func=lambda u: c, name=name)


@dataclasses.dataclass
class UnivariateFunction:
    """f(x) with first and second derivatives, used for eigenvalue functions."""

    func: typing.Callable[[complex], complex]
    deriv: typing.Optional[typing.Callable[[complex], complex]] = None
    deriv2: typing.Optional[typing.Callable[[complex], complex]] = None
    name: str = "f"
    fd_step: typing.Optional[float] = None
    known_constant: bool = False

    def _h(self, x: complex) -> float:
        step = self.fd_step if self.fd_step is not None else get_settings().fd_step
        return step * max(1.0, abs(x))

    def __call__(self, x: complex) -> complex:
        return complex(self.func(complex(x)))

    def d(self, x: complex) -> complex:
        x = complex(x)
        if self.deriv is not None:
            return complex(self.deriv(x))
        h = self._h(x)
        return (self.func(x + h) - self.func(x - h)) / (2 * h)

    def d2(self, x: complex) -> complex:
        x = complex(x)
        if self.deriv2 is not None:
            return complex(self.deriv2(x))
        if self.deriv is not None:
            h = self._h(x)
            return (self.deriv(x + h) - self.deriv(x - h)) / (2 * h)
        h = self._h(x) * 10.0
        return (self.func(x + h) - 2 * self.func(x) + self.func(x - h)) / (h * h)

    @property
    def is_constant(self) -> bool:
        return self.known_constant

    @classmethod
    def constant(cls, c: complex) -> "UnivariateFunction":
        c = complex(c)
        return cls(
            lambda x: c, lambda x: 0j, lambda x: 0j, name=f"const({c.real:g})", known_constant=True
        )

    @classmethod
    def identity(cls) -> "UnivariateFunction":
        return cls(lambda x: x, lambda x: 1 + 0j, lambda x: 0j, name="u")

    @classmethod
    def linear(cls, a: complex, b: complex) -> "UnivariateFunction":
        a, b = complex(a), complex(b)
        if a == 0:
            return cls.constant(b)
        return cls(lambda x: a * x + b, lambda x: a, lambda x: 0j, name=f"linear({a.real:g},{b.real:g})")


@dataclasses.dataclass
class Grid:
    """Tensor grid of sample points over a box."""

    axes: typing.List[np.ndarray]

    @classmethod
    def box(
        cls,
        lower: typing.Sequence[float],
        upper: typing.Sequence[float],
        resolution: typing.Union[int, typing.Sequence[int]] = 5,
    ) -> "Grid":
        if len(lower) != len(upper):
            raise DimensionMismatchError(len(lower), len(upper), "grid box")
        if isinstance(resolution, int):
            resolution = [resolution] * len(lower)
        if len(resolution) != len(lower):
            raise DimensionMismatchError(len(lower), len(resolution), "grid resolution")
        return cls(
            axes=[np.linspace(lo, hi, int(n)) for lo, hi, n in zip(lower, upper, resolution)]
        )

    @classmethod
    def around(cls, center: typing.Sequence[float], half_width: float, resolution: int = 5) -> "Grid":
        return cls.box(
            [c - half_width for c in center], [c + half_width for c in center], resolution
        )

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> typing.Tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def lower(self) -> typing.List[float]:
        return [float(a[0]) for a in self.axes]

    @property
    def upper(self) -> typing.List[float]:
        return [float(a[-1]) for a in self.axes]

    def points(self) -> typing.Iterator[Point]:
        for combo in itertools.product(*self.axes):
            yield as_point(combo)

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    def describe(self) -> str:
        box = " x ".join(f"[{lo:g},{hi:g}]" for lo, hi in zip(self.lower, self.upper))
        return f"{box} @ {'x'.join(str(n) for n in self.shape)}"

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {"box": [self.lower, self.upper], "resolution": list(self.shape)}
