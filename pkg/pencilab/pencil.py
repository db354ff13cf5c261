import dataclasses
import itertools
import typing

import numpy as np

from . import log
from .errors import DimensionMismatchError, EigenvalueCollisionError
from .fields import Grid, Point, UnivariateFunction, as_point


@dataclasses.dataclass
class PencilSpec:
    """Eigenvalue functions f^i(u^i) together with the curvatures K1 and K2."""

    f: typing.List[UnivariateFunction]
    K1: complex = 0j
    K2: complex = 0j

    @property
    def dimension(self) -> int:
        return len(self.f)

    def _check(self, u: Point) -> None:
        if len(u) != self.dimension:
            raise DimensionMismatchError(self.dimension, len(u), "pencil coordinates")

    def values(self, u: typing.Iterable[typing.Any]) -> typing.List[complex]:
        p = as_point(u)
        self._check(p)
        return [fi(p[i]) for i, fi in enumerate(self.f)]

    def derivatives(self, u: typing.Iterable[typing.Any]) -> typing.List[complex]:
        p = as_point(u)
        self._check(p)
        return [fi.d(p[i]) for i, fi in enumerate(self.f)]

    def collision(
        self, u: typing.Iterable[typing.Any], rtol: float = 1e-12
    ) -> typing.Optional[typing.Tuple[int, int]]:
        vals = self.values(u)
        scale = max(1.0, max(abs(v) for v in vals))
        for i, j in itertools.combinations(range(self.dimension), 2):
            if abs(vals[i] - vals[j]) <= rtol * scale:
                return (i, j)
        return None

    def check_nonsingular(self, grid: Grid) -> None:
        for p in grid.points():
            pair = self.collision(p)
            if pair is not None:
                raise EigenvalueCollisionError(pair[0], pair[1], p)

    def is_nonsingular(self, grid: Grid) -> bool:
        try:
            self.check_nonsingular(grid)
        except EigenvalueCollisionError as exc:
            log.debug(f"singular pencil err={exc}")
            return False
        return True

    def shifted(self, s: complex) -> "PencilSpec":
        """Pencil with f^i(u^i - s), the one the dressed family at parameter s solves."""
        s = complex(s)

        def shift(fi: UnivariateFunction) -> UnivariateFunction:
            return UnivariateFunction(
                func=lambda x: fi(x - s),
                deriv=lambda x: fi.d(x - s),
                deriv2=lambda x: fi.d2(x - s),
                name=fi.name if fi.is_constant else f"{fi.name}(.-{s.real:g})",
                known_constant=fi.is_constant,
            )

        return PencilSpec(f=[shift(fi) for fi in self.f], K1=self.K1, K2=self.K2)

    def at_lambda(self, lam: complex) -> complex:
        """Curvature lam*K2 + K1 of the pencil member g1 + lam*g2 after scaling."""
        return complex(lam) * self.K2 + self.K1

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "f": [fi.name for fi in self.f],
            "K1": [float(np.real(self.K1)), float(np.imag(self.K1))],
            "K2": [float(np.real(self.K2)), float(np.imag(self.K2))],
        }
