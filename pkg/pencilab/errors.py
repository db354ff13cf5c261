import typing

Point = typing.Sequence[typing.Any]


def _fmt_point(point: typing.Optional[Point]) -> str:
    if point is None:
        return "?"
    return "(" + ", ".join(f"{complex(v).real:.6g}" for v in point) + ")"


class PencilabError(Exception):
    exit_code = 3


class InputError(PencilabError, ValueError):
    exit_code = 2


class NumericalError(PencilabError, ArithmeticError):
    exit_code = 3


class DimensionMismatchError(InputError):
    def __init__(self, expected: int, got: int, what: str = "coordinates") -> None:
        self.expected = expected
        self.got = got
        self.what = what

    def __str__(self) -> str:
        return f"dimension mismatch in {self.what}: expected={self.expected} got={self.got}"


class DegenerateMetricError(NumericalError):
    def __init__(self, index: int, point: Point, value: complex) -> None:
        self.index = index
        self.point = point
        self.value = value

    def __str__(self) -> str:
        return (
            f"degenerate metric component g^{self.index + 1}={self.value!r} "
            + f"at u={_fmt_point(self.point)}"
        )


class NonFiniteError(NumericalError):
    def __init__(self, what: str, point: Point) -> None:
        self.what = what
        self.point = point

    def __str__(self) -> str:
        return f"non-finite {self.what} at u={_fmt_point(self.point)}"


class ZeroLameCoefficientError(NumericalError):
    def __init__(self, index: int, point: Point) -> None:
        self.index = index
        self.point = point

    def __str__(self) -> str:
        return f"Lame coefficient H_{self.index + 1} vanishes at u={_fmt_point(self.point)}"


class EigenvalueCollisionError(NumericalError):
    def __init__(self, i: int, j: int, point: Point) -> None:
        self.i = i
        self.j = j
        self.point = point

    def __str__(self) -> str:
        return (
            f"eigenvalue collision f^{self.i + 1}=f^{self.j + 1} "
            + f"at u={_fmt_point(self.point)}"
        )


class InvalidConstantsError(InputError):
    def __init__(self, constants: typing.Sequence[complex], reason: str) -> None:
        self.constants = list(constants)
        self.reason = reason

    def __str__(self) -> str:
        return f"invalid constants {self.constants!r}: {self.reason}"


class BranchError(NumericalError):
    def __init__(self, what: str, value: complex, point: typing.Optional[Point] = None) -> None:
        self.what = what
        self.value = value
        self.point = point

    def __str__(self) -> str:
        where = "" if self.point is None else f" at {_fmt_point(self.point)}"
        return f"square-root branch failure for {self.what}={self.value!r}{where}"


class DecayBoundError(NumericalError):
    def __init__(self, observed: float, trunc_tol: float, s_max: float) -> None:
        self.observed = observed
        self.trunc_tol = trunc_tol
        self.s_max = s_max

    def __str__(self) -> str:
        return (
            f"kernel does not decay: max|F|={self.observed:.3e} at s_max={self.s_max!r} "
            + f"exceeds trunc_tol={self.trunc_tol:.3e}"
        )


class IllConditionedError(NumericalError):
    def __init__(self, cond: float, limit: float, s: float) -> None:
        self.cond = cond
        self.limit = limit
        self.s = s

    def __str__(self) -> str:
        return (
            f"ill-conditioned integral equation at s={self.s!r}: "
            + f"cond={self.cond:.3e} limit={self.limit:.1e}"
        )


class SingularSpectralPointError(NumericalError):
    def __init__(self, lam: complex, index: int, point: Point) -> None:
        self.lam = lam
        self.index = index
        self.point = point

    def __str__(self) -> str:
        return (
            f"spectral parameter lambda={self.lam!r} hits -f^{self.index + 1} "
            + f"at u={_fmt_point(self.point)}"
        )


class StepSizeError(NumericalError):
    def __init__(self, step: float, length: float) -> None:
        self.step = step
        self.length = length

    def __str__(self) -> str:
        return f"step size underflow step={self.step!r} for segment length={self.length!r}"


class QuadratureError(NumericalError):
    def __init__(self, estimate: float, tol: float) -> None:
        self.estimate = estimate
        self.tol = tol

    def __str__(self) -> str:
        return f"quadrature did not converge: estimate={self.estimate:.3e} tol={self.tol:.1e}"


class SingularPairError(InputError):
    def __str__(self) -> str:
        return "both eigenvalue functions are the same constant (singular pencil direction)"


class ScenarioError(InputError):
    def __init__(
        self, message: str, field: str = "", path: str = "", line: typing.Optional[int] = None
    ) -> None:
        self.message = message
        self.field = field
        self.path = path
        self.line = line

    def __str__(self) -> str:
        parts = [self.message]
        if self.field:
            parts.append(f"field={self.field!r}")
        if self.path:
            parts.append(f"file={self.path!r}")
        if self.line is not None:
            parts.append(f"line={self.line}")
        return " ".join(parts)


class MissingSectionError(InputError):
    def __init__(self, section: str) -> None:
        self.section = section

    def __str__(self) -> str:
        return f"report has no data for section={self.section!r}"
