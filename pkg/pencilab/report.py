import dataclasses
import math
import typing

from .fields import Point


def _point_key(point: typing.Optional[Point]) -> typing.Optional[typing.List[float]]:
    if point is None:
        return None
    return [complex(v).real for v in point]


@dataclasses.dataclass
class EquationResidual:
    name: str
    max_norm: float = 0.0
    sum_sq: float = 0.0
    samples: int = 0
    worst_point: typing.Optional[typing.List[float]] = None
    tolerance: float = 1e-6
    note: str = ""
    pointwise: typing.List[typing.Tuple[typing.List[float], float]] = dataclasses.field(
        default_factory=list
    )

    def add(self, value: complex, point: typing.Optional[Point] = None) -> None:
        r = abs(complex(value))
        if not math.isfinite(r):
            r = math.inf
        self.samples += 1
        self.sum_sq += r * r
        key = _point_key(point)
        if key is not None:
            self.pointwise.append((key, r))
        if self.samples == 1 or r > self.max_norm:
            self.max_norm = r
            self.worst_point = key

    @property
    def l2(self) -> float:
        if self.samples == 0:
            return 0.0
        return math.sqrt(self.sum_sq / self.samples)

    @property
    def passed(self) -> bool:
        return self.max_norm <= self.tolerance

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "name": self.name,
            "max_norm": self.max_norm,
            "l2": self.l2,
            "sum_sq": self.sum_sq,
            "samples": self.samples,
            "worst_point": self.worst_point,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "EquationResidual":
        samples = int(data.get("samples", 0))
        l2 = float(data.get("l2", 0.0))
        sum_sq = float(data["sum_sq"]) if "sum_sq" in data else l2 * l2 * samples
        return cls(
            name=data["name"],
            max_norm=float(data.get("max_norm", 0.0)),
            sum_sq=sum_sq,
            samples=samples,
            worst_point=data.get("worst_point"),
            tolerance=float(data.get("tolerance", 1e-6)),
            note=data.get("note", ""),
        )


@dataclasses.dataclass
class ResidualReport:
    """Per-equation residual norms over a sample set with a pass verdict each.

    An equation that received no samples passes vacuously.
    """

    title: str
    tolerance: float = 1e-6
    grid: str = ""
    equations: typing.Dict[str, EquationResidual] = dataclasses.field(default_factory=dict)
    notes: typing.List[str] = dataclasses.field(default_factory=list)

    def equation(
        self, name: str, tolerance: typing.Optional[float] = None, note: str = ""
    ) -> EquationResidual:
        if name not in self.equations:
            self.equations[name] = EquationResidual(
                name=name,
                tolerance=self.tolerance if tolerance is None else tolerance,
                note=note,
            )
        return self.equations[name]

    def add(self, name: str, value: complex, point: typing.Optional[Point] = None) -> None:
        self.equation(name).add(value, point)

    def note(self, message: str) -> None:
        self.notes.append(message)

    def merge(self, other: "ResidualReport", prefix: str = "") -> "ResidualReport":
        for name, eq in other.equations.items():
            self.equations[prefix + name] = eq
        self.notes.extend(other.notes)
        return self

    def __getitem__(self, name: str) -> EquationResidual:
        return self.equations[name]

    def __contains__(self, name: object) -> bool:
        return name in self.equations

    @property
    def max_norm(self) -> float:
        return max((eq.max_norm for eq in self.equations.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return all(eq.passed for eq in self.equations.values())

    def failures(self) -> typing.List[str]:
        return [name for name, eq in self.equations.items() if not eq.passed]

    def as_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "title": self.title,
            "tolerance": self.tolerance,
            "grid": self.grid,
            "passed": self.passed,
            "equations": [eq.as_json() for eq in self.equations.values()],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "ResidualReport":
        report = cls(
            title=data["title"],
            tolerance=float(data.get("tolerance", 1e-6)),
            grid=data.get("grid", ""),
            notes=list(data.get("notes", [])),
        )
        for item in data.get("equations", []):
            eq = EquationResidual.from_dict(item)
            report.equations[eq.name] = eq
        return report
