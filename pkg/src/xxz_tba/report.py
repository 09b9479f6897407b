from dataclasses import dataclass, field


@dataclass
class CheckEntry:
    name: str
    samples: list
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual < self.tolerance)


@dataclass
class CheckReport:
    """Named residual checks; ``passed`` is true only if every entry is."""

    entries: list = field(default_factory=list)

    def add(self, name, samples, max_residual, tolerance):
        self.entries.append(CheckEntry(name, list(samples), float(max_residual), float(tolerance)))

    def extend(self, other: "CheckReport"):
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failed(self):
        return [e.name for e in self.entries if not e.passed]

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self):
        return [e.name for e in self.entries]

    def format(self) -> str:
        lines = []
        for e in self.entries:
            flag = "PASS" if e.passed else "FAIL"
            lines.append(f"{flag}  {e.name:<40s} max_residual={e.max_residual:.3e} tol={e.tolerance:.1e}")
        return "\n".join(lines)
