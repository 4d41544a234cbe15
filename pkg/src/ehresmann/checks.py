"""Small result containers shared by the sample-based verifiers."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    max_residual: float
    tol: float
    samples: int = 0
    details: dict = field(default_factory=dict)

    @classmethod
    def from_residual(cls, residual: float, tol: float, samples: int = 0, **details):
        residual = float(residual)
        # NaN never passes
        return cls(residual <= tol, residual, tol, samples, details)

    def as_dict(self) -> dict:
        out = {"passed": self.passed, "max_residual": self.max_residual,
               "tol": self.tol, "samples": self.samples}
        out.update(self.details)
        return out
