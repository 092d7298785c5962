"""
Condition reports: one verdict per admissibility condition, each with a
machine-readable witness when it fails.
"""

from typing import Any, Dict, Iterator, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


Status = Literal["pass", "fail", "unchecked"]


class ConditionVerdict(BaseModel):
    """Outcome of one condition check"""
    status: Status
    evidence: Literal["exact", "scan", "declared", "none"] = "exact"
    detail: str = ""
    witness: Optional[Dict[str, Any]] = Field(None, description="Violated inequality or scan point")

    @model_validator(mode="after")
    def failure_has_witness(self):
        if self.status == "fail" and not self.witness:
            raise ValueError("A failed verdict must carry a witness")
        return self


class ConditionReport(BaseModel):
    """Verdicts keyed by condition name, in insertion order"""
    verdicts: Dict[str, ConditionVerdict] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(verdict.status != "fail" for verdict in self.verdicts.values())

    def failures(self) -> Dict[str, ConditionVerdict]:
        return {name: v for name, v in self.verdicts.items() if v.status == "fail"}

    def merge(self, other: "ConditionReport") -> "ConditionReport":
        merged = dict(self.verdicts)
        merged.update(other.verdicts)
        return ConditionReport(verdicts=merged)

    def key_values(self) -> Iterator[Tuple[str, Any]]:
        """Flatten to dotted keys for the key-value report document"""
        yield "passed", self.passed
        for name, verdict in self.verdicts.items():
            yield f"{name}.status", verdict.status
            yield f"{name}.evidence", verdict.evidence
            if verdict.detail:
                yield f"{name}.detail", verdict.detail
            for key, value in (verdict.witness or {}).items():
                yield f"{name}.witness.{key}", value
