"""Validated records: sketch plans, instance specs, run configs and reports."""

from typing import Any, Dict, List, Literal, Optional
from pydantic import BaseModel, Field, field_validator, model_validator

from .config import settings


Strategy = Literal["none", "simple", "rsi", "rbki"]
Family = Literal[
    "synthetic1", "synthetic2", "synthetic3", "synthetic4", "synthetic5",
    "tensor_test", "planted_cp",
]
Mode = Literal["cmf", "cmtf-tucker", "cmtf-cp"]

# Parameters each generator family requires
FAMILY_PARAMS: Dict[str, tuple] = {
    "synthetic1": ("m", "n1", "n2", "r1", "r2"),
    "synthetic2": ("n", "r", "d", "c"),
    "synthetic3": ("m", "n", "r"),
    "synthetic4": ("m", "n1", "n2", "r2"),
    "synthetic5": ("m", "n1", "n2", "shared"),
    "tensor_test": ("n", "r", "d", "r1", "r2", "r3"),
    "planted_cp": ("m", "n2", "n3", "n", "r"),
}


class SketchPlan(BaseModel):
    """Which basis builder feeds the projected solve, and how it is seeded."""
    strategy: Strategy = "none"
    q: int = Field(default=1, ge=1)
    ell: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default_factory=lambda: settings.default_seed)
    trunc_tol: float = Field(default_factory=lambda: settings.trunc_tol, gt=0.0, lt=1.0)

    @field_validator("strategy", mode="before")
    @classmethod
    def _basic_alias(cls, value: Any) -> Any:
        if isinstance(value, str) and value.lower() == "basic":
            return "none"
        return value

    @model_validator(mode="after")
    def _check_block_size(self) -> "SketchPlan":
        if self.strategy == "rbki" and self.ell is None:
            raise ValueError("rbki plans require a block size ell >= 1")
        return self

    @property
    def is_randomized(self) -> bool:
        return self.strategy != "none"

    def label(self) -> str:
        """Table label in the style of the benchmark tables."""
        return {
            "none": "basic",
            "simple": "randomized",
            "rsi": "RSI",
            "rbki": "RBKI",
        }[self.strategy]


class InstanceSpec(BaseModel):
    """A synthetic instance: family, its parameters and the seed."""
    family: Family
    m: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=1)
    n1: Optional[int] = Field(default=None, ge=1)
    n2: Optional[int] = Field(default=None, ge=1)
    n3: Optional[int] = Field(default=None, ge=1)
    r: Optional[int] = Field(default=None, ge=1)
    r1: Optional[int] = Field(default=None, ge=1)
    r2: Optional[int] = Field(default=None, ge=1)
    r3: Optional[int] = Field(default=None, ge=1)
    d: Optional[float] = Field(default=None, gt=0.0)
    c: Optional[int] = Field(default=None, ge=1)
    shared: Optional[int] = Field(default=None, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_required(self) -> "InstanceSpec":
        missing = [p for p in FAMILY_PARAMS[self.family] if getattr(self, p) is None]
        if missing:
            raise ValueError(f"{self.family} requires parameters: {', '.join(missing)}")
        return self

    def params(self) -> Dict[str, Any]:
        """Only the parameters the family consumes."""
        return {p: getattr(self, p) for p in FAMILY_PARAMS[self.family]}


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run, written next to its output."""
    subcommand: str
    instance: Optional[InstanceSpec] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    params: Dict[str, Any] = Field(default_factory=dict)
    plans: List[SketchPlan] = Field(default_factory=list)
    outputs: Dict[str, str] = Field(default_factory=dict)
    repeat: int = Field(default=1, ge=1)
    seed: int = 0
    output_format: Literal["csv", "json"] = "csv"
    threads: int = Field(default_factory=lambda: settings.threads)


class RecognitionRow(BaseModel):
    """One classified query."""
    query: str
    truth: str
    predicted: str
    errs: List[Optional[float]]


class RecognitionReport(BaseModel):
    """Per-query predictions with per-person and total success rates."""
    params: Dict[str, Any] = Field(default_factory=dict)
    rows: List[RecognitionRow] = Field(default_factory=list)
    per_person: Dict[str, float] = Field(default_factory=dict)
    total_rate: float = Field(default=0.0, ge=0.0, le=1.0)

    @classmethod
    def from_rows(cls, rows: List[RecognitionRow], persons: List[str],
                  params: Optional[Dict[str, Any]] = None) -> "RecognitionReport":
        """Aggregate success rates; persons without queries are omitted."""
        per_person = {}
        for person in persons:
            mine = [row for row in rows if row.truth == person]
            if mine:
                per_person[person] = sum(row.predicted == row.truth for row in mine) / len(mine)
        total = sum(row.predicted == row.truth for row in rows) / len(rows) if rows else 0.0
        return cls(params=params or {}, rows=rows, per_person=per_person, total_rate=total)
