"""
Evaluation schemas: QA tasks, predictions, metric reports and context-efficiency curves
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DatasetProfile(str, Enum):
    NARRATIVEQA = "narrativeqa"
    QASPER = "qasper"
    QUALITY = "quality"


PROFILE_METRICS: Dict[str, List[str]] = {
    DatasetProfile.NARRATIVEQA.value: ["bleu4", "rouge_l", "meteor_lite"],
    DatasetProfile.QASPER.value: ["token_f1"],
    DatasetProfile.QUALITY.value: ["mc_accuracy"],
}


class QaTask(BaseModel):
    """One evaluation question over a document"""
    model_config = ConfigDict(frozen=True)

    task_id: str = Field(..., min_length=1)
    doc_id: str = Field(..., min_length=1)
    question: str = Field(..., min_length=1)
    gold_answers: List[str] = Field(..., min_length=1)
    options: Optional[List[str]] = Field(default=None, min_length=4, max_length=4)
    gold_index: Optional[int] = Field(default=None, ge=1, le=4)

    @model_validator(mode="after")
    def check_choices(self) -> "QaTask":
        if (self.options is None) != (self.gold_index is None):
            raise ValueError("options and gold_index must be given together")
        return self

    @property
    def is_multiple_choice(self) -> bool:
        return self.options is not None


class Prediction(BaseModel):
    """A model answer for one task at one budget"""
    task_id: str
    budget: int = Field(..., ge=0)
    answer: str = ""
    round1_answer: Optional[str] = None
    option_index: Optional[int] = None
    invalid_option: bool = False
    used_tokens: int = 0
    context_unit_ids: List[str] = Field(default_factory=list)


class MetricReport(BaseModel):
    """Per-task scores for one metric and their mean"""
    metric_name: str
    per_task: Dict[str, float] = Field(default_factory=dict)
    aggregate: float = Field(0.0, ge=0.0, le=1.0)
    flags: List[str] = Field(default_factory=list, description="Task ids with invalid predictions")


class CurvePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    budget_b: int = Field(..., ge=0)
    score_s: float


class Curve(BaseModel):
    """(budget, score) points, budgets strictly increasing"""
    metric_name: str
    label: str = ""
    points: List[CurvePoint] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_order(self) -> "Curve":
        budgets = [p.budget_b for p in self.points]
        if any(a >= b for a, b in zip(budgets, budgets[1:])):
            raise ValueError("Curve budgets must be strictly increasing")
        return self
