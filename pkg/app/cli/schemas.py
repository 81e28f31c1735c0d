"""
Run configuration and the stage manifest
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.config import settings
from app.core.errors import ConfigurationError
from app.eval.schemas import PROFILE_METRICS
from app.text.schemas import CHUNK_SWEEP, DEFAULT_CHUNK_TARGET, TokenizerSpec
from prompts.prompts import DEFAULT_TEMPLATE_VERSION

DEFAULT_BUDGETS = [50, 100, 200, 400, 800]


class RunConfig(BaseModel):
    """Everything that determines a run's artifacts"""
    dataset_profile: str = "narrativeqa"
    tokenizer: TokenizerSpec = Field(default_factory=TokenizerSpec)
    chunk_target: int = Field(DEFAULT_CHUNK_TARGET, ge=1)
    baseline_chunk_target: int = Field(DEFAULT_CHUNK_TARGET, ge=1)
    chunk_sweep: List[int] = Field(default_factory=lambda: list(CHUNK_SWEEP))
    budgets: List[int] = Field(default_factory=lambda: list(DEFAULT_BUDGETS))
    num_kbs: int = Field(1, ge=1, description="S, the number of sampled KBs merged into K^final")
    num_kbs_sweep: List[int] = Field(default_factory=lambda: [1, 3, 5])
    backend: Literal["mock", "http"] = "mock"
    seed: Optional[int] = None
    temperature: Optional[float] = Field(default=None, ge=0.0)
    model: Optional[str] = None
    bm25_k1: float = Field(1.2, gt=0)
    bm25_b: float = Field(0.75, ge=0, le=1)
    speculation: bool = True
    unit: Literal["edp", "chunk", "external"] = "edp"
    retrieval_scope: Literal["document", "corpus"] = "document"
    bleu_smoothing: bool = False
    jobs: int = Field(1, ge=1)
    log_transcripts: bool = False
    template_version: str = DEFAULT_TEMPLATE_VERSION
    corpus_path: Optional[str] = None
    tasks_path: Optional[str] = None
    external_units_path: Optional[str] = None
    vectors_path: Optional[str] = None
    workdir: str = Field(default_factory=lambda: settings.WORKDIR)

    @model_validator(mode="after")
    def check_run(self) -> "RunConfig":
        if self.dataset_profile not in PROFILE_METRICS:
            raise ValueError(f"Unknown dataset_profile {self.dataset_profile}; expected one of {sorted(PROFILE_METRICS)}")
        for name in ("budgets", "chunk_sweep", "num_kbs_sweep"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"{name} must not be empty")
            if any(a >= b for a, b in zip(values, values[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if self.budgets[0] < 0:
            raise ValueError("budgets must be >= 0")
        if self.chunk_sweep[0] < 1 or self.num_kbs_sweep[0] < 1:
            raise ValueError("chunk_sweep and num_kbs_sweep values must be >= 1")
        if self.backend == "mock" and self.seed is None:
            raise ValueError("seed is required when backend is mock")
        return self

    @property
    def kb_name(self) -> str:
        return "edp" if self.speculation else "edp_factonly"

    def edp_label(self, num_kbs: Optional[int] = None) -> str:
        return f"{self.kb_name}_s{num_kbs or self.num_kbs}"

    def default_label(self) -> str:
        if self.unit == "edp":
            return self.edp_label()
        if self.unit == "chunk":
            return f"chunk{self.baseline_chunk_target}"
        return "external"

    def backend_fingerprint(self) -> Dict[str, Any]:
        return {
            "backend": self.backend,
            "seed": self.seed,
            "temperature": self.temperature,
            "model": self.model or (settings.LLM_MODEL if self.backend == "http" else None),
            "template_version": self.template_version,
        }


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read a JSON run config and apply flag overrides (None values are ignored).

    Raises:
        ConfigurationError: If the file is unreadable or the result fails validation
    """
    payload: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = json.load(f)
        except FileNotFoundError as e:
            raise ConfigurationError("Config file not found", path) from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file is not valid JSON: {e.msg}", path) from e
        if not isinstance(payload, dict):
            raise ConfigurationError("Config file must hold a JSON object", path)
    payload.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**payload)
    except ValidationError as e:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"Invalid run config: {errors}", path) from e


class StageRecord(BaseModel):
    """What a stage consumed and produced"""
    inputs_hash: str
    outputs: Dict[str, str] = Field(default_factory=dict, description="Relative path -> sha256")
    completed: List[str] = Field(default_factory=list, description="doc_id:chunk_index:sample_run items")
    failed: List[str] = Field(default_factory=list)


class RunManifest(BaseModel):
    stages: Dict[str, StageRecord] = Field(default_factory=dict)

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        if not path.exists():
            return cls()
        with open(path, "r", encoding="utf-8") as f:
            return cls(**json.load(f))
