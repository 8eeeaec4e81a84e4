"""
Pipeline Configuration
One JSON file drives every command; command-line flags override single keys.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from answer_matching import DEFAULT_REFUSALS
from entity_synthesis import SynthesisConfig
from experiments import DEFAULT_BIN_EDGES
from model_endpoint import EndpointConfig
from pipeline_errors import ConfigurationError, UsageError
from prompt_builder import PromptSpec
from question_generation import QuestionConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "config" / "pipeline.json"


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kb: str = "fixtures/toy_kb.json"
    entities: str = "output/entities.jsonl"
    benchmark: str = "output/benchmark.jsonl"
    reports: str = "output/reports"
    manifests: str = "output/manifests"
    checkpoints: str = "output/checkpoints"
    templates: Optional[str] = None
    template_cache: Optional[str] = "output/template_cache.json"
    exemplars: Optional[str] = None


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    profile: Literal["default", "ci"] = "default"
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)
    paths: PathsConfig = PathsConfig()
    synthesis: SynthesisConfig = SynthesisConfig()
    questions: QuestionConfig = QuestionConfig()
    prompt: PromptSpec = PromptSpec()
    endpoints: Dict[str, EndpointConfig] = {"mock": EndpointConfig()}
    default_endpoint: str = "mock"
    refusals: Tuple[str, ...] = DEFAULT_REFUSALS
    similarity_bins: Tuple[float, ...] = DEFAULT_BIN_EDGES

    @model_validator(mode="after")
    def _check(self):
        if self.profile == "ci" and self.seed is None:
            raise ValueError("profile 'ci' requires an explicit seed")
        if self.default_endpoint not in self.endpoints:
            raise ValueError(f"default_endpoint '{self.default_endpoint}' is not a configured endpoint")
        return self

    @classmethod
    def from_file(cls, path: Optional[Union[str, Path]] = None) -> "PipelineConfig":
        path = Path(path) if path else DEFAULT_CONFIG_PATH
        try:
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError(f"Configuration file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}:{e.lineno}: {e.msg}")
        return cls.parse(raw, source=str(path))

    @classmethod
    def parse(cls, raw: dict, source: str = "<config>") -> "PipelineConfig":
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigurationError(f"{source}: {e}")

    def with_overrides(self, seed: Optional[int] = None, endpoint: Optional[str] = None,
                       kb: Optional[str] = None, entities: Optional[str] = None,
                       benchmark: Optional[str] = None, reports: Optional[str] = None) -> "PipelineConfig":
        raw = self.model_dump(mode="json")
        if seed is not None:
            raw["seed"] = seed
        if endpoint is not None:
            raw["default_endpoint"] = endpoint
        for key, value in (("kb", kb), ("entities", entities), ("benchmark", benchmark), ("reports", reports)):
            if value is not None:
                raw["paths"][key] = value
        return self.parse(raw, source="command line")

    @property
    def effective_seed(self) -> int:
        return self.seed if self.seed is not None else 0

    def seeded_synthesis(self) -> SynthesisConfig:
        return self.synthesis.model_copy(update={"rng_seed": self.effective_seed})

    def seeded_questions(self) -> QuestionConfig:
        return self.questions.model_copy(update={"rng_seed": self.effective_seed})

    def endpoint(self, label: Optional[str] = None) -> EndpointConfig:
        label = label or self.default_endpoint
        if label not in self.endpoints:
            raise UsageError(f"Unknown endpoint '{label}', configured: {', '.join(sorted(self.endpoints))}")
        return self.endpoints[label]
