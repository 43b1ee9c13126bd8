"""Run configuration: a TOML file validated by pydantic models.

Serialization drops unset optional keys (TOML has no null) and is
canonical, so ``dump(load(dump(cfg))) == dump(cfg)`` byte for byte.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .backend import BackendBinding, HttpSettings, ScriptedSettings, make_policy
from .conversation import (
    DEFAULT_FEEDBACK,
    FORWARD_BATCH,
    FORWARD_DEFAULT,
    PROSE_FEEDBACK,
    FeedbackTemplates,
    PromptTemplate,
)
from .errors import ConfigError, TemplateError
from .topology import NetworkTopology, build_network


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BackendSpec(_Model):
    kind: Literal["scripted", "http"] = "scripted"
    policy: Optional[str] = None
    params: dict = Field(default_factory=dict)
    endpoint: Optional[str] = None
    model: Optional[str] = None
    temperature: float = 1.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    max_pairs: Optional[int] = None

    def binding(self, seed: int) -> BackendBinding:
        if self.kind == "scripted":
            if not self.policy:
                raise ConfigError("scripted backends need a policy")
            try:
                policy = make_policy(self.policy, **self.params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad scripted policy {self.policy!r}: {exc}") from exc
            return BackendBinding("scripted", scripted=ScriptedSettings(policy, seed))
        if not self.endpoint or not self.model:
            raise ConfigError("http backends need endpoint and model")
        return BackendBinding(
            "http",
            http=HttpSettings(
                self.endpoint, self.model, self.temperature, self.timeout,
                self.max_retries, self.backoff, self.api_key_env, self.max_pairs,
            ),
        )


class TopologyConfig(_Model):
    layers: list[int] = Field(default_factory=lambda: [3, 1])
    dropout_rate: float = 0.5
    mask_mode: Literal["bernoulli", "fixed_count"] = "bernoulli"
    allow_empty: bool = False
    fanin: Literal["mask", "all"] = "mask"
    scope: Literal["leaders", "ancestors"] = "leaders"

    def build(self) -> NetworkTopology:
        return build_network(self.layers, self.dropout_rate)


TASK_DEFAULT_BACKENDS = {
    "dmc": BackendSpec(policy="argmax"),
    "sentiment": BackendSpec(policy="rewriter", params={"level": 4, "spread": 1}),
}


class BackendsConfig(_Model):
    default: Optional[BackendSpec] = None  # falls back to the task's scripted default
    nodes: dict[str, BackendSpec] = Field(default_factory=dict)  # keyed "layer,index"

    @field_validator("nodes")
    @classmethod
    def _keys(cls, v):
        for key in v:
            parts = key.split(",")
            if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
                raise ValueError(f"node key {key!r} must look like 'layer,index'")
        return v

    def spec_for(self, key: str, task: str = "dmc") -> BackendSpec:
        return self.nodes.get(key) or self.default or TASK_DEFAULT_BACKENDS[task]


class ScheduleConfig(_Model):
    samples_per_stage: int = 3
    num_stages: int = 8
    max_iterations: Optional[int] = None
    patience: Optional[int] = None


class DmcConfig(_Model):
    dims: int = 3
    low: int = 1
    high: int = 99
    test_count: int = 30
    test_max_gap: Optional[int] = 5
    train_file: Optional[str] = None
    test_file: Optional[str] = None
    baselines: list[Literal["no_feedback", "refine", "ensemble"]] = Field(
        default_factory=lambda: ["no_feedback", "refine", "ensemble"]
    )
    baseline_backend: BackendSpec = Field(default_factory=lambda: BackendSpec(policy="argmax"))
    baseline_members: dict[str, BackendSpec] = Field(default_factory=dict)  # ensemble member "1".."3"


class SentimentConfig(_Model):
    dataset: Optional[str] = None  # defaults to the bundled 60-sentence file
    limit: Optional[int] = None
    single: BackendSpec = Field(default_factory=lambda: BackendSpec(policy="rewriter", params={"level": 4, "spread": 1}))
    judge: BackendSpec = Field(default_factory=lambda: BackendSpec(policy="lexicon_judge"))


class TemplatesConfig(_Model):
    feedback_set: Literal["dialogue", "prose"] = "dialogue"
    forward: Optional[str] = None
    forward_item: Optional[str] = None
    forward_batch: Optional[str] = None
    right: Optional[str] = None
    wrong: Optional[str] = None
    wrong_item: Optional[str] = None
    separator: Optional[str] = None
    instruction: Optional[str] = None

    def forward_template(self) -> PromptTemplate:
        return _override(FORWARD_DEFAULT, self.forward, self.forward_item, self.separator)

    def batch_template(self) -> PromptTemplate:
        return _override(FORWARD_BATCH, self.forward_batch, self.forward_item, self.separator)

    def feedback_templates(self) -> FeedbackTemplates:
        base = DEFAULT_FEEDBACK if self.feedback_set == "dialogue" else PROSE_FEEDBACK
        return FeedbackTemplates(
            _override(base.right, self.right, None, self.separator),
            _override(base.wrong, self.wrong, self.wrong_item, self.separator),
        )


def _override(t: PromptTemplate, body, item, sep) -> PromptTemplate:
    if body is None and item is None and sep is None:
        return t
    try:
        return PromptTemplate(
            t.name,
            t.body if body is None else body,
            t.separator if sep is None else sep,
            t.item if item is None else item,
        )
    except TemplateError as exc:
        raise ConfigError(str(exc)) from exc


class RunConfig(_Model):
    task: Literal["dmc", "sentiment"] = "dmc"
    seed: int = 0
    repeats: int = 1
    output_dir: str = "runs/chatnet"
    workers: int = 1
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    backends: BackendsConfig = Field(default_factory=BackendsConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    dmc: DmcConfig = Field(default_factory=DmcConfig)
    sentiment: SentimentConfig = Field(default_factory=SentimentConfig)
    templates: TemplatesConfig = Field(default_factory=TemplatesConfig)

    @field_validator("seed")
    @classmethod
    def _seed(cls, v):
        if not -(2**63) <= v < 2**64:
            raise ValueError("seed must fit in 64 bits")
        return v

    @field_validator("repeats", "workers")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    def validate_topology(self) -> NetworkTopology:
        return self.topology.build()


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))


def loads(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data)


def from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return loads(p.read_text(encoding="utf-8"))


def save(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")


def _merge(dst: dict, src: dict) -> None:
    for k, v in src.items():
        if isinstance(v, dict) and isinstance(dst.get(k), dict):
            _merge(dst[k], v)
        else:
            dst[k] = v


def apply_overrides(cfg: RunConfig, assignments: list[str]) -> RunConfig:
    """Apply ``dotted.key=value`` overrides (TOML syntax; bare values fall back to strings)."""
    data = cfg.model_dump(mode="json", exclude_none=True)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        try:
            patch = tomli.loads(f"{key.strip()} = {raw}")
        except tomli.TOMLDecodeError:
            try:
                patch = tomli.loads(f"{key.strip()} = {tomli_w.dumps({'v': raw})[4:]}")
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse override {item!r}: {exc}") from exc
        _merge(data, patch)
    return from_dict(data)
