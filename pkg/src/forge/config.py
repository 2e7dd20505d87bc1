"""Run configuration: one JSON document binding sources, endpoints, and stages.

Secrets never live in the config; bearer tokens come from the environment
variable each endpoint names (default FORGE_API_TOKEN). An endpoint whose
base_url starts with "mock:" is served by the deterministic scripted mock,
which keeps whole runs reproducible offline.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from .corpus import Category
from .inference import (
    MULTIMODAL,
    TEXT_ONLY,
    ConfigError,
    EndpointClient,
    EndpointConfig,
    EndpointPool,
    HttpTransport,
    MockTransport,
)
from .mixer import MixPlan

log = logging.getLogger(__name__)

STAGE_TEMPERATURES = {"rewrite": 0.7, "judge": 0.0, "score": 0.0}


@dataclass(slots=True)
class EndpointEntry:
    config: EndpointConfig
    mock_script: str | None = None
    mock_default: str | None = None


@dataclass(slots=True)
class RunConfig:
    source_registry: Path
    output_root: Path
    endpoints: list[EndpointEntry]
    media_root: Path | None = None
    template_overrides: dict[str, Path] = field(default_factory=dict)
    stages: dict[str, bool] = field(default_factory=dict)
    temperatures: dict[str, float] = field(default_factory=lambda: dict(STAGE_TEMPERATURES))
    pair_num: int = 3
    seed: int = 0
    screening_n: int = 1000
    score_sample_n: int = 1000
    max_workers: int = 8
    mix: MixPlan | None = None
    mix_original_pool: str = "both"  # group_a | group_b | both
    base_dir: Path = Path(".")

    def stage_enabled(self, name: str) -> bool:
        return self.stages.get(name, True)

    def temperature_for(self, stage: str) -> float:
        return self.temperatures.get(stage, STAGE_TEMPERATURES.get(stage, 0.0))


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: Path | str, seed_override: int | None = None) -> RunConfig:
    """Load and validate a run config; referenced paths must exist."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    base = path.parent

    try:
        registry = _resolve(base, payload["source_registry"])
        output_root = _resolve(base, payload["output_root"])
    except KeyError as exc:
        raise ConfigError(f"config missing required field {exc}") from exc
    if not registry.exists():
        raise ConfigError(f"source_registry does not exist: {registry}")

    media_root = None
    if payload.get("media_root"):
        media_root = _resolve(base, payload["media_root"])
        if not media_root.exists():
            raise ConfigError(f"media_root does not exist: {media_root}")

    endpoints: list[EndpointEntry] = []
    for entry in payload.get("endpoints", []):
        cfg = EndpointConfig(
            base_url=entry["base_url"],
            model_name=entry["model_name"],
            kind=entry["kind"],
            max_concurrent=entry.get("max_concurrent", 4),
            timeout=entry.get("timeout", 120.0),
            retry_limit=entry.get("retry_limit", 3),
            temperature=entry.get("temperature", 0.7),
            max_tokens=entry.get("max_tokens", 2048),
            api_token_env=entry.get("api_token_env", "FORGE_API_TOKEN"),
            requests_per_second=entry.get("requests_per_second"),
        )
        mock_script = entry.get("mock_script")
        if mock_script:
            mock_script = str(_resolve(base, mock_script))
            if not Path(mock_script).exists():
                raise ConfigError(f"mock_script does not exist: {mock_script}")
        endpoints.append(
            EndpointEntry(cfg, mock_script=mock_script, mock_default=entry.get("mock_default"))
        )
    if not endpoints:
        raise ConfigError("config declares no endpoints")

    overrides = {}
    for tid, override_path in (payload.get("template_overrides") or {}).items():
        resolved = _resolve(base, override_path)
        if not resolved.exists():
            raise ConfigError(f"template override does not exist: {resolved}")
        overrides[tid] = resolved

    seed = payload.get("seed", 0) if seed_override is None else seed_override

    mix = None
    if payload.get("mix"):
        entry = payload["mix"]
        constraints = None
        if entry.get("category_constraints"):
            constraints = {
                Category(cat): (bounds.get("min"), bounds.get("max"))
                for cat, bounds in entry["category_constraints"].items()
            }
        mix = MixPlan(
            total=entry["total"],
            rewritten_fraction=entry["rewritten_fraction"],
            seed=entry.get("seed", seed),  # explicit mix seed beats the global one
            category_constraints=constraints,
        )

    cfg = RunConfig(
        source_registry=registry,
        output_root=output_root,
        endpoints=endpoints,
        media_root=media_root,
        template_overrides=overrides,
        stages={k: bool(v) for k, v in (payload.get("stages") or {}).items()},
        temperatures={**STAGE_TEMPERATURES, **(payload.get("temperatures") or {})},
        pair_num=payload.get("pair_num", 3),
        seed=seed,
        screening_n=payload.get("screening_n", 1000),
        score_sample_n=payload.get("score_sample_n", 1000),
        max_workers=payload.get("max_workers", 8),
        mix=mix,
        mix_original_pool=payload.get("mix_original_pool", "both"),
        base_dir=base,
    )
    validate_endpoint_kinds(cfg)
    return cfg


def validate_endpoint_kinds(cfg: RunConfig) -> None:
    """Caption rewriting needs exactly one text_only and at least one multimodal endpoint."""
    kinds = [entry.config.kind for entry in cfg.endpoints]
    if cfg.stage_enabled("rewrite"):
        if kinds.count(TEXT_ONLY) > 1:
            raise ConfigError("at most one text_only endpoint may be configured")
        if MULTIMODAL not in kinds:
            raise ConfigError("rewriting requires a multimodal endpoint")


def build_pool(cfg: RunConfig) -> EndpointPool:
    clients = []
    for entry in cfg.endpoints:
        if entry.config.base_url.startswith("mock:"):
            script: dict[str, str] = {}
            rules: list[tuple[str, str]] = []
            default = entry.mock_default
            if entry.mock_script:
                payload = json.loads(Path(entry.mock_script).read_text(encoding="utf-8"))
                script = dict(payload.get("script") or {})
                rules = [(r["contains"], r["text"]) for r in payload.get("rules") or []]
                default = payload.get("default", default)
            transport = MockTransport(script=script, rules=rules, default=default, seed=cfg.seed)
        else:
            transport = HttpTransport()
        clients.append(EndpointClient(entry.config, transport))
    return EndpointPool(clients)
