"""Registry of rewriting / judging / scoring prompt templates with placeholder rendering.

Templates live as UTF-8 resource files (one per template id, `<id>.prompt`) and
can be overridden per run without code changes. Rendering is a strict
single-pass substitution: binding values are inserted literally, never
re-expanded.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

from .corpus import Category

log = logging.getLogger(__name__)

STAGE_REWRITE = "rewrite"
STAGE_JUDGE = "judge"
STAGE_SCORE = "score"

PARSE_ANGLE_PAIRS = "angle_pairs"
PARSE_HASH_PAIRS = "hash_pairs"
PARSE_DIALOGUE = "dialogue"
PARSE_REVISED_ANSWER = "revised_answer"
PARSE_YES_NO = "yes_no"
PARSE_TWO_SCORES = "two_scores"


class PromptError(Exception):
    pass


class UnboundPlaceholder(PromptError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unbound placeholder {name}")
        self.name = name


class NotRewritable(PromptError):
    """The requested category has no rewrite template."""


_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


@dataclass(frozen=True, slots=True)
class PromptTemplate:
    template_id: str
    stage: str
    category_scope: frozenset[Category]  # empty = applies to every category
    body: str
    placeholders: frozenset[str]
    expected_parse: str


def placeholders_in(body: str) -> frozenset[str]:
    return frozenset(_PLACEHOLDER_RE.findall(body))


# template id -> (stage, scope, declared placeholders, expected parse)
_BUILTIN_SPECS: dict[str, tuple[str, frozenset[Category], frozenset[str], str]] = {
    "rewrite_general": (
        STAGE_REWRITE,
        frozenset({Category.GENERAL, Category.DOMAIN_SPECIFIC, Category.DETECTION}),
        frozenset({"pair_num", "qa_text"}),
        PARSE_ANGLE_PAIRS,
    ),
    "rewrite_chart": (
        STAGE_REWRITE,
        frozenset({Category.CHART}),
        frozenset({"qa_text"}),
        PARSE_HASH_PAIRS,
    ),
    "rewrite_math": (
        STAGE_REWRITE,
        frozenset({Category.CODE_MATH}),
        frozenset({"question", "simple_answer"}),
        PARSE_REVISED_ANSWER,
    ),
    "rewrite_caption": (
        STAGE_REWRITE,
        frozenset({Category.CAPTION}),
        frozenset({"pair_num", "caption"}),
        PARSE_ANGLE_PAIRS,
    ),
    "rewrite_ocr": (
        STAGE_REWRITE,
        frozenset({Category.OCR}),
        frozenset({"vqa"}),
        PARSE_DIALOGUE,
    ),
    "judge": (STAGE_JUDGE, frozenset(), frozenset({"qa_text"}), PARSE_YES_NO),
    "score": (STAGE_SCORE, frozenset(), frozenset({"qa_text"}), PARSE_TWO_SCORES),
}

REWRITE_ROUTING: dict[Category, str] = {
    Category.GENERAL: "rewrite_general",
    Category.DOMAIN_SPECIFIC: "rewrite_general",
    Category.DETECTION: "rewrite_general",
    Category.OCR: "rewrite_ocr",
    Category.CHART: "rewrite_chart",
    Category.CAPTION: "rewrite_caption",
    Category.CODE_MATH: "rewrite_math",
}


def builtin_template_body(template_id: str) -> str:
    ref = resources.files(__package__).joinpath("templates", f"{template_id}.prompt")
    return ref.read_text(encoding="utf-8")


def _build_template(template_id: str, body: str) -> PromptTemplate:
    stage, scope, declared, expected = _BUILTIN_SPECS[template_id]
    found = placeholders_in(body)
    undeclared = found - declared
    if undeclared:
        raise PromptError(
            f"template {template_id} uses undeclared placeholders: {sorted(undeclared)}"
        )
    return PromptTemplate(
        template_id=template_id,
        stage=stage,
        category_scope=scope,
        body=body,
        placeholders=found,
        expected_parse=expected,
    )


@lru_cache(maxsize=1)
def builtin_registry() -> dict[str, PromptTemplate]:
    """The seven built-in templates, loaded from their resource files."""
    return {
        tid: _build_template(tid, builtin_template_body(tid)) for tid in _BUILTIN_SPECS
    }


def load_registry(overrides: Mapping[str, str | Path] | None = None) -> dict[str, PromptTemplate]:
    """Built-ins, with per-run body overrides loaded from files."""
    registry = dict(builtin_registry())
    for tid, path in (overrides or {}).items():
        if tid not in _BUILTIN_SPECS:
            raise PromptError(f"unknown template id {tid!r} in overrides")
        body = Path(path).read_text(encoding="utf-8")
        registry[tid] = _build_template(tid, body)
    return registry


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute declared placeholders in a single pass; pure text otherwise unchanged."""
    missing = sorted(template.placeholders - bindings.keys())
    if missing:
        raise UnboundPlaceholder(missing[0])
    extra = sorted(bindings.keys() - template.placeholders)
    if extra:
        log.warning("template %s: ignoring extra bindings %s", template.template_id, extra)

    def substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        if name in template.placeholders:
            return str(bindings[name])
        return match.group(0)

    return _PLACEHOLDER_RE.sub(substitute, template.body)


def template_for(
    stage: str,
    category: Category | None = None,
    registry: Mapping[str, PromptTemplate] | None = None,
) -> PromptTemplate:
    """Route a (stage, category) to its template.

    Judging and scoring are category-agnostic; rewriting is routed per category
    and raises NotRewritable for Language / MultiImage / Video.
    """
    registry = registry if registry is not None else builtin_registry()
    if stage == STAGE_REWRITE:
        if category is None:
            raise PromptError("rewrite stage requires a category")
        template_id = REWRITE_ROUTING.get(category)
        if template_id is None:
            raise NotRewritable(f"category {category.value} is not rewritable")
        return registry[template_id]
    if stage == STAGE_JUDGE:
        return registry["judge"]
    if stage == STAGE_SCORE:
        return registry["score"]
    raise PromptError(f"unknown stage {stage!r}")
