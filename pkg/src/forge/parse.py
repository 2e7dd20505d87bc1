"""Parsers that lift raw model text into structured rewrite results.

All parsers are pure and total over arbitrary text: the result is always a
ParsedRewrite / verdict / score or one of the declared errors below, and every
extracted instruction or response is a contiguous substring of the input
(modulo trimming). Nothing here judges content quality; that is the judge's job.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .corpus import ROLE_ASSISTANT, ROLE_HUMAN, QualityScore, Turn

MAX_DIALOGUE_ROUNDS = 5

KIND_PAIRS = "pairs"
KIND_DIALOGUE = "dialogue"
KIND_REVISED = "revised_answer"


class ParseError(Exception):
    """Base for declared parse failures."""

    def __init__(self, message: str, warnings: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.warnings = warnings


class EmptyParse(ParseError):
    """No extractable unit was found in the text."""


class ScoreParseError(ParseError):
    """A score axis is missing, non-integer, or out of range."""

    def __init__(self, axis: str, message: str) -> None:
        super().__init__(message)
        self.axis = axis


class Verdict(str, Enum):
    KEEP = "Keep"
    DISCARD = "Discard"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True, slots=True)
class ParsedRewrite:
    """Structured result of one rewrite call.

    Exactly one of pairs / dialogue / revised is populated, per `kind`;
    `question` accompanies the revised kind (the original instruction is kept).
    """

    kind: str
    pairs: tuple[tuple[str, str], ...] = ()
    scenario: str = ""
    dialogue: tuple[Turn, ...] = ()
    revised: str = ""
    question: str = ""
    warnings: tuple[str, ...] = ()

    def units(self) -> tuple[tuple[str, str], ...]:
        """Instruction/response units this parse contributes (dialogue counts as one)."""
        if self.kind == KIND_PAIRS:
            return self.pairs
        if self.kind == KIND_REVISED:
            return ((self.question, self.revised),)
        return ((self.scenario, ""),) if self.dialogue else ()


_TRAILER_RE = re.compile(r"^[\s\-*•]*$")


def _content_before_close(segment: str) -> tuple[str, bool]:
    """Content up to the most plausible closing '>' of a marker segment.

    A close candidate is a '>' at the end of a line (or of the segment). The
    last candidate followed only by whitespace/bullets wins, so multi-line
    content with internal '>' stays intact; otherwise the first candidate
    wins, so prose after a closed pair is dropped. No candidate at all falls
    back to the whole trimmed segment (unterminated marker, degrade gracefully).
    """
    candidates = []
    start = 0
    while (idx := segment.find(">", start)) != -1:
        rest = segment[idx + 1:]
        if rest.split("\n", 1)[0].strip() == "":
            candidates.append(idx)
        start = idx + 1
    for idx in reversed(candidates):
        if _TRAILER_RE.match(segment[idx + 1:]):
            return segment[:idx].strip(), True
    if candidates:
        return segment[: candidates[0]].strip(), True
    return segment.strip(), False


def _pair_up(
    segments: list[tuple[str, str]], warnings: list[str]
) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    pending: str | None = None
    for kind, content in segments:
        if kind == "instruction":
            if pending is not None:
                warnings.append("dangling instruction")
            pending = content
        else:
            if pending is None:
                warnings.append("response without instruction")
            else:
                if pending and content:
                    pairs.append((pending, content))
                else:
                    warnings.append("empty pair dropped")
                pending = None
    if pending is not None:
        warnings.append("dangling instruction")
    return pairs


_ANGLE_MARK_RE = re.compile(r"<\s*(instruction|response)\s*:", re.IGNORECASE)


def parse_angle_pairs(text: str) -> ParsedRewrite:
    """Extract all well-formed <Instruction: ...> / <Response: ...> pairs in order.

    Keyword casing is tolerated; surrounding prose is ignored; unmatched
    fragments are recorded as warnings. Zero pairs raises EmptyParse.
    """
    marks = list(_ANGLE_MARK_RE.finditer(text))
    warnings: list[str] = []
    segments: list[tuple[str, str]] = []
    for i, mark in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        content, closed = _content_before_close(text[mark.end():end])
        if not closed:
            warnings.append(f"unterminated {mark.group(1).lower()} marker")
        segments.append((mark.group(1).lower(), content))
    pairs = _pair_up(segments, warnings)
    if not pairs:
        raise EmptyParse("no instruction/response pairs found", tuple(warnings))
    return ParsedRewrite(kind=KIND_PAIRS, pairs=tuple(pairs), warnings=tuple(warnings))


_HASH_MARK_RE = re.compile(r"^\s*(?:[-*•]\s*)?##(Instruction|Response)##\s*:\s*(.*)$")


def parse_hash_pairs(text: str) -> ParsedRewrite:
    """As `parse_angle_pairs`, with ##Instruction##: / ##Response##: line markers.

    Markers are matched case-sensitively at line starts; a marker's content is
    the rest of its line plus continuation lines up to the next marker.
    """
    warnings: list[str] = []
    segments: list[tuple[str, str]] = []
    current: tuple[str, list[str]] | None = None
    for line in text.splitlines():
        m = _HASH_MARK_RE.match(line)
        if m:
            if current is not None:
                segments.append((current[0], "\n".join(current[1]).strip()))
            current = (m.group(1).lower(), [m.group(2)])
        elif current is not None:
            current[1].append(line)
    if current is not None:
        segments.append((current[0], "\n".join(current[1]).strip()))
    pairs = _pair_up(segments, warnings)
    if not pairs:
        raise EmptyParse("no instruction/response pairs found", tuple(warnings))
    return ParsedRewrite(kind=KIND_PAIRS, pairs=tuple(pairs), warnings=tuple(warnings))


_SPEAKER_RE = re.compile(r"^\s*(Human|Assistant)\s*:\s*(.*)$")
_SCENARIO_RE = re.compile(r"^\s*Scenario\s*:\s*(.*)$")

_SPEAKER_ROLE = {"Human": ROLE_HUMAN, "Assistant": ROLE_ASSISTANT}


def parse_dialogue(text: str) -> ParsedRewrite:
    """Capture the scenario line and alternating Human/Assistant turns.

    Strict alternation starting with Human; turn text concatenates continuation
    lines until the next speaker tag; rounds beyond five are truncated with a
    warning. No complete round means EmptyParse.
    """
    warnings: list[str] = []
    scenario_parts: list[str] = []
    turns: list[Turn] = []
    current: tuple[str, list[str]] | None = None
    in_scenario = False
    expected = ROLE_HUMAN

    def flush() -> None:
        nonlocal current
        if current is not None:
            turns.append(Turn(current[0], "\n".join(current[1]).strip()))
            current = None

    for line in text.splitlines():
        speaker = _SPEAKER_RE.match(line)
        if speaker:
            in_scenario = False
            role = _SPEAKER_ROLE[speaker.group(1)]
            if role != expected:
                if not turns and current is None:
                    raise EmptyParse(
                        "no dialogue found", ("dialogue must start with Human",)
                    )
                warnings.append("alternation broken; remainder ignored")
                break
            flush()
            current = (role, [speaker.group(2)])
            expected = ROLE_ASSISTANT if role == ROLE_HUMAN else ROLE_HUMAN
            continue
        scenario = _SCENARIO_RE.match(line)
        if scenario and not turns and current is None and not scenario_parts:
            scenario_parts.append(scenario.group(1))
            in_scenario = True
            continue
        if current is not None:
            current[1].append(line)
        elif in_scenario:
            scenario_parts.append(line)
    flush()

    if turns and turns[-1].role == ROLE_HUMAN:
        turns.pop()
        warnings.append("dangling human turn dropped")
    rounds = len(turns) // 2
    if rounds == 0:
        raise EmptyParse("no dialogue found", tuple(warnings) or ("no Human/Assistant tags",))
    if rounds > MAX_DIALOGUE_ROUNDS:
        turns = turns[: MAX_DIALOGUE_ROUNDS * 2]
        warnings.append(f"truncated to {MAX_DIALOGUE_ROUNDS} rounds")
    return ParsedRewrite(
        kind=KIND_DIALOGUE,
        scenario="\n".join(scenario_parts).strip(),
        dialogue=tuple(turns),
        warnings=tuple(warnings),
    )


_RESPONSE_WRAP_RE = re.compile(r"<\s*response\s*:", re.IGNORECASE)


def parse_revised_answer(text: str, fallback_question: str) -> ParsedRewrite:
    """Return the body of a <response: ...> wrapper, or the whole trimmed text.

    The instruction stays the original question; only the answer is replaced.
    """
    body = text.strip()
    if not body:
        raise EmptyParse("empty rewrite body")
    warnings: tuple[str, ...] = ()
    m = _RESPONSE_WRAP_RE.search(body)
    if m:
        revised, closed = _content_before_close(body[m.end():])
        if not closed:
            warnings = ("unterminated response marker",)
        if not revised:
            raise EmptyParse("empty response wrapper")
    else:
        revised = body
    return ParsedRewrite(
        kind=KIND_REVISED, revised=revised, question=fallback_question, warnings=warnings
    )


_QUOTES = "\"'“”‘’"


def parse_verdict(text: str) -> Verdict:
    """Strict single-word Yes/No, tolerating whitespace, quotes, and end punctuation."""
    token = text.strip().strip(_QUOTES).rstrip(".!?,;:").strip().strip(_QUOTES)
    lowered = token.lower()
    if lowered == "yes":
        return Verdict.KEEP
    if lowered == "no":
        return Verdict.DISCARD
    return Verdict.UNPARSEABLE


_CONTENT_RE = re.compile(
    r"Information\s+Content(?:\s+Score)?\s*\(\s*1\s*-\s*5\s*\)\s*:\s*(-?\d+(?:\.\d+)?)",
    re.IGNORECASE,
)
_RELEVANCE_RE = re.compile(
    r"Relevance(?:\s+Score)?\s*\(\s*1\s*-\s*5\s*\)\s*:\s*(-?\d+(?:\.\d+)?)",
    re.IGNORECASE,
)


def parse_scores(text: str) -> QualityScore:
    """Extract the two labeled integers in [1, 5]; both are required."""
    values: dict[str, int] = {}
    for axis, pattern in (("content", _CONTENT_RE), ("relevance", _RELEVANCE_RE)):
        m = pattern.search(text)
        if m is None:
            raise ScoreParseError(axis, f"{axis} score missing")
        raw = float(m.group(1))
        if not raw.is_integer():
            raise ScoreParseError(axis, f"{axis} score is not an integer: {m.group(1)}")
        value = int(raw)
        if not 1 <= value <= 5:
            raise ScoreParseError(axis, f"{axis} score out of range: {value}")
        values[axis] = value
    return QualityScore(content=values["content"], relevance=values["relevance"])


def render_pairs(parsed: ParsedRewrite, style: str = "angle") -> str:
    """Render a pairs-kind parse back to canonical marker syntax."""
    if parsed.kind != KIND_PAIRS:
        raise ValueError(f"render_pairs expects pairs, got {parsed.kind}")
    blocks = []
    for instruction, response in parsed.pairs:
        if style == "angle":
            blocks.append(f"<Instruction: {instruction}>\n<Response: {response}>")
        elif style == "hash":
            blocks.append(f"##Instruction##: {instruction}\n##Response##: {response}")
        else:
            raise ValueError(f"unknown render style {style!r}")
    return "\n".join(blocks)
