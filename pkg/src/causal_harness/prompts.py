"""Render the three extraction prompt templates around a context document.

Templates live as checked-in text files (``templates/*.prompt``) so they can
be golden-tested byte-for-byte and swapped for variants later.  Each template
carries exactly one ``{}`` placeholder, holds the context between triple
backticks, and ends with ``### Response:``.  The stanza layout (blank-line
separation, four-space indent in the output block, no trailing newline) is
the one canonical form used everywhere.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

log = logging.getLogger(__name__)

PLACEHOLDER = "{}"


class PromptKind(enum.Enum):
    GEN = "gen"
    TASK = "task"
    COT = "cot"


class EmptyContextError(ValueError):
    pass


@dataclass(frozen=True)
class RenderedPrompt:
    kind: PromptKind
    text: str
    context: str


@lru_cache(maxsize=None)
def template_text(kind: PromptKind) -> str:
    """Raw template for ``kind``, placeholder included."""
    name = f"{kind.value}.prompt"
    text = resources.files(__package__).joinpath("templates", name).read_text("utf-8")
    if text.count(PLACEHOLDER) != 1:
        raise RuntimeError(f"template {name} must contain exactly one placeholder")
    return text


def render_prompt(kind: PromptKind, context: str) -> RenderedPrompt:
    """Insert ``context`` verbatim into the template for ``kind``.

    Deterministic; the context is never escaped.  Contexts that themselves
    contain triple backticks would blur the fence, so they are passed through
    with a warning.
    """
    if not context:
        raise EmptyContextError("context must be non-empty")
    if "```" in context:
        log.warning("context contains triple backticks; inserted verbatim")
    text = template_text(kind).replace(PLACEHOLDER, context, 1)
    return RenderedPrompt(kind=kind, text=text, context=context)
