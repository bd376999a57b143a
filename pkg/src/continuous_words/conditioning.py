"""Prompt templates, slot injection, and guidance conditioning assembly.

Templates carry an optional identity slot ``<obj>`` and attribute slots
``<attr:NAME>``.  Injection happens at the input-embedding layer: the token
sequence is embedded, slot positions are overwritten with the identity
embedding or mapper outputs, and only then does the text encoder run, so the
injected words interact with their context.  The negative side of
classifier-free guidance is either the empty-prompt encoding or, to suppress
the training object, a minimal prompt carrying the identity token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import torch

from .errors import ConfigurationError, PromptLengthError, TemplateParseError
from .mapper import WordMapper, map_to_embedding

NEGATIVE_IDENTITY_TEMPLATE = "a photo of <obj>"

_PLACEHOLDER_RE = re.compile(r"<obj>|<attr:([A-Za-z_][A-Za-z0-9_]*)>")


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class ObjSlot:
    pass


@dataclass(frozen=True)
class AttrSlot:
    name: str


@dataclass(frozen=True)
class PromptTemplate:
    raw: str
    segments: tuple

    @property
    def has_obj_slot(self) -> bool:
        return any(isinstance(s, ObjSlot) for s in self.segments)

    @property
    def attr_names(self) -> list[str]:
        return [s.name for s in self.segments if isinstance(s, AttrSlot)]

    def serialize(self) -> str:
        parts = []
        for seg in self.segments:
            if isinstance(seg, Literal):
                parts.append(seg.text)
            elif isinstance(seg, ObjSlot):
                parts.append("<obj>")
            else:
                parts.append(f"<attr:{seg.name}>")
        return "".join(parts)


def parse_template(raw: str, known_attributes: Sequence[str] | None = None) -> PromptTemplate:
    """Parse a template string into literal and slot segments.

    When ``known_attributes`` is given, attribute slots must name one of
    them.  Parsing is reversible: ``parse_template(raw).serialize() == raw``.
    """
    if not raw:
        raise TemplateParseError("template must be non-empty", 0)

    def add_literal(text: str, offset: int) -> None:
        bad = text.find("<attr:")
        if bad >= 0:
            raise TemplateParseError("malformed <attr:...> placeholder", offset + bad)
        segments.append(Literal(text))

    segments: list = []
    obj_seen = False
    cursor = 0
    for match in _PLACEHOLDER_RE.finditer(raw):
        if match.start() > cursor:
            add_literal(raw[cursor : match.start()], cursor)
        if match.group(0) == "<obj>":
            if obj_seen:
                raise TemplateParseError("template contains more than one <obj> slot", match.start())
            obj_seen = True
            segments.append(ObjSlot())
        else:
            name = match.group(1)
            if known_attributes is not None and name not in known_attributes:
                raise TemplateParseError(f"unknown attribute {name!r}", match.start())
            segments.append(AttrSlot(name))
        cursor = match.end()
    if cursor < len(raw):
        add_literal(raw[cursor:], cursor)
    return PromptTemplate(raw=raw, segments=tuple(segments))


@dataclass
class IdentityToken:
    """A rare token bound to the training object, with a learned embedding."""

    token_string: str
    embedding: torch.Tensor

    def validate(self, backbone) -> None:
        ids = backbone.tokenizer.encode_words(self.token_string)
        if len(ids) != 1:
            raise ConfigurationError(
                f"identity token {self.token_string!r} must tokenize to exactly one id, got {len(ids)}"
            )
        if self.embedding.shape != (backbone.embedding_width,):
            raise ConfigurationError(
                f"identity embedding must have shape ({backbone.embedding_width},)"
            )


@dataclass(frozen=True)
class ConditioningBundle:
    """Encoded positive/negative sequences plus where injection happened."""

    positive: torch.Tensor
    negative: torch.Tensor
    slot_positions: tuple[int, ...]
    input_embeddings: torch.Tensor

    def __post_init__(self):
        if self.positive.shape != self.negative.shape:
            raise ValueError("positive and negative conditioning must have equal shape")
        for pos in self.slot_positions:
            if not 0 <= pos < self.positive.shape[0]:
                raise ValueError(f"slot position {pos} outside sequence")


def tokenize_template(template: PromptTemplate, backbone) -> tuple[list[int], list[int]]:
    """Token ids for a template (slots as the reserved slot token) + positions.

    The returned positions are aligned with the template's slot order.
    """
    tk = backbone.tokenizer
    ids = [tk.BOS]
    positions: list[int] = []
    for seg in template.segments:
        if isinstance(seg, Literal):
            ids.extend(tk.encode_words(seg.text))
        else:
            positions.append(len(ids))
            ids.append(tk.SLOT)
    ids.append(tk.EOS)
    if len(ids) > backbone.max_sequence_length:
        raise PromptLengthError(
            f"prompt needs {len(ids)} tokens but the backbone allows "
            f"{backbone.max_sequence_length}"
        )
    ids.extend([tk.PAD] * (backbone.max_sequence_length - len(ids)))
    return ids, positions


def build_input_embeddings(
    template: PromptTemplate,
    identity: IdentityToken | None,
    values: Mapping[str, float],
    mappers: Mapping[str, WordMapper],
    backbone,
) -> tuple[torch.Tensor, tuple[int, ...]]:
    """Embed the token sequence and overwrite slot positions, pre-encoder."""
    if template.has_obj_slot != (identity is not None):
        raise ConfigurationError(
            "an identity token must be provided exactly when the template has an <obj> slot"
        )
    for name in template.attr_names:
        if name not in mappers:
            raise ConfigurationError(f"no mapper registered for attribute slot {name!r}")
    ids, positions = tokenize_template(template, backbone)
    injected = backbone.embed(ids).clone()
    slots = [s for s in template.segments if not isinstance(s, Literal)]
    for slot, pos in zip(slots, positions):
        if isinstance(slot, ObjSlot):
            injected[pos] = identity.embedding
        else:
            injected[pos] = map_to_embedding(mappers[slot.name], values)
    return injected, tuple(positions)


def negative_conditioning(mode: str, identity: IdentityToken | None, backbone) -> torch.Tensor:
    """Encoded negative sequence: empty prompt, or identity-bearing prompt.

    ``identity`` mode swaps the null-text conditioning for a minimal prompt
    whose object slot carries the identity token, disincentivizing the
    training object's appearance under guidance.
    """
    if mode == "null_text":
        return backbone.encode(backbone.embed(backbone.tokenize("")))
    if mode == "identity":
        if identity is None:
            raise ConfigurationError("negative mode 'identity' requires an identity token")
        template = parse_template(NEGATIVE_IDENTITY_TEMPLATE)
        injected, _ = build_input_embeddings(template, identity, {}, {}, backbone)
        return backbone.encode(injected)
    raise ConfigurationError(f"unknown negative mode {mode!r}")


def assemble_conditioning(
    template: PromptTemplate,
    identity: IdentityToken | None,
    values: Mapping[str, float],
    mappers: Mapping[str, WordMapper],
    backbone,
    negative_mode: str = "null_text",
    negative_identity: IdentityToken | None = None,
) -> ConditioningBundle:
    """Build the full positive/negative conditioning for one prompt.

    ``identity`` fills the template's ``<obj>`` slot; ``negative_identity``
    (defaulting to ``identity``) feeds the negative side when
    ``negative_mode`` is ``identity`` and may be supplied even for templates
    without an object slot.
    """
    injected, positions = build_input_embeddings(template, identity, values, mappers, backbone)
    positive = backbone.encode(injected)
    negative = negative_conditioning(negative_mode, negative_identity or identity, backbone)
    return ConditioningBundle(
        positive=positive,
        negative=negative,
        slot_positions=positions,
        input_embeddings=injected,
    )
