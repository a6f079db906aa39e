"""Concept inventory and normalized alias index."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

from .errors import DuplicateCui, MissingTypes, ParseError, UnknownCui
from .type_system import TypeMap, group_of

DEFAULT_LEXICON_FILE = "toy_lexicon.tsv"


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_bounds(token: str) -> tuple[int, int]:
    lo, hi = 0, len(token)
    while lo < hi and _is_punct(token[lo]):
        lo += 1
    while hi > lo and _is_punct(token[hi - 1]):
        hi -= 1
    return lo, hi


def normalize(text: str) -> list[str]:
    """Lowercase, split on whitespace and strip token-edge punctuation.

    >>> normalize("Common Cold,")
    ['common', 'cold']
    """
    out = []
    for raw in text.lower().split():
        lo, hi = _strip_bounds(raw)
        if lo < hi:
            out.append(raw[lo:hi])
    return out


def norm_key(text: str) -> str:
    """Normalized tokens joined by single spaces; the alias-index key."""
    return " ".join(normalize(text))


class Token(NamedTuple):
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Tokenize like :func:`normalize` but keep character offsets.

    Offsets index Python ``str`` positions, i.e. Unicode scalar values.
    """
    tokens = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        lo, hi = _strip_bounds(text[i:j])
        if lo < hi:
            tokens.append(Token(text[i + lo:i + hi].lower(), i + lo, i + hi))
        i = j
    return tokens


@dataclass(frozen=True)
class Concept:
    cui: str
    preferred_name: str
    aliases: tuple[str, ...]
    fine_types: frozenset[str]

    def groups(self, type_map: TypeMap) -> set[str]:
        return {group_of(type_map, f) for f in self.fine_types}


class Lexicon:
    """Immutable concept inventory with an alias index.

    ``alias_index`` maps a normalized surface (see :func:`norm_key`) to the
    cuis carrying it, sorted ascending. Colliding aliases are kept on purpose.
    """

    def __init__(self, concepts: Iterable[Concept]):
        by_cui: dict[str, Concept] = {}
        index: dict[str, set[str]] = {}
        for c in concepts:
            if not c.cui:
                raise ParseError("empty cui")
            if c.cui in by_cui:
                raise DuplicateCui(f"duplicate cui {c.cui!r}")
            if not c.fine_types:
                raise MissingTypes(f"concept {c.cui!r} has no semantic types")
            by_cui[c.cui] = c
            for name in (c.preferred_name, *c.aliases):
                key = norm_key(name)
                if key:
                    index.setdefault(key, set()).add(c.cui)
        self.concepts: Mapping[str, Concept] = MappingProxyType(by_cui)
        self.alias_index: Mapping[str, tuple[str, ...]] = MappingProxyType(
            {k: tuple(sorted(v)) for k, v in index.items()}
        )

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, cui: object) -> bool:
        return cui in self.concepts

    def __getitem__(self, cui: str) -> Concept:
        try:
            return self.concepts[cui]
        except KeyError:
            raise UnknownCui(f"cui {cui!r} not in lexicon") from None

    def get(self, cui: str) -> Concept | None:
        return self.concepts.get(cui)

    def lookup(self, surface: str) -> list[Concept]:
        return lookup(self, surface)


def lookup(lexicon: Lexicon, surface: str) -> list[Concept]:
    """Concepts whose normalized alias equals the normalized surface, cui-sorted."""
    return [lexicon.concepts[c] for c in lexicon.alias_index.get(norm_key(surface), ())]


def _parse_lines(lines: Iterable[str], path=None, type_map: TypeMap | None = None) -> Lexicon:
    concepts = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", path, lineno)
        cui, preferred, alias_field, type_field = (p.strip() for p in parts)
        if not cui or not preferred:
            raise ParseError("empty cui or preferred name", path, lineno)
        if cui in seen:
            raise DuplicateCui(f"{path or '<input>'}:{lineno}: duplicate cui {cui!r}")
        seen.add(cui)
        fine = frozenset(t.strip() for t in type_field.split(";") if t.strip())
        if not fine:
            raise MissingTypes(f"{path or '<input>'}:{lineno}: concept {cui!r} has no semantic types")
        if type_map is not None:
            for f in sorted(fine):
                if f not in type_map:
                    raise ParseError(f"unknown semantic type {f!r}", path, lineno)
        aliases = tuple(a.strip() for a in alias_field.split("|") if a.strip())
        concepts.append(Concept(cui, preferred, aliases, fine))
    return Lexicon(concepts)


def load_lexicon(path: str | Path | None = None, type_map: TypeMap | None = None) -> Lexicon:
    """Load ``cui<TAB>preferred<TAB>alias|alias<TAB>type;type`` lines.

    With ``path=None`` the bundled toy lexicon is loaded. When ``type_map`` is
    given, every semantic type is checked against it.
    """
    if path is None:
        text = resources.files("typelink.data").joinpath(DEFAULT_LEXICON_FILE).read_text("utf-8")
        return _parse_lines(text.splitlines(), DEFAULT_LEXICON_FILE, type_map)
    with open(path, encoding="utf-8") as fh:
        return _parse_lines(fh, path, type_map)
