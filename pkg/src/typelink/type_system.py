"""Fine semantic types and their grouping into coarse semantic groups."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import DuplicateFineType, ParseError, UnknownFineType

# Abstain label emitted by the typer when no group clears its threshold.
# Never a member of a TypeMap.
NONE_GROUP = "None"

DEFAULT_TYPE_MAP_FILE = "type_groups.tsv"


@dataclass(frozen=True)
class TypeMap:
    """Total mapping from fine semantic type to semantic group.

    Immutable once built; ``groups`` lists the distinct group names in sorted
    order, which is also the label order used by the typer.
    """

    entries: Mapping[str, str]
    groups: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        object.__setattr__(self, "groups", tuple(sorted(set(self.entries.values()))))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, fine: object) -> bool:
        return fine in self.entries

    @property
    def fine_types(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def members(self, group: str) -> list[str]:
        return [f for f, g in self.entries.items() if g == group]


def _parse_lines(lines: Iterable[str], path=None) -> TypeMap:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected 'fine_type<TAB>group', got {len(parts)} field(s)", path, lineno)
        fine, group = parts[0].strip(), parts[1].strip()
        if not fine or not group:
            raise ParseError("empty fine type or group name", path, lineno)
        if group == NONE_GROUP:
            raise ParseError(f"group name {NONE_GROUP!r} is reserved", path, lineno)
        if fine in entries:
            raise DuplicateFineType(f"{path or '<input>'}:{lineno}: fine type {fine!r} listed twice")
        entries[fine] = group
    return TypeMap(entries)


def load_type_map(path: str | Path | None = None) -> TypeMap:
    """Load a ``fine_type<TAB>group`` file; ``None`` loads the bundled map."""
    if path is None:
        text = resources.files("typelink.data").joinpath(DEFAULT_TYPE_MAP_FILE).read_text("utf-8")
        return _parse_lines(text.splitlines(), DEFAULT_TYPE_MAP_FILE)
    with open(path, encoding="utf-8") as fh:
        return _parse_lines(fh, path)


_default: TypeMap | None = None


def default_type_map() -> TypeMap:
    global _default
    if _default is None:
        _default = load_type_map()
    return _default


def group_of(type_map: TypeMap, fine: str) -> str:
    try:
        return type_map.entries[fine.strip()]
    except KeyError:
        raise UnknownFineType(f"unknown fine semantic type {fine!r}") from None


def groups_of(type_map: TypeMap, fine_types: Iterable[str]) -> set[str]:
    return {group_of(type_map, f) for f in fine_types}
