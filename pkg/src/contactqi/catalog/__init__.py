"""Built-in manifold definitions, loaded through the ordinary file format."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..definitions import DefinitionSet, ManifoldBlock, parse_definitions
from ..manifold import ChartManifold
from ..qisom import Embedding
from ..structure import ContactStructure

NAMES = ("m1_literal", "m1_corrected", "m2", "pair_example_5_1", "sphere3", "euclidean3")
SCHEME = "catalog:"


class UnknownEntryError(KeyError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    manifold: ChartManifold
    structure: ContactStructure | None
    embedding: Embedding | None
    provenance: tuple[str, ...]
    definitions: DefinitionSet


def source_text(name: str) -> str:
    if name not in NAMES:
        raise UnknownEntryError(f"unknown catalog entry {name!r}; available: {', '.join(NAMES)}")
    return resources.files(__package__).joinpath("data", f"{name}.mfd").read_text()


def _resolve(name: str) -> ManifoldBlock:
    entry = load(name)
    return ManifoldBlock(entry.manifold, entry.structure)


def load(name: str) -> CatalogEntry:
    defs = parse_definitions(source_text(name), f"{SCHEME}{name}")
    block = defs.manifold()
    emb = defs.embedding(resolver=_resolve) if defs.embeddings else None
    notes = defs.notes + block.manifold.notes
    return CatalogEntry(name, block.manifold, block.structure, emb, notes, defs)


def entries() -> list[CatalogEntry]:
    return [load(n) for n in NAMES]
