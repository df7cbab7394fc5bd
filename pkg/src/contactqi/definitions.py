"""Reading and writing the section-based manifold definition format.

Example::

    # comment lines are kept as notes
    [manifold] name=m2 dim=3 coords=x,y,z domain=y:(1,2) z:(-inf,inf)!0
    [frame] orthonormal=true
    f(1)=(0, 1, 0)
    f(2)=(2*y*z^2, 0, z^2)
    f(3)=(1, 0, 0)
    [structure]
    xi=(2*y*z^2, 0, z^2)
    eta=(0, 0, 1/z^2)
    phi(1,2)=1

Entries are ``key=value``; several may share a line. Indices are 1-based,
unspecified tensor entries are 0 and ``g(i,j)`` fills ``g(j,i)`` too. An
``[embedding]`` section belongs to the manifold block it appears in (the
source) and names its target, looked up first in the same file and then in
the built-in catalog.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .expr import Const, Expr, ExprError, format_number, parse, to_text
from .manifold import ChartManifold, Interval, ManifoldError
from .qisom import Embedding
from .structure import ContactStructure

SECTIONS = ("manifold", "metric", "frame", "structure", "embedding")

_KEY_RE = re.compile(r"(?:^|(?<=\s))([A-Za-z_][A-Za-z0-9_]*(?:\(\s*\d+\s*(?:,\s*\d+\s*)*\))?)\s*=")
_SECTION_RE = re.compile(r"^\s*\[([A-Za-z_]+)\]\s*(.*)$")
_INDEXED_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)$")
_INTERVAL_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*):\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)((?:![^!\s]+)*)$")


class DefinitionError(ValueError):
    def __init__(self, message: str, source: str = "<text>", line: int | None = None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class ManifoldBlock:
    manifold: ChartManifold
    structure: ContactStructure | None = None


@dataclass
class EmbeddingBlock:
    source: str
    target: str
    F: tuple[Expr, ...]
    J: tuple[tuple[Expr, ...], ...]
    A: float
    B: float
    D: float | None


@dataclass
class DefinitionSet:
    blocks: dict[str, ManifoldBlock] = field(default_factory=dict)
    embeddings: list[EmbeddingBlock] = field(default_factory=list)
    notes: tuple[str, ...] = ()

    def manifold(self, name: str | None = None) -> ManifoldBlock:
        if name is None:
            return next(iter(self.blocks.values()))
        return self.blocks[name]

    def embedding(self, index: int = 0, resolver=None) -> Embedding:
        if not self.embeddings:
            raise DefinitionError("no [embedding] section")
        eb = self.embeddings[index]
        src = self.blocks[eb.source]
        if eb.target in self.blocks:
            tgt = self.blocks[eb.target]
        elif resolver is not None:
            tgt = resolver(eb.target)
        else:
            raise DefinitionError(f"embedding target {eb.target!r} is not defined")
        return Embedding(src.manifold, tgt.manifold, eb.F, eb.J, eb.A, eb.B, eb.D,
                         src.structure, tgt.structure)


class _Src(str):
    """A value string remembering the line it came from."""

    line: int | None = None

    @classmethod
    def at(cls, text: str, line: int) -> "_Src":
        out = cls(text)
        out.line = line
        return out


def _real(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(t)


def _split_top(text: str) -> list[str]:
    """Split on commas not nested in parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def _tuple_value(text: str) -> list[str]:
    t = text.strip()
    if not (t.startswith("(") and t.endswith(")")):
        raise ValueError(f"expected a parenthesised tuple, got {text!r}")
    return [_Src.at(part, getattr(text, "line", None)) for part in _split_top(t[1:-1])]


def _entries(text: str):
    keys = list(_KEY_RE.finditer(text))
    if not keys:
        if text.strip():
            raise ValueError(f"expected key=value, got {text.strip()!r}")
        return []
    if text[:keys[0].start()].strip():
        raise ValueError(f"unexpected text {text[:keys[0].start()].strip()!r}")
    out = []
    for i, m in enumerate(keys):
        end = keys[i + 1].start() if i + 1 < len(keys) else len(text)
        out.append((re.sub(r"\s+", "", m.group(1)), text[m.end():end].strip()))
    return out


class _Block:
    def __init__(self, line):
        self.line = line
        self.header: dict[str, str] = {}
        self.metric: dict[tuple[int, int], str] = {}
        self.frame: dict[int, list[str]] = {}
        self.frame_seen = False
        self.orthonormal = None
        self.structure: dict = {}
        self.embeddings: list[dict] = []


def parse_definitions(text: str, source: str = "<text>") -> DefinitionSet:
    blocks: list[_Block] = []
    notes: list[str] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if raw.lstrip().startswith("#"):
            note = raw.lstrip()[1:].strip()
            (blocks[-1].header.setdefault("_notes", []) if blocks else notes).append(note)
            continue
        if not line.strip():
            continue
        m = _SECTION_RE.match(line)
        rest = line
        if m:
            section = m.group(1).lower()
            rest = m.group(2)
            if section not in SECTIONS:
                raise DefinitionError(f"unknown section [{section}]", source, lineno)
            if section == "manifold":
                blocks.append(_Block(lineno))
            elif not blocks:
                raise DefinitionError(f"[{section}] before any [manifold]", source, lineno)
            if section == "frame":
                blocks[-1].frame_seen = True
            if section == "embedding":
                blocks[-1].embeddings.append({"_line": lineno})
        elif section is None:
            raise DefinitionError("entry outside any section", source, lineno)
        try:
            entries = _entries(rest)
        except ValueError as exc:
            raise DefinitionError(str(exc), source, lineno) from None
        blk = blocks[-1]
        for key, value in entries:
            try:
                _store(blk, section, key, _Src.at(value, lineno))
            except ValueError as exc:
                raise DefinitionError(str(exc), source, lineno) from None
    result = DefinitionSet(notes=tuple(notes))
    for blk in blocks:
        try:
            mb, embs = _build(blk, source)
        except (ExprError, ManifoldError, ValueError) as exc:
            if isinstance(exc, DefinitionError):
                raise
            raise DefinitionError(str(exc), source, blk.line) from None
        name = mb.manifold.name
        if name in result.blocks:
            raise DefinitionError(f"manifold {name!r} defined twice", source, blk.line)
        result.blocks[name] = mb
        result.embeddings.extend(embs)
    return result


def _index(key: str, name: str, arity: int) -> tuple[int, ...]:
    m = _INDEXED_RE.match(key)
    if not m or m.group(1) != name:
        raise ValueError(f"bad key {key!r}")
    idx = tuple(int(g) for g in m.groups()[1:] if g is not None)
    if len(idx) != arity:
        raise ValueError(f"{key!r} needs {arity} indices")
    return idx


def _store(blk: _Block, section: str, key: str, value: str) -> None:
    if section == "manifold":
        if key not in ("name", "dim", "coords", "domain"):
            raise ValueError(f"unknown [manifold] key {key!r}")
        blk.header[key] = value
    elif section == "metric":
        i, j = _index(key, "g", 2)
        blk.metric[(i, j)] = value
    elif section == "frame":
        if key == "orthonormal":
            blk.orthonormal = value.strip().lower()
        else:
            (i,) = _index(key, "f", 1)
            blk.frame[i] = _tuple_value(value)
    elif section == "structure":
        if key in ("xi", "eta"):
            blk.structure[key] = _tuple_value(value)
        else:
            blk.structure.setdefault("phi", {})[_index(key, "phi", 2)] = value
    elif section == "embedding":
        emb = blk.embeddings[-1]
        if key in ("target", "A", "B", "D"):
            emb[key] = value
        elif key == "F":
            emb["F"] = _tuple_value(value)
        else:
            emb.setdefault("J", {})[_index(key, "J", 2)] = value
    else:  # pragma: no cover
        raise ValueError(section)


def _parse_domain(text: str, coords: list[str]) -> tuple[Interval, ...]:
    ivs = {c: Interval() for c in coords}
    for tok in text.split():
        m = _INTERVAL_RE.match(tok)
        if not m:
            raise ValueError(f"bad domain entry {tok!r}")
        c = m.group(1)
        if c not in ivs:
            raise ValueError(f"domain names unknown coordinate {c!r}")
        excl = tuple(_real(v) for v in m.group(4).split("!")[1:])
        lo, hi = _real(m.group(2)), _real(m.group(3))
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError(f"bad interval for {c!r}")
        ivs[c] = Interval(lo, hi, excl)
    return tuple(ivs[c] for c in coords)


def _check_index(idx, d, what):
    if any(i < 1 or i > d for i in idx):
        raise ValueError(f"{what} index {idx} out of range 1..{d}")


def _build(blk: _Block, source: str):
    h = blk.header
    for req in ("name", "dim", "coords"):
        if req not in h:
            raise DefinitionError(f"[manifold] is missing {req}=", source, blk.line)
    coords = [c.strip() for c in h["coords"].split(",")]
    d = int(h["dim"])
    if d != len(coords):
        raise ValueError(f"dim={d} but {len(coords)} coordinates given")
    domain = _parse_domain(h.get("domain", ""), coords)

    def P(text):
        try:
            return parse(text, coords)
        except ExprError as exc:
            raise DefinitionError(f"in {str(text).strip()!r}: {exc}", source,
                                  getattr(text, "line", None) or blk.line) from exc

    metric = frame = None
    if blk.frame_seen:
        if blk.metric:
            raise ValueError("give either [metric] or [frame], not both")
        if blk.orthonormal not in ("true", None):
            raise ValueError("only orthonormal=true frames are supported")
        cols = []
        for i in range(1, d + 1):
            if i not in blk.frame:
                raise ValueError(f"frame vector f({i}) missing")
            if len(blk.frame[i]) != d:
                raise ValueError(f"f({i}) needs {d} components")
            cols.append([P(s) for s in blk.frame[i]])
        if set(blk.frame) - set(range(1, d + 1)):
            raise ValueError("frame index out of range")
        frame = tuple(tuple(cols[c][i] for c in range(d)) for i in range(d))
    else:
        g = [[Const(0.0)] * d for _ in range(d)]
        for (i, j), s in blk.metric.items():
            _check_index((i, j), d, "metric")
            e = P(s)
            if (j, i) in blk.metric and (j, i) != (i, j) and i > j:
                other = P(blk.metric[(j, i)])
                if to_text(other) != to_text(e):
                    raise ValueError(f"g({j},{i}) and g({i},{j}) differ")
            g[i - 1][j - 1] = e
            g[j - 1][i - 1] = e
        metric = tuple(tuple(row) for row in g)
    notes = tuple(h.get("_notes", []))
    M = ChartManifold(h["name"].strip(), tuple(coords), domain, metric, frame, notes)

    S = None
    if blk.structure:
        for req in ("xi", "eta"):
            if req not in blk.structure:
                raise ValueError(f"[structure] is missing {req}=")
            if len(blk.structure[req]) != d:
                raise ValueError(f"{req} needs {d} components")
        phi = [[Const(0.0)] * d for _ in range(d)]
        for (i, j), s in blk.structure.get("phi", {}).items():
            _check_index((i, j), d, "phi")
            phi[i - 1][j - 1] = P(s)
        S = ContactStructure(M, tuple(tuple(r) for r in phi),
                             tuple(P(s) for s in blk.structure["xi"]),
                             tuple(P(s) for s in blk.structure["eta"]))

    embs = []
    for emb in blk.embeddings:
        for req in ("target", "F", "A", "B"):
            if req not in emb:
                raise DefinitionError(f"[embedding] is missing {req}=", source, emb["_line"])
        if len(emb["F"]) != d:
            raise ValueError(f"F needs {d} components")
        J = [[Const(0.0)] * d for _ in range(d)]
        for (i, j), s in emb.get("J", {}).items():
            _check_index((i, j), d, "J")
            J[i - 1][j - 1] = P(s)
        embs.append(EmbeddingBlock(M.name, emb["target"].strip(), tuple(P(s) for s in emb["F"]),
                                   tuple(tuple(r) for r in J), _real(emb["A"]), _real(emb["B"]),
                                   _real(emb["D"]) if "D" in emb else None))
    return ManifoldBlock(M, S), embs


# ---------------------------------------------------------------------------
# Printing


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format_number(v)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def format_definitions(defs: DefinitionSet) -> str:
    lines = [f"# {n}" if n else "#" for n in defs.notes]
    for name, blk in defs.blocks.items():
        M = blk.manifold
        d = M.dim
        lines.append("[manifold]")
        lines.extend(f"# {n}" if n else "#" for n in M.notes)
        lines.append(f"name={M.name}")
        lines.append(f"dim={d}")
        lines.append("coords=" + ",".join(M.coords))
        dom = []
        for c, iv in zip(M.coords, M.domain):
            excl = "".join(f"!{_num(v)}" for v in iv.exclude)
            dom.append(f"{c}:({_num(iv.lo)},{_num(iv.hi)}){excl}")
        lines.append("domain=" + " ".join(dom))
        if M.frame_spec:
            lines.append("[frame]")
            lines.append("orthonormal=true")
            for c in range(d):
                comps = ", ".join(to_text(M.frame[i][c]) for i in range(d))
                lines.append(f"f({c + 1})=({comps})")
        else:
            lines.append("[metric]")
            for i in range(d):
                for j in range(i, d):
                    if not _is_zero(M.metric[i][j]):
                        lines.append(f"g({i + 1},{j + 1})={to_text(M.metric[i][j])}")
        if blk.structure is not None:
            S = blk.structure
            lines.append("[structure]")
            lines.append("xi=(" + ", ".join(to_text(e) for e in S.xi) + ")")
            lines.append("eta=(" + ", ".join(to_text(e) for e in S.eta) + ")")
            for i in range(d):
                for j in range(d):
                    if not _is_zero(S.phi[i][j]):
                        lines.append(f"phi({i + 1},{j + 1})={to_text(S.phi[i][j])}")
        for eb in defs.embeddings:
            if eb.source != name:
                continue
            lines.append("[embedding]")
            lines.append(f"target={eb.target}")
            lines.append("F=(" + ", ".join(to_text(e) for e in eb.F) + ")")
            for i in range(d):
                for j in range(d):
                    if not _is_zero(eb.J[i][j]):
                        lines.append(f"J({i + 1},{j + 1})={to_text(eb.J[i][j])}")
            lines.append(f"A={_num(eb.A)}")
            lines.append(f"B={_num(eb.B)}")
            if eb.D is not None:
                lines.append(f"D={_num(eb.D)}")
    return "\n".join(lines) + "\n"


def load_file(path: str | Path) -> DefinitionSet:
    path = Path(path)
    return parse_definitions(path.read_text(), str(path))
