"""CoNLL-U reading, tree validation and writing.

Only the columns the pipeline needs are retained (FORM, UPOS, HEAD, DEPREL
and MISC).  Multi-word token ranges (``1-2``) and empty nodes (``1.1``) are
skipped.  A ``_`` in the HEAD column is an error: everything downstream
needs a full parse.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Iterable

__all__ = [
    "ConlluError",
    "TreeError",
    "Token",
    "Sentence",
    "DependencyTree",
    "parse_conllu",
    "read_conllu",
    "validate_tree",
    "serialize_conllu",
    "write_conllu",
]

ROOT = 0
N_COLUMNS = 10


class ConlluError(ValueError):
    """Malformed CoNLL-U input."""


class TreeError(ValueError):
    """Head pointers do not form a single-rooted tree."""


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    upos: str
    head: int
    deprel: str
    lang: str = ""
    is_entity: bool = False
    misc: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.index < 1:
            raise ConlluError(f"token index must be >= 1, got {self.index}")
        if self.head < 0:
            raise ConlluError(f"head must be >= 0, got {self.head}")
        if self.head == self.index:
            raise ConlluError(f"token {self.index} is its own head")
        if not self.upos:
            raise ConlluError(f"token {self.index} has empty UPOS")

    def misc_get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.misc:
            if k == key:
                return v
        return default

    def with_misc(self, key: str, value: str) -> "Token":
        """Copy of the token with MISC ``key`` set (replacing any old value)."""
        items = [(k, v) for k, v in self.misc if k != key]
        items.append((key, value))
        return replace(self, misc=tuple(items))

    @property
    def entity_tag(self) -> str:
        """IOB2 tag stored in MISC ``Entity`` (``O`` when absent)."""
        return self.misc_get("Entity", "O")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]
    lang: str = ""
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.tokens:
            raise ConlluError(f"sentence {self.id!r} has no tokens")
        for i, tok in enumerate(self.tokens, start=1):
            if tok.index != i:
                raise ConlluError(
                    f"sentence {self.id!r}: token indices must be 1..n, "
                    f"found {tok.index} at position {i}")
            if tok.head > len(self.tokens):
                raise ConlluError(
                    f"sentence {self.id!r}: head {tok.head} of token {i} out of range")

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def upos(self) -> list[str]:
        return [t.upos for t in self.tokens]

    @property
    def entity_tags(self) -> list[str]:
        return [t.entity_tag for t in self.tokens]


@dataclass(frozen=True)
class DependencyTree:
    """Parent array over 1-based token indices; ``parent[i-1]`` is 0 at the root."""

    parent: tuple[int, ...]
    root: int

    @property
    def n(self) -> int:
        return len(self.parent)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected (head, dependent) pairs, root excluded."""
        return [(h, d) for d, h in enumerate(self.parent, start=1) if h != ROOT]

    def depth(self, i: int) -> int:
        d = 0
        while self.parent[i - 1] != ROOT:
            i = self.parent[i - 1]
            d += 1
        return d


def _parse_misc(col: str) -> tuple[tuple[str, str], ...]:
    if col == "_" or not col:
        return ()
    items = []
    for part in col.split("|"):
        k, sep, v = part.partition("=")
        items.append((k, v if sep else ""))
    return tuple(items)


def _format_misc(misc: tuple[tuple[str, str], ...]) -> str:
    if not misc:
        return "_"
    return "|".join(f"{k}={v}" if v != "" else k for k, v in misc)


def _entity_flag(misc, cols, entity_column):
    if entity_column is None:
        for k, v in misc:
            if k == "Entity":
                return v != "O"
        return False
    value = cols[entity_column]
    return value not in ("O", "_", "")


def _build_sentence(lines, block_no, default_lang, entity_column):
    comments = []
    sent_id = None
    lang = default_lang
    rows = []
    for lineno, line in lines:
        if line.startswith("#"):
            comments.append(line)
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            if sep:
                key = key.strip()
                if key == "sent_id":
                    sent_id = value.strip()
                elif key == "lang":
                    lang = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != N_COLUMNS:
            raise ConlluError(f"line {lineno}: expected {N_COLUMNS} columns, got {len(cols)}")
        tid = cols[0]
        if "-" in tid or "." in tid:
            continue
        rows.append((lineno, cols))

    if not rows:
        raise ConlluError(f"block {block_no} has no token lines")

    tokens = []
    n = len(rows)
    for lineno, cols in rows:
        try:
            index = int(cols[0])
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer ID {cols[0]!r}") from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer HEAD {cols[6]!r}") from None
        if head < 0 or head > n:
            raise ConlluError(f"line {lineno}: HEAD {head} out of range 0..{n}")
        misc = _parse_misc(cols[9])
        tok_lang = lang
        for k, v in misc:
            if k == "CSLang":
                tok_lang = v
        try:
            tokens.append(Token(
                index=index, form=cols[1], upos=cols[3], head=head, deprel=cols[7],
                lang=tok_lang, is_entity=_entity_flag(misc, cols, entity_column), misc=misc,
            ))
        except ConlluError as e:
            raise ConlluError(f"line {lineno}: {e}") from None

    if sent_id is None:
        sent_id = f"s{block_no}"
    return Sentence(id=sent_id, tokens=tuple(tokens), lang=lang, comments=tuple(comments))


def parse_conllu(text: str | bytes, lang: str = "", entity_column: int | None = None) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    ``entity_column`` selects a 0-based column holding IOB2 tags; by default
    the MISC key ``Entity`` is consulted.  A ``# lang = xx`` comment overrides
    ``lang`` for its sentence, and a token's MISC ``CSLang`` overrides it for
    that token.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if text.startswith("﻿"):
        text = text[1:]

    sentences: list[Sentence] = []
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if line.strip() == "":
            if block:
                sentences.append(_build_sentence(block, len(sentences) + 1, lang, entity_column))
                block = []
            continue
        block.append((lineno, line))
    if block:
        sentences.append(_build_sentence(block, len(sentences) + 1, lang, entity_column))

    if text.strip() and not sentences:
        raise ConlluError("non-empty input contains no sentences")
    return sentences


def read_conllu(path, lang: str = "", entity_column: int | None = None) -> list[Sentence]:
    with open(path, "rb") as f:
        return parse_conllu(f.read(), lang=lang, entity_column=entity_column)


def validate_tree(s: Sentence) -> DependencyTree:
    """Check that the head pointers of ``s`` form a tree and return it.

    Each token's chain of heads has to reach the single root without
    revisiting a token.
    """
    parent = tuple(s.heads)
    n = len(parent)
    roots = [i for i, h in enumerate(parent, start=1) if h == ROOT]
    if len(roots) != 1:
        raise TreeError(f"sentence {s.id!r}: expected exactly one root, found {len(roots)}")
    for h in parent:
        if h < 0 or h > n:
            raise TreeError(f"sentence {s.id!r}: head {h} out of range")

    # 0 = unvisited, 1 = on current path, 2 = known to reach root
    state = [0] * (n + 1)
    state[ROOT] = 2
    for start in range(1, n + 1):
        path = []
        i = start
        while state[i] == 0:
            state[i] = 1
            path.append(i)
            i = parent[i - 1]
        if state[i] == 1:
            raise TreeError(f"sentence {s.id!r}: cycle through token {i}")
        for j in path:
            state[j] = 2
    return DependencyTree(parent=parent, root=roots[0])


def serialize_conllu(sentences: Iterable[Sentence]) -> bytes:
    """Write sentences as CoNLL-U (UTF-8).

    Columns not retained on parse are written as ``_``.  Tokens whose
    language differs from the sentence language carry ``CSLang=<code>``
    in MISC.
    """
    out = io.StringIO()
    for s in sentences:
        out.write(f"# sent_id = {s.id}\n")
        if s.lang:
            out.write(f"# lang = {s.lang}\n")
        for t in s.tokens:
            misc = t.misc
            if t.lang and t.lang != s.lang:
                misc = t.with_misc("CSLang", t.lang).misc
            cols = [str(t.index), t.form, "_", t.upos, "_", "_",
                    str(t.head), t.deprel, "_", _format_misc(misc)]
            out.write("\t".join(cols) + "\n")
        out.write("\n")
    return out.getvalue().encode("utf-8")


def write_conllu(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "wb") as f:
        f.write(serialize_conllu(sentences))
