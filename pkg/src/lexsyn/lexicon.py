"""Bilingual word lists in the MUSE text format (``src tgt`` per line)."""

from __future__ import annotations

import io
import unicodedata
from dataclasses import dataclass, field

import numpy as np

__all__ = ["LexiconError", "BilingualLexicon", "load_lexicon", "read_lexicon",
           "translate", "dump_lexicon"]


class LexiconError(ValueError):
    pass


def _norm(word: str, lowercase: bool) -> str:
    word = unicodedata.normalize("NFC", word)
    return word.lower() if lowercase else word


@dataclass(frozen=True)
class BilingualLexicon:
    source_lang: str
    target_lang: str
    entries: dict[str, tuple[str, ...]]
    lowercase: bool = False
    malformed: int = field(default=0, compare=False)

    def __post_init__(self):
        for word, targets in self.entries.items():
            if not targets:
                raise LexiconError(f"empty translation list for {word!r}")

    def __contains__(self, word: str) -> bool:
        return _norm(word, self.lowercase) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, word: str) -> tuple[str, ...] | None:
        return self.entries.get(_norm(word, self.lowercase))


def load_lexicon(stream, source_lang: str, target_lang: str, lowercase: bool = False) -> BilingualLexicon:
    """Build a lexicon from MUSE-formatted lines.

    ``stream`` may be text, bytes or a file-like object.  Repeated source
    words accumulate translations in file order (exact duplicates are
    kept once).  Lines with other than two fields are skipped and counted
    in ``malformed``; blank lines are ignored.
    """
    if isinstance(stream, bytes):
        stream = stream.decode("utf-8")
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    entries: dict[str, list[str]] = {}
    malformed = 0
    for line in stream:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 2:
            malformed += 1
            continue
        src, tgt = (_norm(w, lowercase) for w in fields)
        targets = entries.setdefault(src, [])
        if tgt not in targets:
            targets.append(tgt)

    if not entries:
        raise LexiconError(f"no usable entries for {source_lang}->{target_lang}")
    return BilingualLexicon(
        source_lang=source_lang,
        target_lang=target_lang,
        entries={k: tuple(v) for k, v in entries.items()},
        lowercase=lowercase,
        malformed=malformed,
    )


def read_lexicon(path, source_lang: str, target_lang: str, lowercase: bool = False) -> BilingualLexicon:
    with open(path, encoding="utf-8") as f:
        return load_lexicon(f, source_lang, target_lang, lowercase=lowercase)


def translate(lex: BilingualLexicon, word: str, rng: np.random.Generator) -> str | None:
    """Uniform draw over the translations of ``word``; None if absent.

    A single-translation word consumes no randomness.
    """
    targets = lex.get(word)
    if targets is None:
        return None
    if len(targets) == 1:
        return targets[0]
    return targets[int(rng.integers(len(targets)))]


def dump_lexicon(lex: BilingualLexicon) -> bytes:
    """MUSE text for ``lex``: one ``src tgt`` pair per line in entry order."""
    lines = [f"{src} {tgt}\n" for src, targets in lex.entries.items() for tgt in targets]
    return "".join(lines).encode("utf-8")
