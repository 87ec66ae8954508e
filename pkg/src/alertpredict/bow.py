"""Bag-of-words model over alert attributes.

Every alert is flattened into word tokens: the four octets of each IP
address count as four separate words, ports become their decimal strings,
numeric signature IDs stay whole, and text signatures / categories are
split into lowercase words.  The vocabulary is the ordered set of unique
tokens seen in training alerts; count vectors over that vocabulary feed
the clustering stage.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import Alert, AlertLog

# words are split on whitespace, dashes and dots; no token may contain them
_WORD_SPLIT_RE = re.compile(r"[\s\-.]+")
_FORBIDDEN_IN_TOKEN = re.compile(r"[\s\-.]")


def _signature_tokens(signature: str) -> list[str]:
    s = signature.strip()
    if s.isascii() and s.isdigit():
        return [s]
    return [w for w in _WORD_SPLIT_RE.split(s.lower()) if w]


def _category_tokens(category: str) -> list[str]:
    return [w for w in _WORD_SPLIT_RE.split(category.lower()) if w]


def _octet_tokens(ip: str) -> list[str]:
    return [str(int(part)) for part in ip.split(".")]


def tokenize_alert(alert: Alert) -> list[str]:
    """Flatten one alert into its BoW tokens, in a fixed order.

    Order: src IP octets, src port (if any), dst IP octets, dst port (if
    any), signature token(s), category words.  Octet tokens are decimal
    strings without leading zeros and are not positional: the same octet
    value in src and dst maps to the same vocabulary entry.
    """
    tokens = _octet_tokens(alert.src_ip)
    if alert.src_port is not None:
        tokens.append(str(alert.src_port))
    tokens.extend(_octet_tokens(alert.dst_ip))
    if alert.dst_port is not None:
        tokens.append(str(alert.dst_port))
    tokens.extend(_signature_tokens(alert.signature))
    tokens.extend(_category_tokens(alert.category))
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Ordered unique token list with its inverse index."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        idx: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if not tok:
                raise ValueError("vocabulary tokens must be non-empty")
            if _FORBIDDEN_IN_TOKEN.search(tok):
                raise ValueError(f"token {tok!r} contains a separator character")
            if tok in idx:
                raise ValueError(f"duplicate token {tok!r}")
            idx[tok] = i
        object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"tokens": list(self.tokens)}, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(tuple(obj["tokens"]))


def build_vocabulary(log: AlertLog) -> Vocabulary:
    """Collect unique tokens over all alerts, ordered by first appearance."""
    if len(log) == 0:
        raise ValueError("cannot build a vocabulary from an empty alert log")
    ordered: dict[str, None] = {}
    for alert in log:
        for tok in tokenize_alert(alert):
            ordered.setdefault(tok, None)
    return Vocabulary(tuple(ordered))


@dataclass(frozen=True)
class CountVector:
    """Token counts for one alert plus the out-of-vocabulary tally."""

    counts: np.ndarray
    oov: int


def vectorize(alert: Alert, vocab: Vocabulary, binary: bool = False) -> CountVector:
    """Count the alert's tokens against the vocabulary.

    Tokens missing from the vocabulary are dropped and tallied in `oov`,
    so counts.sum() + oov == len(tokenize_alert(alert)).  With binary=True
    counts are clamped to presence (0/1); the oov tally still counts
    occurrences.
    """
    if len(vocab) == 0:
        raise ValueError("vocabulary must be non-empty")
    counts = np.zeros(len(vocab), dtype=np.int64)
    oov = 0
    for tok in tokenize_alert(alert):
        pos = vocab.index.get(tok)
        if pos is None:
            oov += 1
        else:
            counts[pos] += 1
    if binary:
        counts = (counts > 0).astype(np.int64)
    return CountVector(counts=counts, oov=oov)


def count_matrix(log: AlertLog, vocab: Vocabulary, binary: bool = False) -> np.ndarray:
    """Stack vectorize() counts for a whole log into an (n, |V|) matrix."""
    mat = np.zeros((len(log), len(vocab)), dtype=np.float64)
    for i, alert in enumerate(log):
        mat[i] = vectorize(alert, vocab, binary=binary).counts
    return mat
