"""Sparse binary feature extraction.

Three feature sets are supported:

* feature-set 2: the 1- to 10-gram character strings at the end of the
  sentence (Unicode scalar values, punctuation included);
* feature-set 3: the bag of tokens (pre-supplied morphemes when the example
  carries them, otherwise a whitespace split);
* feature-set 1: the union of the two.

Features are interned into a :class:`Vocabulary` that maps them to dense
contiguous ids. Vectors are binary (presence only), so the inner product of
two vectors is the size of their id-set intersection.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.sparse import csr_matrix

SUFFIX = "suffix"
TOKEN = "token"

DEFAULT_MAX_NGRAM = 10


class FeatureSet(IntEnum):
    FS1 = 1  # suffix n-grams plus tokens
    FS2 = 2  # suffix n-grams only
    FS3 = 3  # tokens only


@dataclass(frozen=True)
class Feature:
    """A namespaced feature atom; suffix and token kinds never collide."""

    kind: str
    text: str

    def __post_init__(self):
        if self.kind not in (SUFFIX, TOKEN):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if not self.text:
            raise ValueError("feature text must be non-empty")

    @property
    def n(self) -> int | None:
        """Character length for suffix features, None for token features."""
        return len(self.text) if self.kind == SUFFIX else None

    def sort_key(self):
        return (self.kind, self.text)


def tokenize(sentence: str) -> list[str]:
    """Default tokenizer: split on Unicode whitespace, dropping empties."""
    return sentence.split()


def suffix_ngrams(sentence: str, max_n: int = DEFAULT_MAX_NGRAM) -> set[Feature]:
    """All sentence-final character n-grams with 1 <= n <= min(max_n, length)."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    return {
        Feature(SUFFIX, sentence[-n:])
        for n in range(1, min(max_n, len(sentence)) + 1)
    }


def example_features(example, mode: FeatureSet, tokenizer=None,
                     max_n: int = DEFAULT_MAX_NGRAM) -> set[Feature]:
    """The raw (un-interned) feature set of one example under a feature set."""
    mode = FeatureSet(mode)
    feats: set[Feature] = set()
    if mode in (FeatureSet.FS1, FeatureSet.FS2):
        feats |= suffix_ngrams(example.sentence, max_n)
    if mode in (FeatureSet.FS1, FeatureSet.FS3):
        if example.tokens is not None:
            tokens = example.tokens
        else:
            tokens = (tokenizer or tokenize)(example.sentence)
        feats |= {Feature(TOKEN, tok) for tok in tokens}
    return feats


class Vocabulary:
    """Bijective feature <-> dense id map; ids are contiguous from 0.

    Construction is single-writer; once frozen the vocabulary is immutable
    and freely shareable.
    """

    def __init__(self, features=()):
        self._ids: dict[Feature, int] = {}
        self._features: list[Feature] = []
        self._frozen = False
        for feat in features:
            self.intern(feat)

    @classmethod
    def from_dataset(cls, dataset, mode: FeatureSet, tokenizer=None,
                     max_n: int = DEFAULT_MAX_NGRAM) -> "Vocabulary":
        """Canonical training vocabulary: every feature in the dataset,
        interned in sorted order (invariant to example order), then frozen."""
        feats: set[Feature] = set()
        for ex in dataset:
            feats |= example_features(ex, mode, tokenizer, max_n)
        vocab = cls(sorted(feats, key=Feature.sort_key))
        vocab.freeze()
        return vocab

    def __len__(self):
        return len(self._features)

    def __iter__(self):
        return iter(self._features)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self):
        self._frozen = True

    def intern(self, feature: Feature) -> int:
        fid = self._ids.get(feature)
        if fid is not None:
            return fid
        if self._frozen:
            raise RuntimeError("cannot intern into a frozen vocabulary")
        fid = len(self._features)
        self._ids[feature] = fid
        self._features.append(feature)
        return fid

    def lookup(self, feature: Feature) -> int | None:
        return self._ids.get(feature)

    def feature(self, fid: int) -> Feature:
        return self._features[fid]

    def to_list(self) -> list[list[str]]:
        return [[f.kind, f.text] for f in self._features]

    @classmethod
    def from_list(cls, items) -> "Vocabulary":
        vocab = cls(Feature(kind, text) for kind, text in items)
        vocab.freeze()
        return vocab


class FeatureVector:
    """Sorted, duplicate-free set of feature ids (binary-valued)."""

    __slots__ = ("ids", "_idset")

    def __init__(self, ids=()):
        self.ids: tuple[int, ...] = tuple(sorted(set(ids)))
        self._idset = frozenset(self.ids)

    def dot(self, other: "FeatureVector") -> int:
        """Inner product of two binary vectors: |intersection of id sets|."""
        return len(self._idset & other._idset)

    def __len__(self):
        return len(self.ids)

    def __contains__(self, fid):
        return fid in self._idset

    def __eq__(self, other):
        return isinstance(other, FeatureVector) and self.ids == other.ids

    def __hash__(self):
        return hash(self.ids)

    def __repr__(self):
        return f"FeatureVector({list(self.ids)})"


def extract(example, mode: FeatureSet, vocab: Vocabulary, frozen: bool = False,
            tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM) -> FeatureVector:
    """Feature vector of an example against a vocabulary.

    With ``frozen=True`` (prediction time) unseen features are silently
    dropped; otherwise they are interned into ``vocab``.
    """
    feats = example_features(example, mode, tokenizer, max_n)
    if frozen:
        ids = [fid for f in feats if (fid := vocab.lookup(f)) is not None]
    else:
        # sorted interning keeps assigned ids independent of hash seeds
        ids = [vocab.intern(f) for f in sorted(feats, key=Feature.sort_key)]
    return FeatureVector(ids)


def to_csr(vectors, n_cols: int) -> csr_matrix:
    """Stack binary feature vectors into a scipy CSR matrix (float64 data)."""
    indptr = [0]
    indices: list[int] = []
    for vec in vectors:
        indices.extend(vec.ids)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    return csr_matrix(
        (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, n_cols),
    )
