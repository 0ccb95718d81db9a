"""k-nearest neighborhood classifier over sentence-final string match.

Similarity between two sentences is the length of their longest common
character suffix, capped at 10 to mirror the 1- to 10-gram feature range.
Classification takes the k most similar training sentences, additionally
admits every example tied with the k-th similarity, and returns the
majority label of that voting set. This only applies to feature-set 2;
no similarity is defined over token bags.
"""

from __future__ import annotations

from collections import Counter

from .corpus import Dataset

SIMILARITY_CAP = 10


def similarity(a: str, b: str) -> int:
    """Length of the longest common character suffix, capped at 10."""
    limit = min(len(a), len(b), SIMILARITY_CAP)
    n = 0
    while n < limit and a[-1 - n] == b[-1 - n]:
        n += 1
    return n


class KnnModel:
    """Training sentences with labels; immutable after construction."""

    def __init__(self, sentences, labels, k: int, label_counts=None):
        self.sentences = tuple(sentences)
        self.labels = tuple(labels)
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.sentences:
            raise ValueError("training set must be non-empty")
        if len(self.sentences) != len(self.labels):
            raise ValueError("sentences and labels must align")
        self.k = k
        self.label_counts = Counter(label_counts) if label_counts else Counter(self.labels)

    def predict(self, example) -> str:
        return classify_knn(self, example.sentence)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "sentences": list(self.sentences),
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, payload) -> "KnnModel":
        return cls(payload["sentences"], payload["labels"], payload["k"])


def train_knn(dataset: Dataset, k: int) -> KnnModel:
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    return KnnModel(
        (ex.sentence for ex in dataset),
        (ex.label for ex in dataset),
        k,
        dataset.label_counts,
    )


def classify_knn(model: KnnModel, sentence: str) -> str:
    """Majority vote among the k nearest training sentences plus all
    examples tied with the k-th similarity. Vote ties break by global
    training frequency, then lexicographic label order."""
    sims = [similarity(sentence, s) for s in model.sentences]
    k = min(model.k, len(sims))
    kth = sorted(sims, reverse=True)[k - 1]
    votes = Counter(
        lab for sim, lab in zip(sims, model.labels) if sim >= kth
    )
    return min(votes, key=lambda lab: (-votes[lab], -model.label_counts[lab], lab))
