"""Conditional maximum-entropy classifier.

The model assigns p(a|b) proportional to exp(sum of w[f,a] over features f
present in context b), one weight per (feature, label) pair. Training uses
generalized iterative scaling: each pass compares the empirical count of
every (feature, label) pair against its expectation under the current model
and moves the weight by log(empirical/expected)/C, where C is the largest
per-example feature count. The fitted distribution matches the empirical
feature expectations while maximizing conditional entropy.

Iteration stops when the largest count residual falls to tol * N or at
``max_iters``, whichever comes first; the model records which one fired.
A pair never observed in training drives its weight to -inf, and a feature
that perfectly predicts one label pushes weights toward +inf, so weights are
clamped to +-30 (with a warning) instead of failing.

Training canonicalizes the vocabulary and accumulates counts with
order-independent array reductions, so permuting the dataset yields
bit-identical weights. Trained models are immutable.
"""

from __future__ import annotations

import logging
from collections import Counter

import numpy as np

from .corpus import Dataset
from .features import (
    DEFAULT_MAX_NGRAM,
    FeatureSet,
    FeatureVector,
    Vocabulary,
    extract,
    to_csr,
)

logger = logging.getLogger(__name__)

WEIGHT_CLAMP = 30.0


class MaxEntModel:
    def __init__(self, vocab: Vocabulary, mode: FeatureSet, labels, weights,
                 label_counts, info=None, max_n: int = DEFAULT_MAX_NGRAM):
        self.vocab = vocab
        self.mode = FeatureSet(mode)
        self.labels: tuple[str, ...] = tuple(labels)
        self.weights = np.asarray(weights, dtype=np.float64)  # (|vocab|, |labels|)
        self.label_counts = Counter(label_counts)
        self.info = dict(info or {})
        self.max_n = max_n

    def predict(self, example, tokenizer=None) -> str:
        fv = extract(example, self.mode, self.vocab, frozen=True,
                     tokenizer=tokenizer, max_n=self.max_n)
        return classify_maxent(self, fv)[0]

    def to_dict(self) -> dict:
        return {
            "mode": int(self.mode),
            "max_n": self.max_n,
            "labels": list(self.labels),
            "label_counts": sorted(self.label_counts.items()),
            "vocab": self.vocab.to_list(),
            "weights": [[repr(float(w)) for w in row] for row in self.weights],
        }

    @classmethod
    def from_dict(cls, payload) -> "MaxEntModel":
        weights = np.array(
            [[float(w) for w in row] for row in payload["weights"]], dtype=np.float64
        )
        if weights.size == 0:
            weights = weights.reshape(0, len(payload["labels"]))
        return cls(
            Vocabulary.from_list(payload["vocab"]),
            FeatureSet(payload["mode"]),
            payload["labels"],
            weights,
            dict(payload["label_counts"]),
            max_n=payload["max_n"],
        )


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    scores = scores - scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def train_maxent(dataset: Dataset, mode: FeatureSet, tol: float = 1e-4,
                 max_iters: int = 1000, prior_variance: float | None = None,
                 tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM) -> MaxEntModel:
    """Fit the conditional exponential model by iterative scaling.

    ``tol`` bounds the final per-pair count residual at tol * N. With
    ``prior_variance`` set, a Gaussian penalty is applied instead (clamped
    gradient ascent); constraints are then deliberately not met exactly.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = len(dataset)
    vocab = Vocabulary.from_dataset(dataset, mode, tokenizer, max_n)
    labels = tuple(sorted(dataset.label_counts))
    label_index = {lab: i for i, lab in enumerate(labels)}
    n_feat, n_lab = len(vocab), len(labels)

    fvs = [extract(ex, mode, vocab, frozen=True, tokenizer=tokenizer, max_n=max_n)
           for ex in dataset]
    # canonical accumulation order: float sums, and therefore the fitted
    # weights, are bit-identical under any permutation of the dataset
    order = sorted(range(n), key=lambda i: (fvs[i].ids, dataset[i].label))
    X = to_csr([fvs[i] for i in order], n_feat)
    if n * n_feat <= (1 << 16):
        X = X.toarray()  # sparse overhead dwarfs tiny problems
    onehot = np.zeros((n, n_lab))
    for row, i in enumerate(order):
        onehot[row, label_index[dataset[i].label]] = 1.0
    empirical = X.T @ onehot  # (feature, label) co-occurrence counts
    cmax = int(X.sum(axis=1).max()) if n_feat else 0

    weights = np.zeros((n_feat, n_lab))
    info = {"iterations": 0, "converged": True, "stopped_by": "tol",
            "final_residual": 0.0, "clamped": False}
    if n_feat == 0 or cmax == 0:
        # no constraints: the entropy maximum is the uniform conditional
        return MaxEntModel(vocab, mode, labels, weights, dataset.label_counts,
                           info, max_n)

    unseen = empirical == 0.0
    step = 1.0 / cmax if prior_variance is None else 1.0 / (cmax * n)
    residual = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        probs = _softmax_rows(X @ weights)
        expected = X.T @ probs
        if prior_variance is None:
            residual = float(np.abs(empirical - expected).max())
            if residual <= tol * n:
                it -= 1
                break
            with np.errstate(divide="ignore"):
                update = np.log(np.maximum(empirical, 1e-300)) - np.log(
                    np.maximum(expected, 1e-300))
            update[unseen] = -np.inf
            weights = weights + update * step
        else:
            grad = empirical - expected - weights / prior_variance
            residual = float(np.abs(grad).max())
            if residual <= tol * n:
                it -= 1
                break
            weights = weights + grad * step
        np.clip(weights, -WEIGHT_CLAMP, WEIGHT_CLAMP, out=weights)
    converged = residual <= tol * n
    clamped = bool(np.any(np.abs(weights) >= WEIGHT_CLAMP))
    if clamped:
        logger.warning(
            "maxent weights clamped to +-%.0f (some feature-label pairs are "
            "deterministic in the training data)", WEIGHT_CLAMP)
    info = {
        "iterations": it,
        "converged": converged,
        "stopped_by": "tol" if converged else "max_iters",
        "final_residual": residual,
        "clamped": clamped,
    }
    return MaxEntModel(vocab, mode, labels, weights, dataset.label_counts, info, max_n)


def classify_maxent(model: MaxEntModel, fv: FeatureVector) -> tuple[str, dict[str, float]]:
    """Most probable label and the full normalized distribution.

    Argmax ties break by global training frequency, then lexicographically.
    An empty vector scores every label equally (the model has no bias
    weights), which yields the uniform distribution.
    """
    ids = [fid for fid in fv.ids if fid < model.weights.shape[0]]
    if ids:
        scores = model.weights[ids].sum(axis=0)
    else:
        scores = np.zeros(len(model.labels))
    probs = _softmax_rows(scores[None, :])[0]
    top = probs.max()
    candidates = [lab for lab, p in zip(model.labels, probs) if p == top]
    label = min(candidates, key=lambda lab: (-model.label_counts[lab], lab))
    return label, dict(zip(model.labels, probs.tolist()))


def expectation_residual(model: MaxEntModel, dataset: Dataset, tokenizer=None) -> float:
    """Largest |empirical - expected| feature-expectation rate over all
    (feature, label) pairs, measured on ``dataset``."""
    n = len(dataset)
    fvs = [extract(ex, model.mode, model.vocab, frozen=True, tokenizer=tokenizer,
                   max_n=model.max_n) for ex in dataset]
    X = to_csr(fvs, model.weights.shape[0])
    label_index = {lab: i for i, lab in enumerate(model.labels)}
    onehot = np.zeros((n, len(model.labels)))
    for i, ex in enumerate(dataset):
        onehot[i, label_index[ex.label]] = 1.0
    empirical = X.T @ onehot
    expected = X.T @ _softmax_rows(X @ model.weights)
    if empirical.size == 0:
        return 0.0
    return float(np.abs(empirical - expected).max() / n)
