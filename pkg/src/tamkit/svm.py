"""Soft-margin SVM with a polynomial kernel, plus one-vs-one multiclass voting.

The dual problem

    maximize   L(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    subject to 0 <= a_i <= C,  sum_i a_i y_i = 0

is solved by two-variable analytic coordinate updates on the maximal
KKT-violating pair, stopping when the violation drops below ``kkt_tol``.
The kernel is K(x, y) = (x.y + 1)^d; for binary vectors x.y is the size of
the feature-id intersection. The decision bias is

    b = -(max over negative examples of b_i + min over positive examples of b_i) / 2
    b_i = sum_j a_j y_j K(x_j, x_i)

with the extrema ranging over all training examples.

Multiclass data is handled pairwise: one binary classifier per unordered
label pair, each trained only on examples of its two labels, combined by
voting. Pairwise trainings are independent; trained models are immutable.
"""

from __future__ import annotations

from collections import Counter, OrderedDict
from itertools import combinations

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

KKT_TOL = 1e-3
UPDATE_EPS = 1e-12     # floor for the two-variable quadratic coefficient
ALPHA_FLOOR = 1e-12    # multipliers at or below this are treated as zero
GRAM_LIMIT = 4096      # precompute the full Gram matrix up to this many examples


class TrainingError(RuntimeError):
    """Binary training cannot proceed (e.g. a single-class problem)."""


class ConvergenceError(TrainingError):
    """Iteration cap hit before the KKT criterion; carries the best dual value."""

    def __init__(self, message, dual_value):
        super().__init__(message)
        self.dual_value = dual_value


def kernel(x: FeatureVector, y: FeatureVector, d: int) -> float:
    """(x.y + 1)^d for binary vectors: x.y is the id-set intersection size."""
    return float((x.dot(y) + 1) ** d)


class KernelCache:
    """Kernel rows computed on demand with a bounded LRU.

    Rows are rebuilt from the sparse example matrix when evicted, so results
    never depend on cache hits. Used when the full Gram matrix would be too
    large to precompute.
    """

    def __init__(self, X, d: int, capacity: int):
        self._X = X
        self._Xt = X.T.tocsc()
        self._d = d
        self.capacity = max(1, capacity)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        counts = self._X @ self._Xt[:, [i]]
        row = (counts.toarray().ravel() + 1.0) ** self._d
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


class _DenseGram:
    """Fully precomputed kernel matrix for problems that fit in memory."""

    def __init__(self, X, d: int):
        gram = (X @ X.T).toarray()
        self._K = (gram + 1.0) ** d

    def row(self, i: int) -> np.ndarray:
        return self._K[i]


def _dual_value(alpha: np.ndarray, grad: np.ndarray) -> float:
    # grad = Q a - 1, so a'Qa = a.(grad + 1) and L = sum(a) - a'Qa/2.
    return float(alpha.sum() - 0.5 * (alpha @ grad + alpha.sum()))


def _smo(kern, y: np.ndarray, C: float, kkt_tol: float, max_iter: int):
    """Maximal-violating-pair SMO. Returns (alpha, grad, iterations)."""
    l = len(y)
    alpha = np.zeros(l)
    grad = -np.ones(l)  # gradient of (1/2 a'Qa - sum a), Q_ij = y_i y_j K_ij
    pos = y > 0
    for it in range(max_iter):
        minus_yg = -y * grad
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0))
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        i = up_idx[np.argmax(minus_yg[up_idx])]
        j = low_idx[np.argmin(minus_yg[low_idx])]
        if minus_yg[i] - minus_yg[j] <= kkt_tol:
            return alpha, grad, it
        Ki = kern.row(i)
        Kj = kern.row(j)
        Qi = (y[i] * y) * Ki
        Qj = (y[j] * y) * Kj
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = Ki[i] + Kj[j] + 2.0 * Qi[j]
            if quad <= 0.0:
                quad = UPDATE_EPS
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Ki[i] + Kj[j] - 2.0 * Qi[j]
            if quad <= 0.0:
                quad = UPDATE_EPS
            delta = (grad[i] - grad[j]) / quad
            asum = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if asum > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = asum - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = asum
            if asum > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = asum - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = asum
        grad += Qi * (alpha[i] - old_i) + Qj * (alpha[j] - old_j)
    raise ConvergenceError(
        f"SMO did not reach KKT tolerance {kkt_tol} in {max_iter} iterations",
        dual_value=_dual_value(alpha, grad),
    )


def kkt_violation(u: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float) -> float:
    """Maximal working-set KKT violation (zero iff some bias makes every
    example optimal). ``u`` is the bias-free decision value per example."""
    score = y - u
    pos = y > 0
    up = (pos & (alpha < C)) | (~pos & (alpha > 0))
    low = (~pos & (alpha < C)) | (pos & (alpha > 0))
    return float(max(0.0, score[up].max() - score[low].min()))


def kkt_feasible_bias(u: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float) -> float:
    """Midpoint of the bias interval implied by the optimality conditions."""
    score = y - u
    pos = y > 0
    up = (pos & (alpha < C)) | (~pos & (alpha > 0))
    low = (~pos & (alpha < C)) | (pos & (alpha > 0))
    return float((score[up].max() + score[low].min()) / 2.0)


class BinarySvmModel:
    """Support vectors with multipliers, labels, bias, and kernel settings."""

    def __init__(self, support_vectors, sv_labels, sv_alpha, b: float, C: float,
                 d: int, info=None):
        self.support_vectors: tuple[FeatureVector, ...] = tuple(support_vectors)
        self.sv_labels: tuple[int, ...] = tuple(int(v) for v in sv_labels)
        self.sv_alpha: tuple[float, ...] = tuple(float(a) for a in sv_alpha)
        self.b = float(b)
        self.C = float(C)
        self.d = int(d)
        self.info = dict(info or {})

    def to_dict(self) -> dict:
        return {
            "sv_ids": [list(v.ids) for v in self.support_vectors],
            "y": list(self.sv_labels),
            "alpha": list(self.sv_alpha),
            "b": self.b,
            "C": self.C,
            "d": self.d,
        }

    @classmethod
    def from_dict(cls, payload) -> "BinarySvmModel":
        return cls(
            (FeatureVector(ids) for ids in payload["sv_ids"]),
            payload["y"],
            payload["alpha"],
            payload["b"],
            payload["C"],
            payload["d"],
        )


def train_binary_svm(examples, C: float = 1.0, d: int = 1,
                     kkt_tol: float = KKT_TOL, max_iter: int | None = None,
                     gram_limit: int = GRAM_LIMIT,
                     cache_rows: int | None = None) -> BinarySvmModel:
    """Solve the dual for a two-class problem.

    ``examples`` is a sequence of (FeatureVector, +-1) pairs; both classes
    must be present. Raises ConvergenceError if the iteration cap
    (default 100 per example) is hit first.
    """
    vectors = [fv for fv, _ in examples]
    y = np.array([lab for _, lab in examples], dtype=np.float64)
    l = len(vectors)
    if l == 0:
        raise TrainingError("no training examples")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise TrainingError("labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise TrainingError("both classes must be present")
    if C <= 0:
        raise TrainingError("C must be positive")
    if max_iter is None:
        max_iter = 100 * l

    n_cols = max((v.ids[-1] + 1 for v in vectors if v.ids), default=1)
    X = to_csr(vectors, n_cols)
    if l <= gram_limit:
        kern = _DenseGram(X, d)
    else:
        if cache_rows is None:
            # keep the cached rows around 64 MB
            cache_rows = max(64, (8 << 20) // max(l, 1))
        kern = KernelCache(X, d, cache_rows)

    alpha, grad, n_iter = _smo(kern, y, C, kkt_tol, max_iter)

    # bias-free decision value of every training example, summed over the
    # multipliers that remain active
    active = np.flatnonzero(alpha > ALPHA_FLOOR)
    counts = (X @ X[active].T).toarray()
    u = ((counts + 1.0) ** d) @ (alpha[active] * y[active])
    b = -(u[y < 0].max() + u[y > 0].min()) / 2.0

    info = {
        "iterations": n_iter,
        "dual_value": _dual_value(alpha, grad),
        "kkt_violation": kkt_violation(u, y, alpha, C),
        "alpha": tuple(float(a) for a in alpha),
        "n_train": l,
    }
    return BinarySvmModel(
        (vectors[i] for i in active),
        (1 if y[i] > 0 else -1 for i in active),
        alpha[active],
        b,
        C,
        d,
        info,
    )


def decide(model: BinarySvmModel, x: FeatureVector) -> tuple[float, int]:
    """Decision value and its sign (+1 when the value is >= 0)."""
    raw = model.b + sum(
        a * yv * kernel(sv, x, model.d)
        for sv, yv, a in zip(model.support_vectors, model.sv_labels, model.sv_alpha)
    )
    return raw, (1 if raw >= 0 else -1)


class PairwiseModel:
    """One binary classifier per unordered label pair, combined by voting."""

    def __init__(self, labels, models, degenerate, label_counts, vocab: Vocabulary,
                 mode: FeatureSet, C: float, d: int, max_n: int = DEFAULT_MAX_NGRAM):
        self.labels: tuple[str, ...] = tuple(labels)
        # models[(a, b)] decides a (positive side) vs b; pairs sorted a < b
        self.models: dict[tuple[str, str], BinarySvmModel] = dict(models)
        # degenerate[(a, b)] is the only label of the pair seen in training
        self.degenerate: dict[tuple[str, str], str] = dict(degenerate)
        self.label_counts = Counter(label_counts)
        self.vocab = vocab
        self.mode = FeatureSet(mode)
        self.C = float(C)
        self.d = int(d)
        self.max_n = max_n

    def predict(self, example, tokenizer=None) -> str:
        fv = extract(example, self.mode, self.vocab, frozen=True,
                     tokenizer=tokenizer, max_n=self.max_n)
        return classify_pairwise(self, fv)

    def to_dict(self) -> dict:
        return {
            "mode": int(self.mode),
            "max_n": self.max_n,
            "C": self.C,
            "d": self.d,
            "labels": list(self.labels),
            "label_counts": sorted(self.label_counts.items()),
            "vocab": self.vocab.to_list(),
            "models": [[a, b, m.to_dict()] for (a, b), m in sorted(self.models.items())],
            "degenerate": [[a, b, w] for (a, b), w in sorted(self.degenerate.items())],
        }

    @classmethod
    def from_dict(cls, payload) -> "PairwiseModel":
        return cls(
            payload["labels"],
            {(a, b): BinarySvmModel.from_dict(m) for a, b, m in payload["models"]},
            {(a, b): w for a, b, w in payload["degenerate"]},
            dict(payload["label_counts"]),
            Vocabulary.from_list(payload["vocab"]),
            FeatureSet(payload["mode"]),
            payload["C"],
            payload["d"],
            payload["max_n"],
        )


def train_pairwise(dataset: Dataset, mode: FeatureSet, C: float = 1.0, d: int = 1,
                   labels=None, tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM,
                   **svm_kwargs) -> PairwiseModel:
    """Train one binary model per unordered label pair.

    ``labels`` may name labels beyond those present in ``dataset`` (e.g. the
    full inventory of a cross-validation parent); a pair whose one side has
    no training examples is recorded as degenerate and votes for the side
    that is present.
    """
    if len(dataset) == 0:
        raise TrainingError("cannot train on an empty dataset")
    all_labels = sorted(set(labels or ()) | set(dataset.label_counts))
    if len(all_labels) < 2:
        raise TrainingError("pairwise training needs at least 2 labels")
    vocab = Vocabulary.from_dataset(dataset, mode, tokenizer, max_n)
    fvs = [extract(ex, mode, vocab, frozen=True, tokenizer=tokenizer, max_n=max_n)
           for ex in dataset]
    by_label: dict[str, list[int]] = {}
    for idx, ex in enumerate(dataset):
        by_label.setdefault(ex.label, []).append(idx)

    models = {}
    degenerate = {}
    for a, b in combinations(all_labels, 2):
        a_idx = by_label.get(a, [])
        b_idx = by_label.get(b, [])
        if not a_idx and not b_idx:
            continue
        if not a_idx or not b_idx:
            degenerate[(a, b)] = a if a_idx else b
            continue
        pair_examples = [(fvs[i], 1) for i in a_idx] + [(fvs[i], -1) for i in b_idx]
        models[(a, b)] = train_binary_svm(pair_examples, C=C, d=d, **svm_kwargs)
    return PairwiseModel(all_labels, models, degenerate, dataset.label_counts,
                         vocab, mode, C, d, max_n)


def classify_pairwise(model: PairwiseModel, fv: FeatureVector) -> str:
    """One vote per pair classifier; ties break by global training
    frequency, then lexicographic label order."""
    votes = {lab: 0 for lab in model.labels}
    for (a, b), m in model.models.items():
        _, sign = decide(m, fv)
        votes[a if sign > 0 else b] += 1
    for pair, winner in model.degenerate.items():
        votes[winner] += 1
    return min(model.labels, key=lambda lab: (-votes[lab], -model.label_counts[lab], lab))
