"""Cross-validation harness, baseline rule, and statistical tests.

"Precision" throughout is overall accuracy: the fraction of sentences whose
predicted category equals the gold label. Open evaluations never train on
the tested examples; closed evaluations train and test on the same data.
Folds of a cross-validation run are independent of each other; the report
is assembled in a single reduction at the end.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from scipy.stats import binom

from .corpus import Dataset, FoldPlan, split_folds
from .declist import train_declist
from .features import DEFAULT_MAX_NGRAM, Feature, FeatureSet, example_features
from .knn import train_knn
from .maxent import train_maxent
from .svm import train_pairwise

PAST_MARKER = "た"  # sentence-final hiragana "ta"


class ConfigError(ValueError):
    """Illegal learner / feature-set combination or bad harness arguments."""


@dataclass(frozen=True)
class LearnerSpec:
    """Which learner to run and its hyperparameters."""

    method: str  # knn | dlist | maxent | svm | baseline
    k: int = 3
    d: int = 1
    C: float = 1.0
    tol: float = 1e-4
    max_iters: int = 1000

    def describe(self) -> str:
        if self.method == "knn":
            return f"knn (k={self.k})"
        if self.method == "svm":
            return f"svm (d={self.d})"
        return self.method


class BaselineModel:
    """Rule-based tense guesser; involves no training."""

    def predict(self, example) -> str:
        return baseline_classify(example.sentence)


def baseline_classify(sentence: str) -> str:
    """"past" when the sentence ends with the past-tense particle, else
    "present" (an empty sentence is "present")."""
    return "past" if sentence.endswith(PAST_MARKER) else "present"


METHODS = ("knn", "dlist", "maxent", "svm", "baseline")


def fit(spec: LearnerSpec, dataset: Dataset, mode: FeatureSet,
        tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM):
    """Train one model per the spec. The k-nearest neighborhood method is
    restricted to feature-set 2: its similarity is undefined for token
    features."""
    mode = FeatureSet(mode)
    if spec.method == "baseline":
        return BaselineModel()
    if spec.method == "knn":
        if mode != FeatureSet.FS2:
            raise ConfigError(
                "knn supports feature-set 2 only (sentence-final string "
                "similarity is undefined for token features)")
        return train_knn(dataset, spec.k)
    if spec.method == "dlist":
        return train_declist(dataset, mode, tokenizer, max_n)
    if spec.method == "maxent":
        return train_maxent(dataset, mode, tol=spec.tol, max_iters=spec.max_iters,
                            tokenizer=tokenizer, max_n=max_n)
    if spec.method == "svm":
        if spec.d not in (1, 2):
            raise ConfigError("svm kernel degree must be 1 or 2")
        return train_pairwise(dataset, mode, C=spec.C, d=spec.d,
                              tokenizer=tokenizer, max_n=max_n)
    raise ConfigError(f"unknown method {spec.method!r}")


@dataclass
class PrecisionReport:
    """Per-fold counts plus per-example predictions of one evaluation."""

    fold_results: tuple[tuple[int, int], ...]  # (correct, total) per fold
    predictions: tuple[tuple[int, str, str], ...]  # (index, gold, predicted)
    closed: bool
    config: dict = field(default_factory=dict)

    @property
    def correct(self) -> int:
        return sum(c for c, _ in self.fold_results)

    @property
    def total(self) -> int:
        return sum(t for _, t in self.fold_results)

    @property
    def precision(self) -> float:
        return self.correct / self.total


def cross_validate(spec: LearnerSpec, dataset: Dataset, plan: FoldPlan,
                   mode: FeatureSet, tokenizer=None,
                   max_n: int = DEFAULT_MAX_NGRAM) -> PrecisionReport:
    """Open evaluation: for each fold, train on the complement and predict
    the fold. Each fold's vocabulary is rebuilt from its training portion."""
    if len(plan.assignment) != len(dataset):
        raise ConfigError("fold plan does not match dataset size")
    predictions: list[tuple[int, str, str] | None] = [None] * len(dataset)
    fold_results = []
    for fold in range(plan.n_folds):
        train_idx, test_idx = plan.fold_indices(fold)
        model = fit(spec, dataset.subset(train_idx), mode, tokenizer, max_n)
        correct = 0
        for i in test_idx:
            predicted = model.predict(dataset[i])
            predictions[i] = (i, dataset[i].label, predicted)
            if predicted == dataset[i].label:
                correct += 1
        fold_results.append((correct, len(test_idx)))
    return PrecisionReport(tuple(fold_results), tuple(predictions), closed=False)


def closed_test(spec: LearnerSpec, dataset: Dataset, mode: FeatureSet,
                tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM) -> PrecisionReport:
    """Closed evaluation: train on the full dataset and test on it."""
    model = fit(spec, dataset, mode, tokenizer, max_n)
    return evaluate_model(model, dataset, closed=True)


def evaluate_model(model, dataset: Dataset, closed: bool = False) -> PrecisionReport:
    """Score an already trained model on a dataset."""
    predictions = []
    correct = 0
    for i, ex in enumerate(dataset):
        predicted = model.predict(ex)
        predictions.append((i, ex.label, predicted))
        if predicted == ex.label:
            correct += 1
    return PrecisionReport(((correct, len(dataset)),), tuple(predictions), closed)


@dataclass(frozen=True)
class SignTestResult:
    n_plus: int
    n_minus: int
    p_value: float
    significant_at: float | None  # the checked level when p < level, else None


def _sign_p_exact(k: int, n: int) -> float:
    tail = sum(math.comb(n, t) for t in range(k, n + 1))
    return min(1.0, 2.0 * tail / 2 ** n)


def _sign_p_normal(k: int, n: int) -> float:
    z = (k - 0.5 - n / 2.0) / math.sqrt(n / 4.0)  # continuity corrected
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def sign_test(n_plus: int, n_minus: int, level: float = 0.01) -> SignTestResult:
    """Two-sided sign test of H0: wins are a fair coin.

    Ties must already be excluded from the counts. Exact binomial for
    n <= 1000, normal approximation with continuity correction above.
    """
    n = n_plus + n_minus
    if n < 1:
        raise ValueError("need at least one untied pair")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    k = max(n_plus, n_minus)
    p = _sign_p_exact(k, n) if n <= 1000 else _sign_p_normal(k, n)
    return SignTestResult(n_plus, n_minus, p, level if p < level else None)


def compare_predictions(report_a: PrecisionReport, report_b: PrecisionReport):
    """Indices where exactly one of two evaluations is correct:
    (correct in A only, correct in B only)."""
    b_by_index = {i: (gold, pred) for i, gold, pred in report_b.predictions}
    a_only, b_only = [], []
    for i, gold, pred_a in report_a.predictions:
        if i not in b_by_index:
            raise ValueError(f"example {i} missing from the second report")
        gold_b, pred_b = b_by_index[i]
        if gold_b != gold:
            raise ValueError(f"gold label mismatch at example {i}")
        ok_a, ok_b = pred_a == gold, pred_b == gold
        if ok_a and not ok_b:
            a_only.append(i)
        elif ok_b and not ok_a:
            b_only.append(i)
    return a_only, b_only


def effective_features(flip_set, all_set, mode: FeatureSet, level: float = 0.01,
                       tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM
                       ) -> list[tuple[Feature, int]]:
    """Features over-represented in ``flip_set`` relative to ``all_set``.

    For each feature, a one-sided binomial test checks whether its
    occurrence count among the flip examples exceeds what its overall rate
    predicts; features with p < level are returned sorted by flip-set
    frequency (descending), then feature text.
    """
    flip = list(flip_set)
    full = list(all_set)
    flip_keys = Counter(flip)
    full_keys = Counter(full)
    if flip_keys - full_keys:
        raise ValueError("flip_set must be a sub-multiset of all_set")
    if not flip:
        return []
    n, total = len(flip), len(full)
    flip_counts: Counter = Counter()
    for ex in flip:
        flip_counts.update(example_features(ex, mode, tokenizer, max_n))
    full_counts: Counter = Counter()
    for ex in full:
        full_counts.update(example_features(ex, mode, tokenizer, max_n))
    selected = []
    for feat, x in flip_counts.items():
        rate = full_counts[feat] / total
        p = float(binom.sf(x - 1, n, rate))  # P(X >= x)
        if p < level:
            selected.append((feat, x))
    selected.sort(key=lambda item: (-item[1], item[0].text, item[0].kind))
    return selected


def category_distribution(dataset: Dataset) -> list[tuple[str, float]]:
    """Label occurrence rates, most frequent first (full precision; round
    only at display time)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset has no distribution")
    n = len(dataset)
    rates = [(lab, cnt / n) for lab, cnt in dataset.label_counts.items()]
    rates.sort(key=lambda item: (-item[1], item[0]))
    return rates


def cross_domain_eval(train: Dataset, test: Dataset, spec: LearnerSpec,
                      mode: FeatureSet, folds: int = 10, seed: int = 0,
                      tokenizer=None, max_n: int = DEFAULT_MAX_NGRAM
                      ) -> PrecisionReport:
    """Train on one corpus, evaluate on another.

    Test examples that also occur in the training data are evaluated by
    cross-validation instead: the overlap is split into folds and, for each
    fold, every training copy of the tested examples is withheld before
    training. Disjoint test examples are scored by a single model trained on
    the full training data.
    """
    if len(train) == 0 or len(test) == 0:
        raise ValueError("train and test datasets must be non-empty")
    train_keys = set(train.examples)
    overlap_idx = [i for i, ex in enumerate(test) if ex in train_keys]
    disjoint_idx = [i for i, ex in enumerate(test) if ex not in train_keys]

    predictions: list[tuple[int, str, str] | None] = [None] * len(test)
    fold_results = []
    if disjoint_idx:
        model = fit(spec, train, mode, tokenizer, max_n)
        correct = 0
        for i in disjoint_idx:
            predicted = model.predict(test[i])
            predictions[i] = (i, test[i].label, predicted)
            if predicted == test[i].label:
                correct += 1
        fold_results.append((correct, len(disjoint_idx)))
    if overlap_idx:
        overlap = [test[i] for i in overlap_idx]
        n_folds = min(folds, len(overlap))
        if n_folds >= 2:
            plan = split_folds(Dataset(overlap), n_folds, seed)
            groups = [[idx for idx, f in zip(overlap_idx, plan.assignment) if f == fold]
                      for fold in range(n_folds)]
        else:
            groups = [overlap_idx]
        for group in groups:
            withheld = {test[i] for i in group}
            reduced = Dataset(ex for ex in train if ex not in withheld)
            model = fit(spec, reduced, mode, tokenizer, max_n)
            correct = 0
            for i in group:
                predicted = model.predict(test[i])
                predictions[i] = (i, test[i].label, predicted)
                if predicted == test[i].label:
                    correct += 1
            fold_results.append((correct, len(group)))
    return PrecisionReport(tuple(fold_results), tuple(predictions), closed=False)
