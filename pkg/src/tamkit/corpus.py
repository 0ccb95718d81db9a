"""Labeled sentence corpora: file format, category descriptors, fold planning.

A corpus file is UTF-8 text with LF line endings. Each data line has two or
three TAB-separated fields::

    label <TAB> sentence [<TAB> space-separated tokens]

Blank lines and lines starting with ``#`` are skipped. Labels are opaque
strings to every classifier; :func:`parse_category_descriptor` is an optional
validation layer for labels written in the ``aux+...+tense`` grammar.

Datasets and fold plans are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


class CorpusError(ValueError):
    """Malformed corpus document or unserializable example."""


class DescriptorError(ValueError):
    """Category label does not follow the descriptor grammar."""


# The twelve auxiliary markers, spelled with underscores so each descriptor
# token is a single word.
AUXILIARIES = (
    "be_able_to",
    "be_going_to",
    "can",
    "had_better",
    "have_to",
    "may",
    "must",
    "need",
    "ought",
    "shall",
    "used_to",
    "will",
)

_TENSES = ("present", "past")
_DESCRIPTOR_TOKENS = frozenset(AUXILIARIES) | set(_TENSES) | {
    "progressive",
    "perfect",
    "imperative",
}


@dataclass(frozen=True)
class Example:
    """One labeled sentence, optionally pre-tokenized."""

    label: str
    sentence: str
    tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.label:
            raise ValueError("label must be non-empty")
        # Tabs and line breaks would corrupt the one-line-per-example format.
        if any(c in "\t\n\r" for c in self.label):
            raise ValueError("label must not contain tabs or line breaks")
        if any(c in "\t\n\r" for c in self.sentence):
            raise ValueError("sentence must not contain tabs or line breaks")
        if self.tokens is not None:
            object.__setattr__(self, "tokens", tuple(self.tokens))
            for tok in self.tokens:
                if not tok or any(c.isspace() for c in tok):
                    raise ValueError("tokens must be non-empty and contain no whitespace")


class Dataset:
    """Ordered, immutable collection of examples with a label inventory."""

    def __init__(self, examples):
        self.examples: tuple[Example, ...] = tuple(examples)
        self.label_counts = Counter(ex.label for ex in self.examples)

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def __getitem__(self, i):
        return self.examples[i]

    def __eq__(self, other):
        return isinstance(other, Dataset) and self.examples == other.examples

    @property
    def labels(self) -> list[str]:
        """Distinct labels in lexicographic order."""
        return sorted(self.label_counts)

    def majority_label(self) -> str:
        """Most frequent label; ties broken lexicographically."""
        if not self.examples:
            raise ValueError("empty dataset has no majority label")
        return min(self.label_counts, key=lambda lab: (-self.label_counts[lab], lab))

    def subset(self, indices) -> "Dataset":
        return Dataset(self.examples[i] for i in indices)


def parse_corpus(text: str) -> Dataset:
    """Parse a corpus document into a Dataset, preserving file order."""
    examples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise CorpusError(
                f"line {lineno}: expected 2 or 3 tab-separated fields, got {len(fields)}"
            )
        tokens = tuple(fields[2].split()) if len(fields) == 3 else None
        try:
            examples.append(Example(fields[0], fields[1], tokens))
        except ValueError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from exc
    return Dataset(examples)


def load_corpus(path) -> Dataset:
    """Read and parse a corpus file; invalid UTF-8 raises CorpusError."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path}: not valid UTF-8 ({exc})") from exc
    try:
        return parse_corpus(text)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def serialize_corpus(dataset: Dataset) -> str:
    """Render a Dataset back into corpus-file text (inverse of parse_corpus)."""
    lines = []
    for ex in dataset:
        if ex.tokens is None:
            lines.append(f"{ex.label}\t{ex.sentence}")
        else:
            lines.append(f"{ex.label}\t{ex.sentence}\t{' '.join(ex.tokens)}")
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class CategorySpec:
    """Structured reading of a descriptor-grammar label."""

    auxiliaries: frozenset[str] = frozenset()
    tense: str = "present"
    progressive: bool = False
    perfect: bool = False
    imperative: bool = False


def parse_category_descriptor(label: str) -> CategorySpec:
    """Parse a ``+``-joined descriptor label into a CategorySpec.

    Tokens come from the twelve auxiliaries plus present/past/progressive/
    perfect/imperative. At most one tense may appear (default present);
    imperative combines with nothing.
    """
    parts = label.split("+")
    seen = set()
    for part in parts:
        if part not in _DESCRIPTOR_TOKENS:
            raise DescriptorError(f"unknown descriptor token {part!r} in {label!r}")
        if part in seen:
            raise DescriptorError(f"duplicate descriptor token {part!r} in {label!r}")
        seen.add(part)
    if "imperative" in seen:
        if len(seen) > 1:
            raise DescriptorError(f"imperative cannot combine with other tokens: {label!r}")
        return CategorySpec(imperative=True)
    if "present" in seen and "past" in seen:
        raise DescriptorError(f"at most one tense token allowed: {label!r}")
    return CategorySpec(
        auxiliaries=frozenset(seen & set(AUXILIARIES)),
        tense="past" if "past" in seen else "present",
        progressive="progressive" in seen,
        perfect="perfect" in seen,
    )


def category_label(spec: CategorySpec) -> str:
    """Canonical descriptor string for a CategorySpec (inverse of the parser)."""
    if spec.imperative:
        return "imperative"
    parts = sorted(spec.auxiliaries)
    parts.append(spec.tense)
    if spec.progressive:
        parts.append("progressive")
    if spec.perfect:
        parts.append("perfect")
    return "+".join(parts)


_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 stream; returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic assignment of examples to cross-validation folds."""

    n_folds: int
    assignment: tuple[int, ...]
    seed: int

    def fold_indices(self, fold: int) -> tuple[list[int], list[int]]:
        """(train indices, test indices) for one fold, in dataset order."""
        test = [i for i, f in enumerate(self.assignment) if f == fold]
        train = [i for i, f in enumerate(self.assignment) if f != fold]
        return train, test


def split_folds(dataset: Dataset, n_folds: int, seed: int = 0) -> FoldPlan:
    """Shuffle example indices with a seeded Fisher-Yates pass, then deal
    them round-robin into ``n_folds`` folds (sizes differ by at most one).

    The assignment depends only on (dataset order, n_folds, seed); no
    ambient randomness is consulted.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if not 2 <= n_folds <= n:
        raise ValueError(f"n_folds must be in [2, {n}], got {n_folds}")
    order = list(range(n))
    state = seed & _MASK64
    for i in range(n - 1, 0, -1):
        state, r = _splitmix64(state)
        j = r % (i + 1)
        order[i], order[j] = order[j], order[i]
    assignment = [0] * n
    for pos, idx in enumerate(order):
        assignment[idx] = pos % n_folds
    return FoldPlan(n_folds=n_folds, assignment=tuple(assignment), seed=seed)
