"""Proof tree metrics and answer scoring.

A predicted tree is aligned to the gold tree by greedily matching
intermediate nodes on the Jaccard overlap of their descendant-leaf
identifier sets.  On top of the alignment three metric families are
computed (leaves, steps, intermediates), each as precision/recall/F1 plus
an exact-match flag, with the overall flag their conjunction.

Answers come from a three-class linear classifier over the proof scores of
a hypothesis and its negation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .bm25 import tokenize
from .dsl import HYPOTHESIS, NodeId, NodeKind, intermediate
from .errors import DomainError
from .synth import Answer
from .tree import ProofTree

SentenceSimilarity = Callable[[str, str], float]

DEFAULT_SIMILARITY_THRESHOLD = 0.55


def token_f1(a: str, b: str) -> float:
    """Token-multiset F1 between two sentences; 1.0 when both are empty."""
    ta, tb = Counter(tokenize(a)), Counter(tokenize(b))
    if not ta and not tb:
        return 1.0
    overlap = sum((ta & tb).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(ta.values())
    recall = overlap / sum(tb.values())
    return 2 * precision * recall / (precision + recall)


def _jaccard(a: frozenset[int], b: frozenset[int]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class Alignment:
    """Injective partial map from predicted to gold intermediate labels.

    Roots are always considered aligned to each other and are not part of
    the mapping.
    """

    pairs: tuple[tuple[int, int], ...]

    @property
    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)


def align_trees(predicted: ProofTree, gold: ProofTree) -> Alignment:
    """Greedy maximum-Jaccard matching over descendant-leaf identifier sets.

    Candidate pairs are processed in descending Jaccard order; ties prefer
    higher token-F1 between the intermediate sentences, then the smaller
    gold label, then the smaller predicted label.  Zero-overlap pairs stay
    unaligned.
    """
    pred_sets = {
        i: predicted.descendant_leaves(intermediate(i)) for i in predicted.int_indices()
    }
    gold_sets = {i: gold.descendant_leaves(intermediate(i)) for i in gold.int_indices()}
    candidates = []
    for pi, pset in pred_sets.items():
        for gi, gset in gold_sets.items():
            overlap = _jaccard(pset, gset)
            if overlap <= 0.0:
                continue
            similarity = token_f1(
                predicted.sentence_of(intermediate(pi)), gold.sentence_of(intermediate(gi))
            )
            candidates.append((overlap, similarity, pi, gi))
    candidates.sort(key=lambda c: (-c[0], -c[1], c[3], c[2]))
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    pairs = []
    for _, _, pi, gi in candidates:
        if pi in used_pred or gi in used_gold:
            continue
        used_pred.add(pi)
        used_gold.add(gi)
        pairs.append((pi, gi))
    return Alignment(tuple(sorted(pairs)))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    all_correct: bool


def _prf(correct: int, n_predicted: int, n_gold: int) -> PRF:
    precision = correct / n_predicted if n_predicted else 1.0
    recall = correct / n_gold if n_gold else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return PRF(precision, recall, f1, f1 == 1.0)


@dataclass(frozen=True)
class ExampleScores:
    leaves: PRF
    steps: PRF
    intermediates: PRF

    @property
    def overall_all_correct(self) -> bool:
        return (
            self.leaves.all_correct
            and self.steps.all_correct
            and self.intermediates.all_correct
        )

    @classmethod
    def empty_prediction(cls) -> "ExampleScores":
        missing = PRF(0.0, 0.0, 0.0, False)
        return cls(missing, missing, missing)

    def to_json(self) -> dict:
        out: dict = {}
        for family, prf in (
            ("leaves", self.leaves),
            ("steps", self.steps),
            ("intermediates", self.intermediates),
        ):
            out[family] = {
                "precision": prf.precision,
                "recall": prf.recall,
                "f1": prf.f1,
                "all_correct": prf.all_correct,
            }
        out["overall_all_correct"] = self.overall_all_correct
        return out


def _children_match(
    predicted: ProofTree,
    gold: ProofTree,
    mapping: Mapping[int, int],
    pred_node: NodeId,
    gold_node: NodeId,
) -> bool:
    pred_children = predicted.children(pred_node)
    gold_children = gold.children(gold_node)
    if len(pred_children) != len(gold_children):
        return False
    remaining = set(gold_children)
    for child in pred_children:
        if child.kind is NodeKind.SENT:
            target = child
        else:
            mapped = mapping.get(child.index)
            if mapped is None:
                return False
            target = intermediate(mapped)
        if target not in remaining:
            return False
        remaining.remove(target)
    return True


def score_example(
    predicted: ProofTree,
    gold: ProofTree,
    similarity: SentenceSimilarity = token_f1,
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
) -> ExampleScores:
    """Leaves, steps, and intermediates metrics for one (predicted, gold) pair.

    Leaves compare descendant-leaf identifier sets of the roots.  A step
    (internal node, root included) counts as correct when the node is
    aligned and its children map exactly onto the gold node's children.  An
    aligned intermediate counts as correct when the sentences' similarity
    exceeds the threshold.
    """
    alignment = align_trees(predicted, gold).as_dict

    pred_leaves = predicted.leaf_ids()
    gold_leaves = gold.leaf_ids()
    leaves = _prf(len(pred_leaves & gold_leaves), len(pred_leaves), len(gold_leaves))

    pred_internal = [(HYPOTHESIS, HYPOTHESIS)] + [
        (intermediate(pi), intermediate(alignment[pi]) if pi in alignment else None)
        for pi in sorted(predicted.int_indices())
    ]
    step_correct = sum(
        1
        for pred_node, gold_node in pred_internal
        if gold_node is not None
        and _children_match(predicted, gold, alignment, pred_node, gold_node)
    )
    steps = _prf(step_correct, len(pred_internal), 1 + len(gold.int_indices()))

    int_correct = sum(
        1
        for pi, gi in alignment.items()
        if similarity(
            predicted.sentence_of(intermediate(pi)), gold.sentence_of(intermediate(gi))
        )
        > threshold
    )
    intermediates = _prf(
        int_correct, len(predicted.int_indices()), len(gold.int_indices())
    )
    return ExampleScores(leaves, steps, intermediates)


def aggregate_scores(scores: Sequence[ExampleScores]) -> dict[str, float]:
    """Means over examples: the three F1s, three AllCorrect rates, Overall."""
    n = len(scores)
    if n == 0:
        raise ValueError("nothing to aggregate")
    return {
        "leaves_f1": sum(s.leaves.f1 for s in scores) / n,
        "leaves_all_correct": sum(s.leaves.all_correct for s in scores) / n,
        "steps_f1": sum(s.steps.f1 for s in scores) / n,
        "steps_all_correct": sum(s.steps.all_correct for s in scores) / n,
        "intermediates_f1": sum(s.intermediates.f1 for s in scores) / n,
        "intermediates_all_correct": sum(s.intermediates.all_correct for s in scores) / n,
        "overall_all_correct": sum(s.overall_all_correct for s in scores) / n,
    }


# --- answer classification ------------------------------------------------------


@dataclass(frozen=True)
class AnswerClassifier:
    """Linear three-class decision over (score of h, score of not-h, 1)."""

    weights: tuple[tuple[float, float, float], ...]  # rows: proved, disproved, unknown

    CLASSES = (Answer.PROVED, Answer.DISPROVED, Answer.UNKNOWN)

    def __post_init__(self) -> None:
        if len(self.weights) != 3 or any(len(row) != 3 for row in self.weights):
            raise ValueError("expected a 3x3 weight matrix")

    @classmethod
    def reference(cls) -> "AnswerClassifier":
        """Hand-set weights separating the oracle score corners."""
        return cls(((2.0, -1.0, -0.5), (-1.0, 2.0, -0.5), (0.0, 0.0, 0.0)))

    def classify(self, score_h: float, score_neg_h: float) -> Answer:
        for value in (score_h, score_neg_h):
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"scores must be within [0, 1], got {value!r}")
        activations = [
            w_h * score_h + w_n * score_neg_h + bias for w_h, w_n, bias in self.weights
        ]
        top = max(activations)
        winners = [i for i, a in enumerate(activations) if a == top]
        if len(winners) > 1:
            return Answer.UNKNOWN
        return self.CLASSES[winners[0]]

    @classmethod
    def fit_least_squares(
        cls, scores: Iterable[tuple[float, float]], answers: Iterable[Answer]
    ) -> "AnswerClassifier":
        """Least-squares fit of the weight matrix against one-hot targets."""
        pairs = list(scores)
        labels = list(answers)
        if len(pairs) != len(labels) or not pairs:
            raise ValueError("need equally many, and at least one, scores and answers")
        features = np.array([[h, n, 1.0] for h, n in pairs], dtype=float)
        targets = np.zeros((len(labels), 3), dtype=float)
        for row, answer in enumerate(labels):
            targets[row, cls.CLASSES.index(answer)] = 1.0
        solution, *_ = np.linalg.lstsq(features, targets, rcond=None)
        return cls(tuple(tuple(float(w) for w in col) for col in solution.T))


# --- per-instance outcomes and the depth breakdown -------------------------------


@dataclass(frozen=True)
class InstanceOutcome:
    """Everything the reports need about one evaluated instance."""

    instance_id: str
    depth: int
    gold_answer: Answer
    predicted_answer: Answer | None  # None when no prediction was supplied
    scores: ExampleScores | None  # None when the gold answer is Unknown

    @property
    def answer_correct(self) -> bool:
        return self.predicted_answer is self.gold_answer

    @property
    def proof_correct(self) -> bool:
        """Answer right and, where a gold tree exists, leaves and steps exact."""
        if not self.answer_correct:
            return False
        if self.scores is None:
            return True
        return self.scores.leaves.all_correct and self.scores.steps.all_correct

    @property
    def bucket(self) -> str:
        return "N/A" if self.gold_answer is Answer.UNKNOWN else str(self.depth)


BUCKET_ORDER = ("N/A", "0", "1", "2", "3", "All")


def breakdown_by_depth(
    outcomes: Sequence[InstanceOutcome],
) -> dict[str, dict[str, float]]:
    """Answer and proof accuracy per depth bucket; empty buckets are absent.

    Unknown-answer instances land in "N/A", where a proof is correct exactly
    when the predicted answer is Unknown.  "All" covers every instance.
    """
    grouped: dict[str, list[InstanceOutcome]] = {}
    for outcome in outcomes:
        grouped.setdefault(outcome.bucket, []).append(outcome)
    if outcomes:
        grouped["All"] = list(outcomes)
    table = {}
    for bucket in BUCKET_ORDER:
        members = grouped.get(bucket)
        if not members:
            continue
        table[bucket] = {
            "count": len(members),
            "answer_accuracy": sum(o.answer_correct for o in members) / len(members),
            "proof_accuracy": sum(o.proof_correct for o in members) / len(members),
        }
    return table
