"""Hand-computed metric fixtures shared by the unit and acceptance suites.

Every expected number below was derived on paper from the metric
definitions (set intersections, harmonic means, greedy alignment ranking)
before being checked against the implementation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from proofsearch.dsl import HYPOTHESIS, LinearProof, StepText, intermediate, sent
from proofsearch.evaluation import ExampleScores, score_example
from proofsearch.tree import ProofTree

CONTEXT = [
    "anne is kind",
    "if anne is kind then anne is nice",
    "if anne is nice then anne is happy",
    "if anne is happy then anne is proud",
    "bob is cold",
    "if bob is cold then bob is tired",
    "carol is young",
    "dave is big",
]

GOLD_D2 = "sent1 & sent2 -> int1: anne is nice; sent3 & int1 -> hypothesis;"
GOLD_D3 = (
    "sent1 & sent2 -> int1: anne is nice;"
    " sent3 & int1 -> int2: anne is happy;"
    " sent4 & int2 -> hypothesis;"
)
GOLD_D1 = "sent1 & sent2 -> hypothesis;"


@dataclass(frozen=True)
class GoldenCase:
    name: str
    pred: str | None  # None means the system produced no proof at all
    gold: str
    hypothesis: str
    # (precision, recall, f1, all_correct) per family
    leaves: tuple[float, float, float, bool]
    steps: tuple[float, float, float, bool]
    intermediates: tuple[float, float, float, bool]
    overall: bool


GOLDEN_CASES = [
    GoldenCase(
        "exact match, one intermediate",
        GOLD_D2,
        GOLD_D2,
        "anne is happy",
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        True,
    ),
    GoldenCase(
        "paraphrased intermediate above threshold",
        "sent1 & sent2 -> int1: anne is nice today; sent3 & int1 -> hypothesis;",
        GOLD_D2,
        "anne is happy",
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        # token F1 6/7 clears the 0.55 threshold, so the pair still counts
        (1.0, 1.0, 1.0, True),
        True,
    ),
    GoldenCase(
        "intermediate text unrelated to gold",
        "sent1 & sent2 -> int1: zebra quark; sent3 & int1 -> hypothesis;",
        GOLD_D2,
        "anne is happy",
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        (0.0, 0.0, 0.0, False),
        False,
    ),
    GoldenCase(
        "depth-0 collapse of a two-step gold",
        "sent1 -> hypothesis;",
        GOLD_D2,
        "anne is happy",
        # one predicted leaf of three gold: P=1, R=1/3, F1=0.5
        (1.0, 1 / 3, 0.5, False),
        (0.0, 0.0, 0.0, False),
        (1.0, 0.0, 0.0, False),
        False,
    ),
    GoldenCase(
        "distractor leaf inside the intermediate",
        "sent1 & sent2 & sent5 -> int1: anne is nice; sent3 & int1 -> hypothesis;",
        GOLD_D2,
        "anne is happy",
        (0.75, 1.0, 6 / 7, False),
        # root matches through the alignment, the padded step does not
        (0.5, 0.5, 0.5, False),
        (1.0, 1.0, 1.0, True),
        False,
    ),
    GoldenCase(
        "whole proof flattened into one step",
        "sent1 & sent2 & sent3 -> hypothesis;",
        GOLD_D2,
        "anne is happy",
        (1.0, 1.0, 1.0, True),
        (0.0, 0.0, 0.0, False),
        (1.0, 0.0, 0.0, False),
        False,
    ),
    GoldenCase(
        "same leaves grouped the wrong way",
        "sent3 & sent4 -> int1: different grouping;"
        " sent2 & int1 -> int2: another group;"
        " sent1 & int2 -> hypothesis;",
        GOLD_D3,
        "anne is proud",
        (1.0, 1.0, 1.0, True),
        (0.0, 0.0, 0.0, False),
        (0.0, 0.0, 0.0, False),
        False,
    ),
    GoldenCase(
        "no prediction at all",
        None,
        GOLD_D2,
        "anne is happy",
        (0.0, 0.0, 0.0, False),
        (0.0, 0.0, 0.0, False),
        (0.0, 0.0, 0.0, False),
        False,
    ),
    GoldenCase(
        "redundant intermediate over a one-step gold",
        "sent1 & sent2 -> int1: anne is nice; int1 -> hypothesis;",
        GOLD_D1,
        "anne is nice",
        (1.0, 1.0, 1.0, True),
        (0.0, 0.0, 0.0, False),
        # nothing to align against: the extra node costs precision only
        (0.0, 1.0, 0.0, False),
        False,
    ),
    GoldenCase(
        "exact match, two intermediates",
        GOLD_D3,
        GOLD_D3,
        "anne is proud",
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        True,
    ),
    GoldenCase(
        "one of two intermediate texts unrelated",
        "sent1 & sent2 -> int1: anne is nice;"
        " sent3 & int1 -> int2: zebra quark;"
        " sent4 & int2 -> hypothesis;",
        GOLD_D3,
        "anne is proud",
        (1.0, 1.0, 1.0, True),
        (1.0, 1.0, 1.0, True),
        (0.5, 0.5, 0.5, False),
        False,
    ),
    GoldenCase(
        "completely disjoint leaves",
        "sent7 & sent8 -> hypothesis;",
        GOLD_D2,
        "anne is happy",
        (0.0, 0.0, 0.0, False),
        (0.0, 0.0, 0.0, False),
        (1.0, 0.0, 0.0, False),
        False,
    ),
]


def evaluate_case(case: GoldenCase) -> ExampleScores:
    gold = ProofTree.from_text(case.gold, case.hypothesis, CONTEXT)
    if case.pred is None:
        return ExampleScores.empty_prediction()
    pred = ProofTree.from_text(case.pred, case.hypothesis, CONTEXT)
    return score_example(pred, gold)


def case_mismatches(case: GoldenCase, tolerance: float = 1e-12) -> list[str]:
    """Differences between hand-computed and measured values, empty if none."""
    scores = evaluate_case(case)
    out: list[str] = []
    for family, expected in (
        ("leaves", case.leaves),
        ("steps", case.steps),
        ("intermediates", case.intermediates),
    ):
        got = getattr(scores, family)
        for label, want, have in (
            ("precision", expected[0], got.precision),
            ("recall", expected[1], got.recall),
            ("f1", expected[2], got.f1),
        ):
            if abs(want - have) > tolerance:
                out.append(f"{family}.{label}: expected {want!r}, got {have!r}")
        if got.all_correct != expected[3]:
            out.append(f"{family}.all_correct: expected {expected[3]}, got {got.all_correct}")
    if scores.overall_all_correct != case.overall:
        out.append(f"overall: expected {case.overall}, got {scores.overall_all_correct}")
    return out


def random_tree(rng: random.Random, hypothesis: str = "the goal holds") -> ProofTree:
    """A structurally valid random proof tree over the shared context."""
    n_steps = rng.randint(1, 5)
    steps = []
    n_ints = 0
    for k in range(n_steps):
        pool = [sent(i + 1) for i in range(len(CONTEXT))]
        pool += [intermediate(i + 1) for i in range(n_ints)]
        premises = tuple(rng.sample(pool, rng.randint(1, min(3, len(pool)))))
        if k == n_steps - 1:
            steps.append(StepText(premises, HYPOTHESIS))
        else:
            n_ints += 1
            text = " ".join(
                rng.choice(["anne", "bob", "carol", "is", "kind", "cold", "zebra"])
                for _ in range(rng.randint(1, 4))
            )
            steps.append(StepText(premises, intermediate(n_ints), text))
    return ProofTree(hypothesis, tuple(CONTEXT), LinearProof(tuple(steps)))
