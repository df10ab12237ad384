"""Verifier training data: positive steps from gold proofs, plus pseudo
negatives made by perturbing them.

Four perturbation flavors:
  premise_removed     drop a nonempty strict subset of the premises
  premise_swapped     replace one premise with a retrieved distractor
  premise_copied      conclusion becomes a copy of one premise
  conclusion_negated  conclusion gets an "I don't think " prefix

Generation is seed-deterministic: same proofs, context, and seed give
byte-identical JSONL.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Mapping

from .bm25 import Bm25Index, bm25_topk
from .errors import DataError, EmptyCorpusError, NotEnoughPremisesError
from .synth import NEGATION_PREFIX
from .tree import ProofTree


class Perturbation(Enum):
    NONE = "none"
    PREMISE_REMOVED = "premise_removed"
    PREMISE_SWAPPED = "premise_swapped"
    PREMISE_COPIED = "premise_copied"
    CONCLUSION_NEGATED = "conclusion_negated"


@dataclass(frozen=True)
class LabeledStep:
    premises: tuple[str, ...]
    conclusion: str
    positive: bool
    perturbation: Perturbation = Perturbation.NONE
    source_id: str = ""

    def __post_init__(self) -> None:
        if not self.premises:
            raise ValueError("a labeled step needs at least one premise")
        if self.positive != (self.perturbation is Perturbation.NONE):
            raise ValueError("positive steps are exactly the unperturbed ones")


def extract_positives(proof: ProofTree, source_id: str = "") -> list[LabeledStep]:
    """One positive per internal node: premises are the node's children."""
    out = []
    for step in proof.steps:
        premises = tuple(proof.sentence_of(p) for p in step.premises)
        out.append(
            LabeledStep(premises, proof.sentence_of(step.conclusion), True, source_id=source_id)
        )
    return out


DEFAULT_FLAVORS: Mapping[Perturbation, int] = {
    Perturbation.PREMISE_REMOVED: 1,
    Perturbation.PREMISE_SWAPPED: 1,
    Perturbation.CONCLUSION_NEGATED: 1,
}


def _removed(step: LabeledStep, rng: random.Random) -> LabeledStep:
    size = rng.randint(1, len(step.premises) - 1)  # kept premises, strict subset
    kept = tuple(sorted(rng.sample(range(len(step.premises)), size)))
    return LabeledStep(
        tuple(step.premises[i] for i in kept),
        step.conclusion,
        False,
        Perturbation.PREMISE_REMOVED,
        step.source_id,
    )


def _swapped(
    step: LabeledStep, index: Bm25Index, rng: random.Random
) -> LabeledStep | None:
    ranked = bm25_topk(index, step.conclusion, 1, exclude=set(step.premises))
    if not ranked:
        return None
    distractor = ranked[0][0]
    slot = rng.randrange(len(step.premises))
    premises = list(step.premises)
    premises[slot] = distractor
    return LabeledStep(
        tuple(premises), step.conclusion, False, Perturbation.PREMISE_SWAPPED, step.source_id
    )


def _copied(step: LabeledStep, rng: random.Random) -> LabeledStep:
    return LabeledStep(
        step.premises,
        step.premises[rng.randrange(len(step.premises))],
        False,
        Perturbation.PREMISE_COPIED,
        step.source_id,
    )


def _negated(step: LabeledStep) -> LabeledStep:
    conclusion = NEGATION_PREFIX + step.conclusion[:1].lower() + step.conclusion[1:]
    return LabeledStep(
        step.premises, conclusion, False, Perturbation.CONCLUSION_NEGATED, step.source_id
    )


def make_negatives(
    step: LabeledStep,
    context: list[str],
    index: Bm25Index | None = None,
    rng: random.Random | None = None,
    flavor_weights: Mapping[Perturbation, int] | None = None,
) -> list[LabeledStep]:
    """Pseudo negatives for one positive step.

    ``flavor_weights`` maps flavors to how many negatives of each to emit.
    When omitted, one negative per applicable default flavor (removal is
    skipped for single-premise steps; explicitly requesting it there raises
    ``NotEnoughPremisesError``).  Swapping needs an index built over the
    context; with nothing left to retrieve the flavor yields nothing.
    """
    if not step.positive:
        raise ValueError("negatives are derived from positive steps only")
    rng = rng if rng is not None else random.Random(0)
    explicit = flavor_weights is not None
    weights = dict(flavor_weights if explicit else DEFAULT_FLAVORS)
    out: list[LabeledStep] = []
    for flavor in Perturbation:
        count = weights.get(flavor, 0)
        if flavor is Perturbation.NONE and count:
            raise ValueError("cannot request unperturbed negatives")
        for _ in range(count):
            if flavor is Perturbation.PREMISE_REMOVED:
                if len(step.premises) < 2:
                    if explicit:
                        raise NotEnoughPremisesError(
                            "premise removal needs a step with at least 2 premises"
                        )
                    break
                out.append(_removed(step, rng))
            elif flavor is Perturbation.PREMISE_SWAPPED:
                if index is None:
                    index = Bm25Index(list(context))
                if not len(index):
                    raise EmptyCorpusError("premise swap needs a nonempty index")
                swapped = _swapped(step, index, rng)
                if swapped is None:
                    break
                out.append(swapped)
            elif flavor is Perturbation.PREMISE_COPIED:
                out.append(_copied(step, rng))
            elif flavor is Perturbation.CONCLUSION_NEGATED:
                out.append(_negated(step))
    return out


def labeled_step_to_json(step: LabeledStep) -> dict:
    return {
        "premises": list(step.premises),
        "conclusion": step.conclusion,
        "label": "pos" if step.positive else "neg",
        "perturbation": step.perturbation.value,
        "source_id": step.source_id,
    }


def labeled_step_from_json(payload: dict) -> LabeledStep:
    try:
        label = payload["label"]
        if label not in ("pos", "neg"):
            raise DataError(f"unknown label {label!r}")
        return LabeledStep(
            tuple(payload["premises"]),
            payload["conclusion"],
            label == "pos",
            Perturbation(payload["perturbation"]),
            payload.get("source_id", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed labeled step record: {exc}") from exc


def write_labeled_steps(steps: Iterable[LabeledStep], fp: IO[str]) -> int:
    count = 0
    for step in steps:
        fp.write(json.dumps(labeled_step_to_json(step), ensure_ascii=False) + "\n")
        count += 1
    return count


def read_labeled_steps(fp: IO[str]) -> list[LabeledStep]:
    out = []
    for line_no, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: invalid JSON: {exc}") from exc
        out.append(labeled_step_from_json(payload))
    return out
