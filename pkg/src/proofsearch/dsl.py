"""Linear proof text format.

A proof is a sequence of steps written in post order, e.g.::

    sent2 & sent4 -> int1: water vapor condenses; int1 & sent3 -> hypothesis;

Premises name context sentences (``sent3``) or earlier conclusions
(``int1``); a conclusion is either a fresh intermediate with its sentence
text or the bare word ``hypothesis``.  Canonical serialization sorts
premises (sent before int, ascending index), renumbers intermediates
1..k in step order, and joins steps with ``"; "`` ending in ``";"``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Collection, Iterable, Sequence

from .errors import (
    DuplicateConclusionError,
    EmptyProofError,
    ProofSyntaxError,
    UnknownPremiseError,
)

_WS = re.compile(r"\s+")
_IDENT = re.compile(r"^(sent|int)([0-9]+)$")
_INT_CONCLUSION = re.compile(r"^int([0-9]+)\s*:\s*(.*)$", re.DOTALL)


def normalize_sentence(text: str) -> str:
    """Trim, collapse internal whitespace, lowercase, drop one trailing period."""
    out = _WS.sub(" ", text.strip()).lower()
    if out.endswith("."):
        out = out[:-1]
    return out.strip()


class NodeKind(Enum):
    SENT = "sent"
    INT = "int"
    HYPOTHESIS = "hypothesis"


@dataclass(frozen=True)
class NodeId:
    """Identifier of a proof node: sent<k>, int<k>, or hypothesis."""

    kind: NodeKind
    index: int = 0  # 1-based; unused for the hypothesis

    def __post_init__(self) -> None:
        if self.kind is NodeKind.HYPOTHESIS:
            if self.index != 0:
                raise ProofSyntaxError("hypothesis takes no index")
        elif self.index < 1:
            raise ProofSyntaxError(f"{self.kind.value} index must be >= 1")

    def __str__(self) -> str:
        if self.kind is NodeKind.HYPOTHESIS:
            return "hypothesis"
        return f"{self.kind.value}{self.index}"

    @property
    def sort_key(self) -> tuple[int, int]:
        # sent premises order before int premises
        return (0 if self.kind is NodeKind.SENT else 1, self.index)


def sent(index: int) -> NodeId:
    return NodeId(NodeKind.SENT, index)


def intermediate(index: int) -> NodeId:
    return NodeId(NodeKind.INT, index)


HYPOTHESIS = NodeId(NodeKind.HYPOTHESIS)


def parse_node_id(token: str) -> NodeId:
    token = token.strip()
    if token == "hypothesis":
        return HYPOTHESIS
    m = _IDENT.match(token)
    if m is None:
        raise ProofSyntaxError(f"bad identifier {token!r}")
    kind = NodeKind.SENT if m.group(1) == "sent" else NodeKind.INT
    index = int(m.group(2))
    if index < 1:
        raise ProofSyntaxError(f"identifier index must be >= 1: {token!r}")
    return NodeId(kind, index)


@dataclass(frozen=True)
class StepText:
    """One proof step: premises, conclusion id, and the conclusion sentence.

    ``text`` is the (normalized) sentence of an intermediate conclusion and
    None exactly when the conclusion is the hypothesis, whose sentence is
    given externally.
    """

    premises: tuple[NodeId, ...]
    conclusion: NodeId
    text: str | None = None

    def __post_init__(self) -> None:
        if not self.premises:
            raise ProofSyntaxError("a step needs at least one premise")
        if len(set(self.premises)) != len(self.premises):
            raise ProofSyntaxError("duplicate premise")
        for p in self.premises:
            if p.kind is NodeKind.HYPOTHESIS:
                raise ProofSyntaxError("hypothesis cannot be a premise")
        if self.conclusion.kind is NodeKind.SENT:
            raise ProofSyntaxError("a step cannot conclude a context sentence")
        if self.conclusion.kind is NodeKind.INT:
            if self.text is None:
                raise ProofSyntaxError("intermediate conclusion needs its text")
            norm = normalize_sentence(self.text)
            if not norm:
                raise ProofSyntaxError("conclusion text is empty")
            if ";" in norm:
                raise ProofSyntaxError("conclusion text may not contain ';'")
            object.__setattr__(self, "text", norm)
        elif self.text is not None:
            raise ProofSyntaxError("hypothesis conclusion carries no text")

    def render(self) -> str:
        """This step as text, premises sorted, identifiers as-is."""
        lhs = " & ".join(str(p) for p in sorted(self.premises, key=lambda p: p.sort_key))
        if self.conclusion.kind is NodeKind.HYPOTHESIS:
            return f"{lhs} -> hypothesis"
        return f"{lhs} -> {self.conclusion}: {self.text}"


@dataclass(frozen=True)
class LinearProof:
    """A validated sequence of steps.

    Construction checks chaining only: every int premise must be concluded
    by an earlier step and nothing may be concluded twice.  Bounds on sent
    indices require a context size and are checked by parse_proof / callers.
    """

    steps: tuple[StepText, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise EmptyProofError("proof has no steps")
        concluded: set[NodeId] = set()
        n_ints = 0
        for step in self.steps:
            for p in step.premises:
                if p.kind is NodeKind.INT and p not in concluded:
                    raise UnknownPremiseError(f"premise {p} is not available")
            if step.conclusion in concluded:
                raise DuplicateConclusionError(f"{step.conclusion} concluded twice")
            if step.conclusion.kind is NodeKind.INT:
                n_ints += 1
                if step.conclusion.index != n_ints:
                    raise ProofSyntaxError(
                        f"intermediates must be introduced in order; expected"
                        f" int{n_ints}, got {step.conclusion}"
                    )
            concluded.add(step.conclusion)

    @property
    def concluded_ids(self) -> tuple[NodeId, ...]:
        return tuple(s.conclusion for s in self.steps)

    def int_texts(self) -> dict[int, str]:
        """Intermediate index -> conclusion sentence."""
        return {
            s.conclusion.index: s.text  # type: ignore[misc]
            for s in self.steps
            if s.conclusion.kind is NodeKind.INT
        }

    def concludes_hypothesis(self) -> bool:
        return any(s.conclusion.kind is NodeKind.HYPOTHESIS for s in self.steps)

    def max_sent_index(self) -> int:
        return max(
            (p.index for s in self.steps for p in s.premises if p.kind is NodeKind.SENT),
            default=0,
        )


def validate_step(step: StepText, available: Collection[NodeId]) -> bool:
    """True iff every premise is available and the conclusion is fresh.

    ``available`` lists the identifiers usable as premises (context
    sentences plus already-concluded intermediates).  The hypothesis is
    always a legal conclusion here; replacement semantics live in the graph.
    """
    avail = set(available)
    for p in step.premises:
        if p not in avail:
            return False
    if step.conclusion.kind is NodeKind.INT and step.conclusion in avail:
        return False
    return True


def parse_step(text: str) -> StepText:
    """Parse a single step, no cross-step or context bounds checks."""
    if ";" in text:
        head, _, tail = text.partition(";")
        if tail.strip():
            raise ProofSyntaxError("expected a single step")
        text = head
    text = text.strip()
    if not text:
        raise ProofSyntaxError("empty step")
    lhs, arrow, rhs = text.partition("->")
    if not arrow:
        raise ProofSyntaxError(f"step {text!r} has no '->'")
    premises = tuple(parse_node_id(tok) for tok in lhs.split("&"))
    rhs = rhs.strip()
    if rhs == "hypothesis":
        return StepText(premises, HYPOTHESIS, None)
    m = _INT_CONCLUSION.match(rhs)
    if m is None:
        raise ProofSyntaxError(f"bad conclusion {rhs!r}")
    return StepText(premises, intermediate(int(m.group(1))), m.group(2))


def parse_proof(text: str, context_size: int | None = None) -> LinearProof:
    """Parse proof text into steps, in written order.

    Raises ProofSyntaxError on malformed tokens, UnknownPremiseError when a
    premise is not yet available (or exceeds ``context_size`` when given),
    DuplicateConclusionError on repeated conclusions, and EmptyProofError
    when there are no steps at all.
    """
    if not isinstance(text, str):
        raise ProofSyntaxError("proof must be a string")
    pieces = [p for p in text.split(";") if p.strip()]
    if not pieces:
        raise EmptyProofError("proof has no steps")
    steps = []
    concluded: set[NodeId] = set()
    for piece in pieces:
        step = parse_step(piece)
        for p in step.premises:
            if p.kind is NodeKind.SENT:
                if context_size is not None and p.index > context_size:
                    raise UnknownPremiseError(f"premise {p} is outside the context")
            elif p not in concluded:
                raise UnknownPremiseError(f"premise {p} is not available")
        if step.conclusion in concluded:
            raise DuplicateConclusionError(f"{step.conclusion} concluded twice")
        concluded.add(step.conclusion)
        steps.append(step)
    return LinearProof(tuple(steps))


def canonicalize(proof: LinearProof) -> LinearProof:
    """Renumber intermediates 1..k in step order and sort premises."""
    renumber: dict[int, int] = {}
    steps = []
    for step in proof.steps:
        premises = tuple(
            sorted(
                (
                    intermediate(renumber[p.index]) if p.kind is NodeKind.INT else p
                    for p in step.premises
                ),
                key=lambda p: p.sort_key,
            )
        )
        if step.conclusion.kind is NodeKind.INT:
            renumber[step.conclusion.index] = len(renumber) + 1
            conclusion = intermediate(renumber[step.conclusion.index])
        else:
            conclusion = step.conclusion
        steps.append(StepText(premises, conclusion, step.text))
    return LinearProof(tuple(steps))


def serialize_proof(proof: LinearProof) -> str:
    """Canonical text for a proof; inverse of parse_proof up to renumbering."""
    return "; ".join(s.render() for s in canonicalize(proof).steps) + ";"


def structurally_equal(a: LinearProof, b: LinearProof) -> bool:
    """Equality modulo premise order and intermediate numbering."""
    return canonicalize(a) == canonicalize(b)


def proof_to_json(proof: LinearProof) -> dict:
    """Wire form: {"steps": [{"premises": [...], "conclusion": ..., "text": ...}]}."""
    return {
        "steps": [
            {
                "premises": [str(p) for p in s.premises],
                "conclusion": str(s.conclusion),
                "text": s.text,
            }
            for s in proof.steps
        ]
    }


def proof_from_json(obj: dict) -> LinearProof:
    try:
        raw_steps = obj["steps"]
    except (TypeError, KeyError):
        raise ProofSyntaxError("wire proof must be an object with a 'steps' list")
    if not isinstance(raw_steps, list):
        raise ProofSyntaxError("'steps' must be a list")
    steps = []
    for raw in raw_steps:
        if not isinstance(raw, dict):
            raise ProofSyntaxError("each step must be an object")
        premises = raw.get("premises")
        if not isinstance(premises, list):
            raise ProofSyntaxError("step premises must be a list")
        steps.append(
            StepText(
                tuple(parse_node_id(str(p)) for p in premises),
                parse_node_id(str(raw.get("conclusion"))),
                raw.get("text"),
            )
        )
    return LinearProof(tuple(steps))
