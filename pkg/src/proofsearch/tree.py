"""Proof trees: a linear proof grounded in a hypothesis and a context.

The tree view resolves identifiers to sentences and exposes the structure
queries evaluation needs (children, descendant leaves).  All sentences are
stored normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .dsl import (
    HYPOTHESIS,
    LinearProof,
    NodeId,
    NodeKind,
    StepText,
    canonicalize,
    normalize_sentence,
    parse_proof,
    serialize_proof,
)
from .errors import NoProofError, UnknownPremiseError


@dataclass(frozen=True)
class ProofTree:
    """A complete proof: context sentences, hypothesis, and its derivation.

    ``steps`` are in dependency order and exactly one of them concludes the
    hypothesis.  Intermediate indices follow the underlying linear proof.
    """

    hypothesis: str
    context: tuple[str, ...]
    proof: LinearProof

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypothesis", normalize_sentence(self.hypothesis))
        object.__setattr__(
            self, "context", tuple(normalize_sentence(s) for s in self.context)
        )
        roots = [s for s in self.proof.steps if s.conclusion.kind is NodeKind.HYPOTHESIS]
        if not roots:
            raise NoProofError("no step concludes the hypothesis")
        bound = self.proof.max_sent_index()
        if bound > len(self.context):
            raise UnknownPremiseError(
                f"proof references sent{bound} but the context has "
                f"{len(self.context)} sentences"
            )

    @classmethod
    def from_text(
        cls, proof_text: str, hypothesis: str, context: Sequence[str]
    ) -> "ProofTree":
        return cls(hypothesis, tuple(context), parse_proof(proof_text, len(context)))

    def to_text(self) -> str:
        return serialize_proof(self.proof)

    # --- structure queries -------------------------------------------------

    @property
    def steps(self) -> tuple[StepText, ...]:
        return self.proof.steps

    def step_concluding(self, node: NodeId) -> StepText:
        for s in self.proof.steps:
            if s.conclusion == node:
                return s
        raise KeyError(str(node))

    @property
    def root_step(self) -> StepText:
        return self.step_concluding(HYPOTHESIS)

    def int_indices(self) -> tuple[int, ...]:
        return tuple(
            s.conclusion.index
            for s in self.proof.steps
            if s.conclusion.kind is NodeKind.INT
        )

    def sentence_of(self, node: NodeId) -> str:
        if node.kind is NodeKind.SENT:
            return self.context[node.index - 1]
        if node.kind is NodeKind.HYPOTHESIS:
            return self.hypothesis
        text = self.step_concluding(node).text
        assert text is not None
        return text

    def children(self, node: NodeId) -> tuple[NodeId, ...]:
        """Premises of the step concluding ``node`` (empty for leaves)."""
        if node.kind is NodeKind.SENT:
            return ()
        return self.step_concluding(node).premises

    def leaf_ids(self) -> frozenset[int]:
        """Indices of every context sentence used as a premise."""
        return frozenset(
            p.index
            for s in self.proof.steps
            for p in s.premises
            if p.kind is NodeKind.SENT
        )

    def descendant_leaves(self, node: NodeId) -> frozenset[int]:
        """Context sentence indices reachable below ``node`` (itself if a leaf)."""
        if node.kind is NodeKind.SENT:
            return frozenset((node.index,))
        out: set[int] = set()
        stack = list(self.children(node))
        while stack:
            cur = stack.pop()
            if cur.kind is NodeKind.SENT:
                out.add(cur.index)
            else:
                stack.extend(self.children(cur))
        return frozenset(out)

    def canonical(self) -> "ProofTree":
        return ProofTree(self.hypothesis, self.context, canonicalize(self.proof))
