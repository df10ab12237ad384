"""Mutable proof graph accumulated during search.

Nodes are sentences: the given context (always score 1.0), derived
intermediates, and the hypothesis.  Each derived node keeps at most one
inbound step; a node's score is the minimum of its step's score and its
premises' scores, so a proof is only as good as its weakest link.
Executing a step either creates a node, replaces a weaker derivation and
propagates the improvement downstream, or does nothing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from math import isfinite
from typing import Iterable, Sequence

from .dsl import (
    HYPOTHESIS,
    LinearProof,
    NodeId,
    NodeKind,
    StepText,
    intermediate,
    normalize_sentence,
    sent,
)
from .errors import DomainError, InvalidStepError, NoProofError
from .tree import ProofTree


def _check_score(value: float, what: str = "score") -> float:
    value = float(value)
    if not isfinite(value) or not 0.0 <= value <= 1.0:
        raise DomainError(f"{what} must be a finite number in [0, 1], got {value!r}")
    return value


def node_score(step_score: float, child_scores: Iterable[float]) -> float:
    """Weakest-link aggregation: min over the step score and all premises."""
    out = _check_score(step_score, "step score")
    for c in child_scores:
        out = min(out, _check_score(c, "premise score"))
    return out


class ExecutionOutcome(Enum):
    NOOP = "noop"
    CREATED = "created"
    IMPROVED = "improved"


@dataclass(eq=False)
class GraphNode:
    node_id: NodeId
    sentence: str
    score: float
    inbound: "StepNode | None" = None


@dataclass(eq=False)
class StepNode:
    premises: tuple[GraphNode, ...]
    conclusion: GraphNode
    score: float


@dataclass(frozen=True)
class ProofStep:
    """The unit exchanged between prover, verifier, and graph.

    Premises and conclusion are sentences; ``to_hypothesis`` marks steps
    that close the proof at the root (their conclusion text is the
    hypothesis itself).
    """

    premises: tuple[str, ...]
    conclusion: str
    score: float
    to_hypothesis: bool = False


class ProofGraph:
    """Context sentences, hypothesis, and every derivation found so far."""

    def __init__(self, hypothesis: str, context: Sequence[str]):
        self.hypothesis = GraphNode(HYPOTHESIS, normalize_sentence(hypothesis), 0.0)
        self.facts: list[GraphNode] = [
            GraphNode(sent(i + 1), normalize_sentence(s), 1.0)
            for i, s in enumerate(context)
        ]
        self.intermediates: list[GraphNode] = []
        self._fact_by_sentence: dict[str, GraphNode] = {}
        for node in self.facts:
            self._fact_by_sentence.setdefault(node.sentence, node)
        self._int_by_sentence: dict[str, GraphNode] = {}
        # out-edges: node -> steps currently using it as a premise
        self._uses: dict[int, list[StepNode]] = {}

    # --- bookkeeping --------------------------------------------------------

    @property
    def context(self) -> tuple[str, ...]:
        return tuple(n.sentence for n in self.facts)

    def nodes(self) -> list[GraphNode]:
        return [*self.facts, *self.intermediates, self.hypothesis]

    def derived_nodes(self) -> list[GraphNode]:
        return [*self.intermediates, self.hypothesis]

    def active_steps(self) -> list[StepNode]:
        return [n.inbound for n in self.derived_nodes() if n.inbound is not None]

    def resolve(self, sentence: str) -> GraphNode | None:
        sentence = normalize_sentence(sentence)
        node = self._fact_by_sentence.get(sentence)
        if node is not None:
            return node
        if sentence == self.hypothesis.sentence:
            return self.hypothesis
        return self._int_by_sentence.get(sentence)

    def score_of(self, sentence: str) -> float | None:
        node = self.resolve(sentence)
        return None if node is None else node.score

    @property
    def proof_score(self) -> float:
        return self.hypothesis.score

    def _successors(self, node: GraphNode) -> list[StepNode]:
        return self._uses.get(id(node), [])

    def _attach(self, step: StepNode) -> None:
        step.conclusion.inbound = step
        for p in step.premises:
            self._uses.setdefault(id(p), []).append(step)

    def _detach(self, step: StepNode) -> None:
        for p in step.premises:
            bucket = self._uses.get(id(p), [])
            if step in bucket:
                bucket.remove(step)

    def _reaches(self, start: GraphNode, targets: set[int]) -> bool:
        """True when some node in ``targets`` is derivable from ``start``."""
        seen: set[int] = set()
        stack = [start]
        while stack:
            cur = stack.pop()
            if id(cur) in targets:
                return True
            if id(cur) in seen:
                continue
            seen.add(id(cur))
            for step in self._successors(cur):
                stack.append(step.conclusion)
        return False

    # --- mutation -----------------------------------------------------------

    def execute_step(self, step: ProofStep) -> ExecutionOutcome:
        """Apply one candidate step; see the module docstring for semantics."""
        score = _check_score(step.score, "step score")
        if not step.premises:
            raise InvalidStepError("a step needs at least one premise")
        premises: list[GraphNode] = []
        for text in step.premises:
            node = self.resolve(text)
            if node is None:
                raise InvalidStepError(f"unknown premise sentence {text!r}")
            if node is self.hypothesis:
                raise InvalidStepError("the hypothesis cannot be a premise")
            if node not in premises:
                premises.append(node)

        conclusion_text = normalize_sentence(step.conclusion)
        if step.to_hypothesis:
            conclusion = self.hypothesis
        else:
            if not conclusion_text:
                raise InvalidStepError("empty conclusion")
            if conclusion_text in self._fact_by_sentence:
                raise InvalidStepError("a step cannot conclude a given sentence")
            if conclusion_text == self.hypothesis.sentence:
                conclusion = self.hypothesis
            else:
                conclusion = self._int_by_sentence.get(conclusion_text)  # type: ignore[assignment]

        if conclusion is not None and any(p is conclusion for p in premises):
            raise InvalidStepError("a step cannot conclude one of its own premises")

        tentative = node_score(score, (p.score for p in premises))

        if conclusion is None:
            node = GraphNode(
                intermediate(len(self.intermediates) + 1), conclusion_text, tentative
            )
            self.intermediates.append(node)
            self._int_by_sentence[conclusion_text] = node
            self._attach(StepNode(tuple(premises), node, score))
            return ExecutionOutcome.CREATED

        if tentative <= conclusion.score:
            return ExecutionOutcome.NOOP

        # An update whose conclusion already derives one of its premises would
        # close a loop.  Consistent scores make this branch unreachable (the
        # comparison above already rejects it); keep it as a hard guard.
        if self._reaches(conclusion, {id(p) for p in premises}):
            return ExecutionOutcome.NOOP

        first_derivation = conclusion.inbound is None
        if conclusion.inbound is not None:
            self._detach(conclusion.inbound)
        conclusion.score = tentative
        self._attach(StepNode(tuple(premises), conclusion, score))
        self._propagate_from(conclusion)
        return (
            ExecutionOutcome.CREATED if first_derivation else ExecutionOutcome.IMPROVED
        )

    def _propagate_from(self, node: GraphNode) -> None:
        """Recompute downstream scores after ``node``'s score rose."""
        stack = [node]
        while stack:
            cur = stack.pop()
            for step in self._successors(cur):
                updated = node_score(step.score, (p.score for p in step.premises))
                if updated != step.conclusion.score:
                    step.conclusion.score = updated
                    stack.append(step.conclusion)

    # --- extraction and export ----------------------------------------------

    def extract_proof(self) -> ProofTree:
        """The proof of the hypothesis: all of its predecessors, as a tree."""
        if self.hypothesis.inbound is None:
            raise NoProofError("the hypothesis has no derivation")
        ordered: list[GraphNode] = []
        seen: set[int] = set()

        def visit(node: GraphNode) -> None:
            if id(node) in seen or node.inbound is None:
                return
            seen.add(id(node))
            for p in node.inbound.premises:
                visit(p)
            ordered.append(node)

        visit(self.hypothesis)
        label = {id(n): i + 1 for i, n in enumerate(n for n in ordered if n is not self.hypothesis)}

        def ref(node: GraphNode) -> NodeId:
            if node.node_id.kind is NodeKind.SENT:
                return node.node_id
            return intermediate(label[id(node)])

        steps = []
        for node in ordered:
            assert node.inbound is not None
            premises = tuple(
                sorted((ref(p) for p in node.inbound.premises), key=lambda p: p.sort_key)
            )
            if node is self.hypothesis:
                steps.append(StepText(premises, HYPOTHESIS, None))
            else:
                steps.append(StepText(premises, intermediate(label[id(node)]), node.sentence))
        return ProofTree(self.hypothesis.sentence, self.context, LinearProof(tuple(steps)))

    def is_acyclic(self) -> bool:
        """Defensive check: no node derives itself through active steps."""
        colors: dict[int, int] = {}

        def dfs(node: GraphNode) -> bool:
            state = colors.get(id(node), 0)
            if state == 1:
                return False
            if state == 2:
                return True
            colors[id(node)] = 1
            for step in self._successors(node):
                if not dfs(step.conclusion):
                    return False
            colors[id(node)] = 2
            return True

        return all(dfs(n) for n in self.nodes())

    def to_debug_json(self) -> dict:
        ids = {id(n): str(n.node_id) for n in self.facts}
        ids[id(self.hypothesis)] = "hypothesis"
        for node in self.intermediates:
            ids[id(node)] = str(node.node_id)
        nodes = [
            {"id": ids[id(n)], "sentence": n.sentence, "score": n.score}
            for n in self.nodes()
        ]
        steps = [
            {
                "premises": sorted((ids[id(p)] for p in s.premises)),
                "conclusion": ids[id(s.conclusion)],
                "score": s.score,
            }
            for s in self.active_steps()
        ]
        return {"nodes": nodes, "steps": steps}


@dataclass(frozen=True)
class PartialProof:
    """A predecessor-closed subset of the graph's intermediates.

    ``proof`` is the induced derivation with intermediates renumbered 1..k
    in dependency order; ``int_sentences[i]`` is the sentence behind
    ``int{i+1}``, letting callers map candidate steps back onto graph nodes.
    A partial proof with no intermediates has ``proof`` None.
    """

    int_sentences: tuple[str, ...]
    proof: LinearProof | None
    fingerprint: tuple[str, ...]


def _topo_intermediates(graph: ProofGraph) -> list[GraphNode]:
    """Intermediates ordered predecessors-first, deterministically."""
    order_hint = {id(n): i for i, n in enumerate(graph.intermediates)}
    done: set[int] = set()
    out: list[GraphNode] = []

    def visit(node: GraphNode) -> None:
        if id(node) in done or node.node_id.kind is not NodeKind.INT:
            return
        done.add(id(node))
        if node.inbound is not None:
            for p in sorted(node.inbound.premises, key=lambda n: order_hint.get(id(n), -1)):
                visit(p)
        out.append(node)

    for node in graph.intermediates:
        visit(node)
    return out


def _partial_from_nodes(
    graph: ProofGraph, included: set[int], topo: list[GraphNode]
) -> PartialProof:
    chosen = [n for n in topo if id(n) in included]
    fingerprint = tuple(sorted(n.sentence for n in chosen))
    if not chosen:
        return PartialProof((), None, fingerprint)
    label = {id(n): i + 1 for i, n in enumerate(chosen)}
    steps = []
    for node in chosen:
        assert node.inbound is not None
        premises = []
        for p in node.inbound.premises:
            if p.node_id.kind is NodeKind.SENT:
                premises.append(p.node_id)
            else:
                premises.append(intermediate(label[id(p)]))
        premises.sort(key=lambda q: q.sort_key)
        steps.append(StepText(tuple(premises), intermediate(label[id(node)]), node.sentence))
    return PartialProof(
        tuple(n.sentence for n in chosen), LinearProof(tuple(steps)), fingerprint
    )


def sample_partial_proof(
    graph: ProofGraph,
    explored: set[tuple[str, ...]],
    rng: random.Random,
    max_retries: int = 32,
) -> PartialProof | None:
    """Draw an unexplored partial proof, or None after ``max_retries`` draws.

    Intermediates are visited successors before predecessors; each unvisited
    node joins with probability 0.5, and joining drags in all of its
    predecessors (marked visited without their own draw), keeping the subset
    closed under derivation.
    """
    topo = _topo_intermediates(graph)
    predecessors: dict[int, set[int]] = {}
    for node in topo:  # topo order guarantees predecessor sets already exist
        acc: set[int] = set()
        if node.inbound is not None:
            for p in node.inbound.premises:
                if p.node_id.kind is NodeKind.INT:
                    acc.add(id(p))
                    acc |= predecessors[id(p)]
        predecessors[id(node)] = acc

    for _ in range(max_retries):
        included: set[int] = set()
        visited: set[int] = set()
        for node in reversed(topo):
            if id(node) in visited:
                continue
            visited.add(id(node))
            if rng.random() < 0.5:
                included.add(id(node))
                for p in predecessors[id(node)]:
                    included.add(p)
                    visited.add(p)
        partial = _partial_from_nodes(graph, included, topo)
        if partial.fingerprint not in explored:
            return partial
    return None
