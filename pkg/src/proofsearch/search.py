"""Global proof search over the proof graph.

The search first commits a greedy proof (always taking the prover's best
valid step), then repeatedly: samples an unexplored partial proof from the
graph, asks the prover for candidate continuations, grades each candidate
with the verifier, and executes them against the graph best-first.  Node
scores only ever rise, so the final proof of the hypothesis is at least as
good as the greedy one.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Callable, Sequence

from .dsl import (
    HYPOTHESIS,
    LinearProof,
    NodeId,
    NodeKind,
    StepText,
    intermediate,
    normalize_sentence,
    sent,
    validate_step,
)
from .errors import (
    BridgeError,
    DomainError,
    InvalidStepError,
    ProverFailure,
    VerifierFailure,
)
from .graph import (
    ExecutionOutcome,
    PartialProof,
    ProofGraph,
    ProofStep,
    sample_partial_proof,
)
from .sources import Candidate, StepScorer, StepSource
from .tree import ProofTree
from .wire import check_score


class ScoreMix(Enum):
    """How prover confidence and verifier validity combine into a step score."""

    AVERAGE = "average"
    PROVER_ONLY = "prover_only"
    VERIFIER_ONLY = "verifier_only"


def mix_scores(p_score: float, v_score: float, mode: ScoreMix) -> float:
    for value, name in ((p_score, "prover score"), (v_score, "verifier score")):
        if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
            raise DomainError(f"{name} must be within [0, 1], got {value!r}")
    if mode is ScoreMix.PROVER_ONLY:
        return float(p_score)
    if mode is ScoreMix.VERIFIER_ONLY:
        return float(v_score)
    return (float(p_score) + float(v_score)) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    num_candidates: int = 10
    max_iterations: int = 50
    min_improvement: float = 1e-6
    score_mix: ScoreMix = ScoreMix.AVERAGE
    no_update_patience: int = 5  # consecutive unchanged iterations before stopping
    sample_max_retries: int = 32
    greedy_budget_factor: int = 2  # greedy may take this many steps per context sentence

    def __post_init__(self) -> None:
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations cannot be negative")
        if self.min_improvement < 0:
            raise ValueError("min_improvement cannot be negative")
        if self.no_update_patience < 1:
            raise ValueError("no_update_patience must be >= 1")
        if self.sample_max_retries < 1:
            raise ValueError("sample_max_retries must be >= 1")
        if self.greedy_budget_factor < 1:
            raise ValueError("greedy_budget_factor must be >= 1")


@dataclass
class SearchResult:
    proof: ProofTree | None
    proof_score: float
    iterations: int
    graph: ProofGraph
    stop_reason: str = ""
    failure: str | None = None


Tracer = Callable[[dict], None]


class JsonlTracer:
    """Writes one JSON line per trace record."""

    def __init__(self, fp: IO[str]):
        self._fp = fp

    def __call__(self, record: dict) -> None:
        self._fp.write(json.dumps(record, ensure_ascii=False) + "\n")


# --- resolving prover output against a proof state ----------------------------


def _resolve(
    step: StepText,
    context: Sequence[str],
    int_sentences: Sequence[str],
    hypothesis: str,
    score: float,
) -> ProofStep | None:
    """Map identifiers to sentences; None when the step is ill-formed here."""
    premises = []
    for p in step.premises:
        if p.kind is NodeKind.SENT:
            if p.index > len(context):
                return None
            premises.append(context[p.index - 1])
        else:
            if p.index > len(int_sentences):
                return None
            premises.append(int_sentences[p.index - 1])
    deduped = tuple(dict.fromkeys(premises))
    if step.conclusion.kind is NodeKind.HYPOTHESIS:
        return ProofStep(deduped, hypothesis, score, to_hypothesis=True)
    assert step.text is not None
    return ProofStep(deduped, step.text, score, to_hypothesis=False)


class _ProofState:
    """A growing linear proof plus the lookups candidates resolve against."""

    def __init__(self, hypothesis: str, context: Sequence[str]):
        self.hypothesis = normalize_sentence(hypothesis)
        self.context = tuple(normalize_sentence(s) for s in context)
        self.steps: list[StepText] = []
        self.scores: list[float] = []
        self.int_sentences: list[str] = []
        self.available: set[NodeId] = {sent(i + 1) for i in range(len(self.context))}
        self.known: set[str] = set(self.context) | {self.hypothesis}
        self.done = False

    def linear(self) -> LinearProof | None:
        return LinearProof(tuple(self.steps)) if self.steps else None

    def admissible(self, step: StepText) -> bool:
        if self.done or not validate_step(step, self.available):
            return False
        # re-deriving a sentence that is already present gains nothing here
        if step.conclusion.kind is NodeKind.INT and step.text in self.known:
            return False
        return True

    def commit(self, step: StepText, score: float) -> None:
        if step.conclusion.kind is NodeKind.HYPOTHESIS:
            self.steps.append(step)
            self.done = True
        else:
            assert step.text is not None
            relabeled = StepText(
                step.premises, intermediate(len(self.int_sentences) + 1), step.text
            )
            self.steps.append(relabeled)
            self.int_sentences.append(step.text)
            self.available.add(relabeled.conclusion)
            self.known.add(step.text)
        self.scores.append(score)


def _greedy_state(
    prover: StepSource,
    hypothesis: str,
    context: Sequence[str],
    config: SearchConfig,
) -> _ProofState:
    state = _ProofState(hypothesis, context)
    budget = config.greedy_budget_factor * max(1, len(state.context))
    for _ in range(budget):
        if state.done:
            break
        candidates = prover.generate(
            hypothesis, context, state.linear(), config.num_candidates
        )
        best: Candidate | None = None
        for candidate in candidates:
            if not state.admissible(candidate.step):
                continue
            if best is None or candidate.score > best.score:
                best = candidate
        if best is None:
            break  # single pass: a turn yielding no usable step ends the decode
        state.commit(best.step, check_score(best.score))
    return state


def generate_greedy(
    prover: StepSource,
    hypothesis: str,
    context: Sequence[str],
    config: SearchConfig = SearchConfig(),
) -> LinearProof | None:
    """Greedy decoding alone: commit the prover's best valid step each turn
    until one concludes the hypothesis or the step budget runs out."""
    return _greedy_state(prover, hypothesis, context, config).linear()


# --- the search loop -----------------------------------------------------------


def _result(
    graph: ProofGraph, iterations: int, stop_reason: str, failure: str | None = None
) -> SearchResult:
    proof: ProofTree | None = None
    if graph.hypothesis.inbound is not None:
        proof = graph.extract_proof()
    return SearchResult(
        proof=proof,
        proof_score=graph.proof_score,
        iterations=iterations,
        graph=graph,
        stop_reason=stop_reason,
        failure=failure,
    )


def _initialize(
    state: _ProofState,
    verifier: StepScorer,
    config: SearchConfig,
    tracer: Tracer | None,
) -> tuple[ProofGraph, str | None]:
    graph = ProofGraph(state.hypothesis, state.context)
    failure: str | None = None
    records = []
    for step, p_score in zip(state.steps, state.scores):
        resolved = _resolve(
            step, state.context, state.int_sentences, state.hypothesis, 0.0
        )
        assert resolved is not None  # greedy only commits resolvable steps
        try:
            v_score = verifier.score(resolved.premises, resolved.conclusion)
        except (VerifierFailure, BridgeError) as exc:
            failure = f"verifier: {exc}"
            break
        mixed = mix_scores(p_score, check_score(v_score), config.score_mix)
        outcome = graph.execute_step(replace(resolved, score=mixed))
        records.append(
            {
                "step": step.render(),
                "p_score": p_score,
                "v_score": v_score,
                "score": mixed,
                "outcome": outcome.value,
            }
        )
    if tracer is not None:
        tracer(
            {
                "type": "greedy_init",
                "steps": records,
                "hypothesis_score": graph.proof_score,
            }
        )
    return graph, failure


def run_greedy(
    prover: StepSource,
    verifier: StepScorer,
    hypothesis: str,
    context: Sequence[str],
    config: SearchConfig = SearchConfig(),
    tracer: Tracer | None = None,
) -> SearchResult:
    """Greedy decoding scored like the search would score it, no exploration."""
    try:
        state = _greedy_state(prover, hypothesis, context, config)
    except (ProverFailure, BridgeError) as exc:
        graph = ProofGraph(hypothesis, context)
        return _result(graph, 0, "aborted", failure=f"prover: {exc}")
    graph, failure = _initialize(state, verifier, config, tracer)
    return _result(graph, 0, "aborted" if failure else "greedy", failure=failure)


def run_search(
    prover: StepSource,
    verifier: StepScorer,
    hypothesis: str,
    context: Sequence[str],
    config: SearchConfig = SearchConfig(),
    rng: random.Random | None = None,
    tracer: Tracer | None = None,
) -> SearchResult:
    """Full proof search; see the module docstring.

    Stops when partial-proof sampling is exhausted, when
    ``no_update_patience`` consecutive iterations change nothing, or after
    ``max_iterations``.  Source failures end the search early with the best
    graph found so far and the failure recorded on the result.
    """
    rng = rng if rng is not None else random.Random(0)
    try:
        state = _greedy_state(prover, hypothesis, context, config)
    except (ProverFailure, BridgeError) as exc:
        graph = ProofGraph(hypothesis, context)
        return _result(graph, 0, "aborted", failure=f"prover: {exc}")
    graph, failure = _initialize(state, verifier, config, tracer)
    if failure is not None:
        return _result(graph, 0, "aborted", failure=failure)

    explored: set[tuple[str, ...]] = set()
    streak = 0
    iterations = 0
    stop_reason = "max_iterations"
    while iterations < config.max_iterations:
        partial = sample_partial_proof(graph, explored, rng, config.sample_max_retries)
        if partial is None:
            stop_reason = "samples_exhausted"
            break
        explored.add(partial.fingerprint)
        iterations += 1
        try:
            candidates = prover.generate(
                hypothesis, context, partial.proof, config.num_candidates
            )[: config.num_candidates]
        except (ProverFailure, BridgeError) as exc:
            return _result(graph, iterations, "aborted", failure=f"prover: {exc}")

        available = {sent(i + 1) for i in range(len(state.context))} | {
            intermediate(i + 1) for i in range(len(partial.int_sentences))
        }
        resolved: list[tuple[Candidate, ProofStep | None]] = []
        for candidate in candidates:
            step = None
            if validate_step(candidate.step, available):
                step = _resolve(
                    candidate.step,
                    state.context,
                    partial.int_sentences,
                    state.hypothesis,
                    0.0,
                )
            resolved.append((candidate, step))

        try:
            v_scores = [
                None
                if step is None
                else check_score(verifier.score(step.premises, step.conclusion))
                for _, step in resolved
            ]
        except (VerifierFailure, BridgeError) as exc:
            return _result(graph, iterations, "aborted", failure=f"verifier: {exc}")

        mixed = [
            None
            if v is None
            else mix_scores(check_score(candidate.score), v, config.score_mix)
            for (candidate, _), v in zip(resolved, v_scores)
        ]
        order = sorted(
            (i for i in range(len(resolved)) if mixed[i] is not None),
            key=lambda i: (-mixed[i], i),  # type: ignore[operator]
        )
        changed = False
        outcomes: list[str] = ["filtered"] * len(resolved)
        for i in order:
            candidate, step = resolved[i]
            assert step is not None and mixed[i] is not None
            before = graph.score_of(step.conclusion)
            try:
                outcome = graph.execute_step(replace(step, score=mixed[i]))
            except InvalidStepError:
                outcomes[i] = "invalid"
                continue
            outcomes[i] = outcome.value
            if outcome is ExecutionOutcome.CREATED:
                changed = True
            elif outcome is ExecutionOutcome.IMPROVED:
                after = graph.score_of(step.conclusion)
                assert after is not None
                if after - (before or 0.0) >= config.min_improvement:
                    changed = True

        if tracer is not None:
            tracer(
                {
                    "type": "iteration",
                    "iteration": iterations,
                    "partial": list(partial.fingerprint),
                    "candidates": [c.step.render() for c, _ in resolved],
                    "p_scores": [c.score for c, _ in resolved],
                    "v_scores": v_scores,
                    "scores": mixed,
                    "outcomes": outcomes,
                    "hypothesis_score": graph.proof_score,
                }
            )
        streak = 0 if changed else streak + 1
        if streak >= config.no_update_patience:
            stop_reason = "no_progress"
            break

    return _result(graph, iterations, stop_reason)
