"""Candidate step generators and step validity scorers.

The search engine only sees two interfaces: a StepSource proposes scored
candidate steps given the hypothesis, context, and a partial proof; a
StepScorer grades a single step's validity in [0, 1].  Deterministic
closed-world implementations over the synthetic domain live here next to
adapters that speak the wire protocol to external model servers.
"""

from __future__ import annotations

import json
import random
import select
import subprocess
import time
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

from . import wire
from .dsl import (
    HYPOTHESIS,
    LinearProof,
    NodeId,
    NodeKind,
    StepText,
    intermediate,
    normalize_sentence,
    parse_step,
    sent,
    serialize_proof,
)
from .errors import (
    BridgeProtocolError,
    BridgeTimeout,
    BridgeUnavailable,
)
from .synth import Atom, Rule, parse_statement
from .tree import ProofTree


class Candidate(NamedTuple):
    step: StepText
    score: float  # the proposer's own confidence


class StepSource(ABC):
    """Proposes up to n candidate steps; candidates may be ill-formed with
    respect to the current graph, the engine filters them."""

    @abstractmethod
    def generate(
        self,
        hypothesis: str,
        context: Sequence[str],
        partial_proof: LinearProof | None,
        n: int,
    ) -> list[Candidate]:
        ...


class StepScorer(ABC):
    """Grades one step's validity: premises and conclusion are sentences."""

    @abstractmethod
    def score(self, premises: Sequence[str], conclusion: str) -> float:
        ...

    def score_many(
        self, items: Sequence[tuple[Sequence[str], str]]
    ) -> list[float]:
        return [self.score(premises, conclusion) for premises, conclusion in items]


# --- closed-world sources over the synthetic domain ---------------------------


@lru_cache(maxsize=256)
def _parsed_context(context: tuple[str, ...]) -> tuple[
    dict[tuple[str, str], int], tuple[tuple[Rule, int], ...]
]:
    """(positive fact atom -> sent index, rules with their sent indices)."""
    facts: dict[tuple[str, str], int] = {}
    rules: list[tuple[Rule, int]] = []
    for i, sentence in enumerate(context):
        parsed = parse_statement(sentence)
        if isinstance(parsed, Atom) and parsed.positive:
            facts.setdefault((parsed.entity, parsed.attribute), i + 1)
        elif isinstance(parsed, Rule):
            rules.append((parsed, i + 1))
    return facts, tuple(rules)


def _partial_atoms(partial: LinearProof | None) -> dict[tuple[str, str], int]:
    """Positive atoms concluded by a partial proof -> int index."""
    out: dict[tuple[str, str], int] = {}
    if partial is None:
        return out
    for step in partial.steps:
        if step.conclusion.kind is not NodeKind.INT or step.text is None:
            continue
        parsed = parse_statement(step.text)
        if isinstance(parsed, Atom) and parsed.positive:
            out.setdefault((parsed.entity, parsed.attribute), step.conclusion.index)
    return out


def _goal_atom(hypothesis: str) -> tuple[str, str] | None:
    """The positive atom a provable hypothesis reduces to, if any."""
    parsed = parse_statement(hypothesis)
    if isinstance(parsed, Atom) and parsed.positive:
        return (parsed.entity, parsed.attribute)
    return None


class ExactProver(StepSource):
    """One round of forward chaining over the parsed context.

    Every context rule whose antecedent is available (a given fact or an
    intermediate of the partial proof) and whose consequent is not yet
    available yields a candidate; when the derived consequent matches the
    hypothesis the candidate concludes the proof, and a hypothesis already
    available verbatim yields the single selection step.  Candidates whose
    conclusion sits on a chain towards the hypothesis rank first.
    """

    def generate(
        self,
        hypothesis: str,
        context: Sequence[str],
        partial_proof: LinearProof | None,
        n: int,
    ) -> list[Candidate]:
        norm_context = tuple(normalize_sentence(s) for s in context)
        facts, rules = _parsed_context(norm_context)
        derived = _partial_atoms(partial_proof)
        next_int = max(derived.values(), default=0)
        if partial_proof is not None:
            next_int = max(
                next_int,
                max(
                    (
                        s.conclusion.index
                        for s in partial_proof.steps
                        if s.conclusion.kind is NodeKind.INT
                    ),
                    default=0,
                ),
            )
        goal = _goal_atom(hypothesis)

        def source_of(atom: tuple[str, str]) -> NodeId | None:
            if atom in facts:
                return sent(facts[atom])
            if atom in derived:
                return intermediate(derived[atom])
            return None

        # which attributes can still lead to the goal, for ranking
        relevant: set[tuple[str, str]] = set()
        if goal is not None:
            relevant.add(goal)
            grew = True
            while grew:
                grew = False
                for rule, _ in rules:
                    head = (rule.entity, rule.consequent)
                    tail = (rule.entity, rule.antecedent)
                    if head in relevant and tail not in relevant:
                        relevant.add(tail)
                        grew = True

        candidates: list[Candidate] = []
        if goal is not None:
            origin = source_of(goal)
            if origin is not None:
                candidates.append(Candidate(StepText((origin,), HYPOTHESIS, None), 1.0))
        for rule, rule_idx in rules:
            tail = (rule.entity, rule.antecedent)
            head = (rule.entity, rule.consequent)
            origin = source_of(tail)
            if origin is None or source_of(head) is not None:
                continue
            premises = tuple(sorted((sent(rule_idx), origin), key=lambda p: p.sort_key))
            if goal is not None and head == goal:
                candidates.append(Candidate(StepText(premises, HYPOTHESIS, None), 1.0))
            else:
                text = f"{head[0]} is {head[1]}"
                candidates.append(
                    Candidate(StepText(premises, intermediate(next_int + 1), text), 1.0)
                )
        ranked = sorted(
            range(len(candidates)),
            key=lambda i: (
                0
                if candidates[i].step.conclusion.kind is NodeKind.HYPOTHESIS
                or _conclusion_atom(candidates[i].step) in relevant
                else 1,
                i,
            ),
        )
        return [candidates[i] for i in ranked[:n]]


def _conclusion_atom(step: StepText) -> tuple[str, str] | None:
    if step.text is None:
        return None
    parsed = parse_statement(step.text)
    if isinstance(parsed, Atom) and parsed.positive:
        return (parsed.entity, parsed.attribute)
    return None


class NoisyProver(StepSource):
    """Degrades an inner prover: drops candidates and injects hallucinations.

    Each inner candidate is independently dropped with probability ``drop``;
    with probability ``inject`` one fabricated step (random available
    premises concluding the hypothesis) is appended with a confidence drawn
    from U[0.5, 1].  Draws come from a private seeded stream, so runs with
    the same seed and call sequence are identical.
    """

    def __init__(
        self, inner: StepSource, drop: float = 0.3, inject: float = 0.3, seed: int = 0
    ):
        if not 0 <= drop <= 1 or not 0 <= inject <= 1:
            raise ValueError("drop and inject must be probabilities")
        self.inner = inner
        self.drop = drop
        self.inject = inject
        self._rng = random.Random(seed)

    def generate(
        self,
        hypothesis: str,
        context: Sequence[str],
        partial_proof: LinearProof | None,
        n: int,
    ) -> list[Candidate]:
        rng = self._rng
        kept = [
            c
            for c in self.inner.generate(hypothesis, context, partial_proof, n)
            if rng.random() >= self.drop
        ]
        if rng.random() < self.inject:
            available: list[NodeId] = [sent(i + 1) for i in range(len(context))]
            if partial_proof is not None:
                available.extend(
                    s.conclusion
                    for s in partial_proof.steps
                    if s.conclusion.kind is NodeKind.INT
                )
            k = rng.randint(1, min(3, len(available))) if available else 0
            if k:
                premises = tuple(
                    sorted(rng.sample(available, k), key=lambda p: p.sort_key)
                )
                kept.append(
                    Candidate(StepText(premises, HYPOTHESIS, None), rng.uniform(0.5, 1.0))
                )
        return kept[:n]


class ExactVerifier(StepScorer):
    """Entailment check over the synthetic domain: 1.0 or 0.0.

    A multi-premise step must be one genuine rule application: some premise
    rule fires on a premise atom and derives exactly the conclusion's
    positive form; copying a premise while ignoring the rest scores 0.  A
    single-premise step is the degenerate selection: it scores 1.0 only when
    premise and conclusion reduce to the same positive atom.  Everything
    else, including conclusions unreachable from the premises, scores 0.
    """

    def score(self, premises: Sequence[str], conclusion: str) -> float:
        goal = _goal_atom(conclusion)
        if goal is None or not premises:
            return 0.0
        parsed = [parse_statement(p) for p in premises]
        if len(parsed) == 1:
            atom = parsed[0]
            if isinstance(atom, Atom) and atom.positive:
                return 1.0 if (atom.entity, atom.attribute) == goal else 0.0
            return 0.0
        atoms = {
            (p.entity, p.attribute)
            for p in parsed
            if isinstance(p, Atom) and p.positive
        }
        for p in parsed:
            if (
                isinstance(p, Rule)
                and (p.entity, p.antecedent) in atoms
                and (p.entity, p.consequent) == goal
            ):
                return 1.0
        return 0.0


# --- gold-knowledge wrappers ---------------------------------------------------


def _gold_wire_steps(gold: ProofTree) -> list[tuple[tuple[str, ...], str, bool]]:
    """Gold steps as (premise sentences, conclusion sentence, closes proof)."""
    out = []
    for step in gold.steps:
        premises = tuple(gold.sentence_of(p) for p in step.premises)
        if step.conclusion.kind is NodeKind.HYPOTHESIS:
            out.append((premises, gold.hypothesis, True))
        else:
            assert step.text is not None
            out.append((premises, step.text, False))
    return out


class OracleProver(StepSource):
    """Adds every gold step whose premises the partial proof satisfies.

    Gold candidates carry full confidence and come first; the inner
    prover's output (if any) follows.  The context must match the one the
    gold proof was written against.
    """

    def __init__(self, gold: ProofTree, inner: StepSource | None = None):
        self.gold = gold
        self.inner = inner

    def generate(
        self,
        hypothesis: str,
        context: Sequence[str],
        partial_proof: LinearProof | None,
        n: int,
    ) -> list[Candidate]:
        norm_context = tuple(normalize_sentence(s) for s in context)
        sent_index = {s: i + 1 for i, s in reversed(list(enumerate(norm_context)))}
        have: dict[str, int] = {}
        next_int = 0
        if partial_proof is not None:
            for step in partial_proof.steps:
                if step.conclusion.kind is NodeKind.INT and step.text is not None:
                    have[step.text] = step.conclusion.index
                    next_int = max(next_int, step.conclusion.index)

        candidates: list[Candidate] = []
        for premises, conclusion, closes in _gold_wire_steps(self.gold):
            if not closes and conclusion in have:
                continue
            refs: list[NodeId] = []
            ok = True
            for text in premises:
                if text in have:
                    refs.append(intermediate(have[text]))
                elif text in sent_index:
                    refs.append(sent(sent_index[text]))
                else:
                    ok = False
                    break
            if not ok:
                continue
            refs.sort(key=lambda p: p.sort_key)
            if closes:
                candidates.append(Candidate(StepText(tuple(refs), HYPOTHESIS, None), 1.0))
            else:
                candidates.append(
                    Candidate(
                        StepText(tuple(refs), intermediate(next_int + 1), conclusion), 1.0
                    )
                )
        if self.inner is not None and len(candidates) < n:
            candidates.extend(
                self.inner.generate(hypothesis, context, partial_proof, n)
            )
        return candidates[:n]


class OracleVerifier(StepScorer):
    """Scores gold steps 1.0 and defers to the inner scorer otherwise."""

    def __init__(self, gold: ProofTree, inner: StepScorer):
        self.inner = inner
        self._gold_keys = {
            (frozenset(premises), conclusion)
            for premises, conclusion, _ in _gold_wire_steps(gold)
        }

    def score(self, premises: Sequence[str], conclusion: str) -> float:
        key = (
            frozenset(normalize_sentence(p) for p in premises),
            normalize_sentence(conclusion),
        )
        if key in self._gold_keys:
            return 1.0
        return self.inner.score(premises, conclusion)


# --- external bridge adapters ----------------------------------------------------


class Transport(ABC):
    """A way to exchange one JSON payload with a model server."""

    @abstractmethod
    def request(self, payload: dict) -> object:
        ...

    def close(self) -> None:  # pragma: no cover - trivial default
        pass


class StdioTransport(Transport):
    """Newline-delimited JSON over a child process's stdin/stdout."""

    def __init__(
        self,
        command: Sequence[str],
        timeout: float = 30.0,
        tracer: Callable[[dict], None] | None = None,
    ):
        self.command = list(command)
        self.timeout = timeout
        self.tracer = tracer
        self._proc: subprocess.Popen[str] | None = None

    def _process(self) -> subprocess.Popen[str]:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise BridgeUnavailable(f"cannot start {self.command!r}: {exc}") from exc
        return self._proc

    def _read_line(self, proc: subprocess.Popen[str]) -> str:
        assert proc.stdout is not None
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BridgeTimeout(f"no reply within {self.timeout}s")
            ready, _, _ = select.select([proc.stdout], [], [], remaining)
            if not ready:
                continue
            line = proc.stdout.readline()
            if line == "":
                raise BridgeUnavailable("bridge process closed its stdout")
            if line.strip():
                return line

    def send_raw(self, frame: str) -> object:
        proc = self._process()
        assert proc.stdin is not None
        started = time.monotonic()
        try:
            proc.stdin.write(frame.rstrip("\n") + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeUnavailable(f"bridge process is gone: {exc}") from exc
        line = self._read_line(proc)
        if self.tracer is not None:
            self.tracer(
                {
                    "type": "bridge_call",
                    "transport": "stdio",
                    "latency_s": time.monotonic() - started,
                }
            )
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"bridge sent malformed JSON: {exc}") from exc

    def request(self, payload: dict) -> object:
        return self.send_raw(wire.encode_frame(payload))

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._proc = None


class HttpTransport(Transport):
    """One JSON POST per request."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        tracer: Callable[[dict], None] | None = None,
    ):
        self.url = url
        self.timeout = timeout
        self.tracer = tracer

    def send_raw(self, body: str) -> object:
        request = urllib.request.Request(
            self.url,
            data=body.encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        started = time.monotonic()
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                raw = response.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            # servers report bad requests with an error body; surface it
            raw = exc.read().decode("utf-8", errors="replace")
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise BridgeTimeout(f"no reply within {self.timeout}s") from exc
            raise BridgeUnavailable(f"cannot reach {self.url}: {exc.reason}") from exc
        except TimeoutError as exc:
            raise BridgeTimeout(f"no reply within {self.timeout}s") from exc
        if self.tracer is not None:
            self.tracer(
                {
                    "type": "bridge_call",
                    "transport": "http",
                    "latency_s": time.monotonic() - started,
                }
            )
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"bridge sent malformed JSON: {exc}") from exc

    def request(self, payload: dict) -> object:
        return self.send_raw(wire.encode_frame(payload))


class ExternalProver(StepSource):
    """Wire-protocol client for candidate generation.

    Responses are validated (shape and score range); candidates whose step
    text does not parse are dropped and counted in ``dropped_candidates``,
    the engine would filter them anyway.
    """

    def __init__(self, transport: Transport):
        self.transport = transport
        self.dropped_candidates = 0

    def generate(
        self,
        hypothesis: str,
        context: Sequence[str],
        partial_proof: LinearProof | None,
        n: int,
    ) -> list[Candidate]:
        partial_text = "" if partial_proof is None else serialize_proof(partial_proof)
        response = self.transport.request(
            wire.build_generate_request(hypothesis, context, partial_text, n)
        )
        out: list[Candidate] = []
        for step_text, score in wire.parse_generate_response(response):
            try:
                out.append(Candidate(parse_step(step_text), score))
            except Exception:  # noqa: BLE001 - any unparseable candidate
                self.dropped_candidates += 1
        return out[:n]


class ExternalVerifier(StepScorer):
    """Wire-protocol client for step scoring."""

    def __init__(self, transport: Transport):
        self.transport = transport

    def score(self, premises: Sequence[str], conclusion: str) -> float:
        response = self.transport.request(
            wire.build_score_request(premises, conclusion)
        )
        return wire.parse_score_response(response)
