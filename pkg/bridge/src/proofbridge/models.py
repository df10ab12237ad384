"""Stand-in models for step generation and scoring.

A real deployment would load a seq2seq generator and a sequence classifier
here.  The stub keeps the same surface (flat text in, ranked candidates or a
raw confidence out) so the serving layer and its protocol guarantees can be
exercised on any CPU: it is fully deterministic for a given seed, needs no
weights, and its raw confidences deliberately spill outside [0, 1] at the
extremes the way an uncalibrated logit map would.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Sequence

_INT_LABEL = re.compile(r"\bint(\d+)\b")


def encode_prover_input(
    hypothesis: str, context: Sequence[str], partial_proof: str = ""
) -> str:
    """The flat text a generation model conditions on."""
    sentences = " ".join(f"sent{i}: {text}" for i, text in enumerate(context, start=1))
    encoded = f"$hypothesis$ = {hypothesis} ; $context$ = {sentences}"
    if partial_proof:
        encoded += f" ; $proof$ = {partial_proof}"
    return encoded


def encode_verifier_input(premises: Sequence[str], conclusion: str) -> str:
    """The flat text a step classifier conditions on."""
    return " ".join([*premises, "=>", conclusion])


def next_intermediate(partial_proof: str) -> int:
    """First unused intermediate label index given a partial proof text."""
    taken = [int(m.group(1)) for m in _INT_LABEL.finditer(partial_proof)]
    return max(taken, default=0) + 1


@dataclass(frozen=True)
class StubModel:
    """Deterministic pseudo-model: likelihoods and confidences are stable
    hashes of the encoded input, so equal requests get equal responses."""

    seed: int = 0
    beam_width: int = 10

    def _unit(self, text: str) -> float:
        digest = hashlib.sha256(f"{self.seed}|{text}".encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") / 2**64

    def generate(
        self, hypothesis: str, context: Sequence[str], partial_proof: str, n: int
    ) -> list[tuple[str, float]]:
        """Up to min(n, beam_width) step proposals, best first.

        Likelihoods mimic beam search output: the exponentiated mean token
        log-probability, so every value lands in (0, 1].
        """
        width = min(n, self.beam_width)
        encoded = encode_prover_input(hypothesis, context, partial_proof)
        target = next_intermediate(partial_proof)
        labels = [f"sent{i}" for i in range(1, len(context) + 1)]

        # A bounded proposal pool: closing steps from each sentence, then
        # adjacent-pair derivations of the next intermediate.
        proposals = [f"{label} -> hypothesis;" for label in labels[: 2 * width]]
        for left, right in zip(labels, labels[1:]):
            if len(proposals) >= 4 * width:
                break
            proposals.append(
                f"{left} & {right} -> int{target}:"
                f" what {left} and {right} imply together;"
            )

        ranked = []
        for step in proposals:
            mean_logprob = -3.0 * self._unit(f"{encoded}|{step}")
            ranked.append((step, math.exp(mean_logprob)))
        ranked.sort(key=lambda pair: (-pair[1], pair[0]))
        return ranked[:width]

    def confidence(self, premises: Sequence[str], conclusion: str) -> float:
        """Raw validity confidence; an uncalibrated map over [-0.2, 1.2),
        so the serving layer's clamp is load-bearing."""
        return -0.2 + 1.4 * self._unit(encode_verifier_input(premises, conclusion))
