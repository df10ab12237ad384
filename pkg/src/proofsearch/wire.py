"""JSON wire protocol for external prover and verifier models.

Two operations, carried either as newline-delimited JSON over a child
process's stdio or as an HTTP POST body:

    {"op": "generate", "hypothesis": str, "context": [str],
     "partial_proof": str, "n": int}
        -> {"candidates": [{"step": str, "score": float}]}

    {"op": "score", "premises": [str], "conclusion": str}
        -> {"score": float}

Scores must be finite numbers in [0, 1]; anything else is a protocol
error.  Servers report per-request failures as {"error": str}.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import BridgeProtocolError

GENERATE_OP = "generate"
SCORE_OP = "score"


def build_generate_request(
    hypothesis: str, context: Sequence[str], partial_proof: str, n: int
) -> dict:
    return {
        "op": GENERATE_OP,
        "hypothesis": hypothesis,
        "context": list(context),
        "partial_proof": partial_proof,
        "n": n,
    }


def build_score_request(premises: Sequence[str], conclusion: str) -> dict:
    return {"op": SCORE_OP, "premises": list(premises), "conclusion": conclusion}


def check_score(value: object) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BridgeProtocolError(f"score must be a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out) or not 0.0 <= out <= 1.0:
        raise BridgeProtocolError(f"score must be finite and within [0, 1], got {out!r}")
    return out


def _reject_error(obj: dict) -> None:
    if "error" in obj:
        raise BridgeProtocolError(f"bridge reported an error: {obj['error']!r}")


def parse_generate_response(obj: object) -> list[tuple[str, float]]:
    if not isinstance(obj, dict):
        raise BridgeProtocolError("generate response must be a JSON object")
    _reject_error(obj)
    candidates = obj.get("candidates")
    if not isinstance(candidates, list):
        raise BridgeProtocolError("generate response needs a 'candidates' list")
    out = []
    for item in candidates:
        if not isinstance(item, dict) or not isinstance(item.get("step"), str):
            raise BridgeProtocolError(f"bad candidate {item!r}")
        out.append((item["step"], check_score(item.get("score"))))
    return out


def parse_score_response(obj: object) -> float:
    if not isinstance(obj, dict):
        raise BridgeProtocolError("score response must be a JSON object")
    _reject_error(obj)
    return check_score(obj.get("score"))


# --- conformance fuzzing ------------------------------------------------------


@dataclass(frozen=True)
class ConformanceCheck:
    name: str
    ok: bool
    detail: str = ""


class ProtocolFuzzer:
    """Exercises a bridge endpoint: happy paths, range checks, malformed input.

    ``request`` sends a structured payload and returns the decoded response;
    ``send_raw`` writes an arbitrary text frame (NOT valid JSON) and returns
    the decoded response, letting the fuzzer verify the server survives
    garbage and keeps answering.
    """

    def __init__(
        self,
        request: Callable[[dict], object],
        send_raw: Callable[[str], object] | None = None,
        seed: int = 0,
    ):
        self._request = request
        self._send_raw = send_raw
        self._rng = random.Random(seed)

    # a few printable shards likely to upset sloppy parsers
    _SHARDS = ('"', "\\", "{", "}", "[", "&", ";", "->", "sent1", "é", "\t", "0", "🙂")

    def _gibberish(self, length: int) -> str:
        return "".join(self._rng.choice(self._SHARDS) for _ in range(length))

    def _checks(self, n_random: int) -> list[ConformanceCheck]:
        checks: list[ConformanceCheck] = []

        def run(name: str, fn: Callable[[], None]) -> None:
            try:
                fn()
            except Exception as exc:  # noqa: BLE001 - report, don't raise
                checks.append(ConformanceCheck(name, False, f"{type(exc).__name__}: {exc}"))
            else:
                checks.append(ConformanceCheck(name, True))

        def generate(hypothesis: str, context: list[str], partial: str, n: int) -> list:
            return parse_generate_response(
                self._request(build_generate_request(hypothesis, context, partial, n))
            )

        def score(premises: list[str], conclusion: str) -> float:
            return parse_score_response(
                self._request(build_score_request(premises, conclusion))
            )

        def expect_error(payload: dict) -> None:
            response = self._request(payload)
            if not isinstance(response, dict) or "error" not in response:
                raise AssertionError(f"expected an error response, got {response!r}")

        run(
            "generate basic",
            lambda: generate("The cat is nice.", ["Anne is kind.", "Bob is cold."], "", 5),
        )
        run(
            "generate with partial proof",
            lambda: generate(
                "Bob is proud.",
                [f"sentence number {i}" for i in range(1, 8)],
                "sent1 & sent2 -> int1: bob is calm;",
                3,
            ),
        )
        run("score basic", lambda: score(["Anne is kind.", "If Anne is kind then Anne is nice."], "Anne is nice."))
        run("score empty premises", lambda: score([], "anything"))

        def random_roundtrips() -> None:
            for i in range(n_random):
                context = [
                    self._gibberish(self._rng.randint(1, 30))
                    for _ in range(self._rng.randint(1, 12))
                ]
                if self._rng.random() < 0.5:
                    cands = generate(
                        self._gibberish(self._rng.randint(1, 40)),
                        context,
                        "",
                        self._rng.randint(1, 10),
                    )
                    for step, _ in cands:
                        if not isinstance(step, str) or not step:
                            raise AssertionError(f"empty candidate step at round {i}")
                else:
                    score(context, self._gibberish(self._rng.randint(1, 40)))

        run(f"{n_random} randomized round trips", random_roundtrips)

        def large_context() -> None:
            generate("target", [f"filler sentence {i}" for i in range(200)], "", 10)

        run("large context", large_context)

        def determinism() -> None:
            req = build_score_request(["alpha beta", "gamma"], "alpha gamma")
            first = parse_score_response(self._request(req))
            second = parse_score_response(self._request(req))
            if first != second:
                raise AssertionError(f"score changed between calls: {first} vs {second}")

        run("deterministic scoring", determinism)

        run("unknown op rejected", lambda: expect_error({"op": "frobnicate"}))
        run("missing fields rejected", lambda: expect_error({"op": "generate"}))
        run(
            "wrong types rejected",
            lambda: expect_error(
                {"op": "generate", "hypothesis": 7, "context": "nope", "partial_proof": 0, "n": "ten"}
            ),
        )
        run(
            "score premises type checked",
            lambda: expect_error({"op": "score", "premises": "not a list", "conclusion": "x"}),
        )

        if self._send_raw is not None:

            def malformed_json() -> None:
                response = self._send_raw('{"op": "generate", broken')
                if not isinstance(response, dict) or "error" not in response:
                    raise AssertionError(f"malformed JSON not reported: {response!r}")

            run("malformed JSON reported", malformed_json)
            run(
                "still alive after garbage",
                lambda: score(["alpha"], "alpha"),
            )

        return checks

    def run(self, n_random: int = 50) -> list[ConformanceCheck]:
        return self._checks(n_random)

    def assert_conformant(self, n_random: int = 50) -> list[ConformanceCheck]:
        checks = self.run(n_random)
        failures = [c for c in checks if not c.ok]
        if failures:
            details = "; ".join(f"{c.name}: {c.detail}" for c in failures)
            raise AssertionError(f"{len(failures)} conformance check(s) failed: {details}")
        return checks


def encode_frame(payload: dict) -> str:
    """One request or response as a single JSON line."""
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n"
