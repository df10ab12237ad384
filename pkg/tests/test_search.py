"""The proof search loop: greedy decoding, sampling-driven improvement, stops."""

import io
import json
import random

import pytest

from proofsearch.dsl import (
    HYPOTHESIS,
    StepText,
    intermediate,
    parse_proof,
    sent,
)
from proofsearch.errors import DomainError, ProverFailure, VerifierFailure
from proofsearch.search import (
    JsonlTracer,
    ScoreMix,
    SearchConfig,
    generate_greedy,
    mix_scores,
    run_greedy,
    run_search,
)
from proofsearch.sources import (
    Candidate,
    ExactProver,
    ExactVerifier,
    NoisyProver,
    StepScorer,
    StepSource,
)
from proofsearch.synth import Answer, DatasetConfig, generate_dataset

CONTEXT = (
    "Anne is kind.",
    "If Anne is kind then Anne is nice.",
    "If Anne is nice then Anne is happy.",
    "If Bob is cold then Bob is tired.",
    "Bob is cold.",
)
HYP = "Anne is happy."


class ConstantVerifier(StepScorer):
    def __init__(self, value: float):
        self.value = value

    def score(self, premises, conclusion) -> float:
        return self.value


class TestMixScores:
    def test_modes(self):
        assert mix_scores(0.8, 0.6, ScoreMix.AVERAGE) == pytest.approx(0.7)
        assert mix_scores(0.8, 0.6, ScoreMix.PROVER_ONLY) == 0.8
        assert mix_scores(0.8, 0.6, ScoreMix.VERIFIER_ONLY) == 0.6

    @pytest.mark.parametrize("p,v", [(-0.1, 0.5), (0.5, 1.1), (float("nan"), 0.5)])
    def test_range_enforced(self, p, v):
        with pytest.raises(DomainError):
            mix_scores(p, v, ScoreMix.AVERAGE)


class TestSearchConfig:
    def test_defaults_valid(self):
        SearchConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"num_candidates": 0},
            {"max_iterations": -1},
            {"min_improvement": -0.1},
            {"no_update_patience": 0},
            {"sample_max_retries": 0},
            {"greedy_budget_factor": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SearchConfig(**kwargs)


class TestGreedy:
    def test_exact_pipeline_closes_proof(self):
        proof = generate_greedy(ExactProver(), HYP, CONTEXT)
        assert proof is not None and proof.concludes_hypothesis()

    def test_run_greedy_scores_one_on_exact_models(self):
        result = run_greedy(ExactProver(), ExactVerifier(), HYP, CONTEXT)
        assert result.proof is not None
        assert result.proof_score == 1.0
        assert result.stop_reason == "greedy"
        assert result.iterations == 0

    def test_unprovable_hypothesis_yields_nothing(self):
        result = run_greedy(ExactProver(), ExactVerifier(), "Anne is brave.", CONTEXT)
        assert result.proof is None
        assert result.proof_score == 0.0

    def test_score_mix_controls_proof_score(self):
        for mix, expected in [
            (ScoreMix.AVERAGE, 0.8),
            (ScoreMix.PROVER_ONLY, 1.0),
            (ScoreMix.VERIFIER_ONLY, 0.6),
        ]:
            config = SearchConfig(score_mix=mix)
            result = run_greedy(ExactProver(), ConstantVerifier(0.6), HYP, CONTEXT, config)
            assert result.proof_score == pytest.approx(expected), mix


class TestOracleRecovery:
    @pytest.mark.parametrize("depth", [0, 1, 2, 3])
    def test_exact_search_recovers_gold(self, depth):
        instances = generate_dataset(
            DatasetConfig(size=6, depths=(depth,), answer_ratio=(1, 0, 0), seed=14)
        )
        for inst in instances:
            assert inst.answer is Answer.PROVED
            result = run_search(
                ExactProver(), ExactVerifier(), inst.hypothesis, inst.context
            )
            assert result.proof is not None, inst.id
            assert result.proof_score == 1.0
            assert result.proof.to_text() == inst.gold_tree().to_text()


class DecoyProver(StepSource):
    """Greedy chases a high-confidence dead end; other partials reveal the
    real chain, so only sampling-driven search completes the proof."""

    def generate(self, hypothesis, context, partial_proof, n):
        ints = (
            {} if partial_proof is None else dict(partial_proof.int_texts())
        )
        texts = set(ints.values())
        next_int = max(ints, default=0) + 1
        out = []
        if "bob is tired" not in texts:
            out.append(
                Candidate(
                    StepText((sent(4), sent(5)), intermediate(next_int), "bob is tired"),
                    0.9,
                )
            )
        if not texts:
            out.append(
                Candidate(
                    StepText((sent(1), sent(2)), intermediate(next_int), "anne is nice"),
                    0.8,
                )
            )
        if "anne is nice" in texts:
            idx = next(i for i, t in ints.items() if t == "anne is nice")
            out.append(
                Candidate(StepText((sent(3), intermediate(idx)), HYPOTHESIS, None), 0.8)
            )
        return out[:n]


class TestSearchBeatsGreedy:
    def test_greedy_dead_ends_where_search_recovers(self):
        greedy = run_greedy(DecoyProver(), ExactVerifier(), HYP, CONTEXT)
        assert greedy.proof is None

        searched = run_search(
            DecoyProver(), ExactVerifier(), HYP, CONTEXT, rng=random.Random(2)
        )
        assert searched.proof is not None
        # both recovered steps average prover 0.8 with verifier 1.0
        assert searched.proof_score == pytest.approx(0.9)
        assert searched.iterations > 0

    def test_search_never_scores_below_greedy_under_noise(self):
        instances = generate_dataset(
            DatasetConfig(size=10, depths=(1, 2, 3), answer_ratio=(1, 0, 0), seed=3)
        )
        for i, inst in enumerate(instances):
            greedy = run_greedy(
                NoisyProver(ExactProver(), drop=0.4, inject=0.4, seed=100 + i),
                ExactVerifier(),
                inst.hypothesis,
                inst.context,
            )
            searched = run_search(
                NoisyProver(ExactProver(), drop=0.4, inject=0.4, seed=100 + i),
                ExactVerifier(),
                inst.hypothesis,
                inst.context,
                rng=random.Random(i),
            )
            assert searched.proof_score >= greedy.proof_score


class TestStopConditions:
    def test_small_lattice_exhausts_samples(self):
        result = run_search(ExactProver(), ExactVerifier(), "Anne is kind.", CONTEXT[:1])
        assert result.stop_reason == "samples_exhausted"

    def test_max_iterations_reached(self):
        config = SearchConfig(max_iterations=1, no_update_patience=5)
        result = run_search(ExactProver(), ExactVerifier(), HYP, CONTEXT, config)
        assert result.stop_reason == "max_iterations"
        assert result.iterations == 1

    def test_patience_stops_stagnation(self):
        config = SearchConfig(no_update_patience=1)
        result = run_search(ExactProver(), ExactVerifier(), HYP, CONTEXT, config)
        assert result.stop_reason == "no_progress"
        assert result.proof is not None  # greedy already closed it


class FailAfter(StepSource):
    def __init__(self, calls: int):
        self.remaining = calls
        self.inner = ExactProver()

    def generate(self, hypothesis, context, partial_proof, n):
        if self.remaining == 0:
            raise ProverFailure("model went away")
        self.remaining -= 1
        return self.inner.generate(hypothesis, context, partial_proof, n)


class FailingVerifier(StepScorer):
    def __init__(self, calls: int):
        self.remaining = calls

    def score(self, premises, conclusion):
        if self.remaining == 0:
            raise VerifierFailure("scoring backend down")
        self.remaining -= 1
        return 1.0


class TestFailureHandling:
    def test_prover_failure_during_greedy_aborts_empty(self):
        result = run_search(FailAfter(0), ExactVerifier(), HYP, CONTEXT)
        assert result.stop_reason == "aborted"
        assert result.failure.startswith("prover:")
        assert result.proof is None and result.iterations == 0

    def test_prover_failure_mid_search_keeps_best(self):
        result = run_search(FailAfter(3), ExactVerifier(), HYP, CONTEXT)
        assert result.stop_reason == "aborted"
        assert result.failure.startswith("prover:")
        assert result.proof is not None  # greedy phase finished before the failure
        assert result.proof_score == 1.0

    def test_verifier_failure_during_init(self):
        result = run_greedy(ExactProver(), FailingVerifier(0), HYP, CONTEXT)
        assert result.stop_reason == "aborted"
        assert result.failure.startswith("verifier:")

    def test_verifier_failure_mid_search_keeps_best(self):
        result = run_search(ExactProver(), FailingVerifier(4), HYP, CONTEXT)
        assert result.stop_reason == "aborted"
        assert result.failure.startswith("verifier:")
        assert result.proof is not None


class TestDeterminism:
    def run_once(self, seed: int):
        instances = generate_dataset(
            DatasetConfig(size=4, depths=(2,), answer_ratio=(1, 0, 0), seed=9)
        )
        out = []
        for i, inst in enumerate(instances):
            result = run_search(
                NoisyProver(ExactProver(), drop=0.3, inject=0.3, seed=50 + i),
                ExactVerifier(),
                inst.hypothesis,
                inst.context,
                rng=random.Random(seed + i),
            )
            out.append(
                (
                    None if result.proof is None else result.proof.to_text(),
                    result.proof_score,
                    result.iterations,
                    result.stop_reason,
                )
            )
        return out

    def test_same_seed_same_outcome(self):
        assert self.run_once(7) == self.run_once(7)


class TestTracing:
    def test_trace_records_are_json_lines(self):
        buf = io.StringIO()
        run_search(
            ExactProver(),
            ExactVerifier(),
            HYP,
            CONTEXT,
            SearchConfig(max_iterations=4),
            rng=random.Random(0),
            tracer=JsonlTracer(buf),
        )
        records = [json.loads(line) for line in buf.getvalue().splitlines()]
        assert records[0]["type"] == "greedy_init"
        assert {"steps", "hypothesis_score"} <= set(records[0])
        iteration_records = [r for r in records[1:] if r["type"] == "iteration"]
        assert iteration_records
        for record in iteration_records:
            assert {
                "iteration",
                "partial",
                "candidates",
                "p_scores",
                "v_scores",
                "scores",
                "outcomes",
                "hypothesis_score",
            } <= set(record)

    def test_hypothesis_score_never_drops_across_trace(self):
        buf = io.StringIO()
        run_search(
            NoisyProver(ExactProver(), drop=0.3, inject=0.3, seed=5),
            ExactVerifier(),
            HYP,
            CONTEXT,
            rng=random.Random(5),
            tracer=JsonlTracer(buf),
        )
        scores = [
            json.loads(line)["hypothesis_score"] for line in buf.getvalue().splitlines()
        ]
        assert all(a <= b for a, b in zip(scores, scores[1:]))
