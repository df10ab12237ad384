"""Lexical retrieval and verifier training data generation."""

import io
import math
import random

import pytest

from proofsearch.bm25 import Bm25Index, bm25_topk, tokenize
from proofsearch.errors import (
    DataError,
    EmptyCorpusError,
    NotEnoughPremisesError,
)
from proofsearch.negatives import (
    DEFAULT_FLAVORS,
    LabeledStep,
    Perturbation,
    extract_positives,
    labeled_step_from_json,
    labeled_step_to_json,
    make_negatives,
    read_labeled_steps,
    write_labeled_steps,
)
from proofsearch.synth import Answer, DatasetConfig, generate_dataset

# hand-computed relevance fixture: scores derived with a calculator from the
# formula alone, never from the implementation
DOCS = [
    "Solar panels convert solar energy into electricity.",
    "Wind turbines convert wind energy into electricity.",
    "The sun drives solar energy production.",
    "Fossil fuels store ancient energy.",
    "Hydropower plants use falling water.",
]
QUERY = "solar energy"
EXPECTED_SCORES = [
    1.4191887733514068,
    0.2693193869761353,
    1.1631508098056806,
    0.3087319801921551,
    0.0,
]
EXPECTED_RANKING = [0, 2, 3, 1, 4]


class TestTokenize:
    def test_lowercases_and_splits_alphanumerics(self):
        assert tokenize("Solar panels, convert!  42 kW") == [
            "solar",
            "panels",
            "convert",
            "42",
            "kw",
        ]

    def test_empty(self):
        assert tokenize("...") == []


class TestBm25Fixture:
    def setup_method(self):
        self.index = Bm25Index(DOCS)

    def test_average_document_length(self):
        assert self.index._avgdl == 6.0

    def test_idf_values(self):
        assert self.index._idf["solar"] == pytest.approx(
            math.log(1 + (5 - 2 + 0.5) / (2 + 0.5)), abs=1e-12
        )
        assert self.index._idf["solar"] == pytest.approx(0.8754687373538999, abs=1e-12)
        assert self.index._idf["energy"] == pytest.approx(0.28768207245178085, abs=1e-12)

    def test_all_five_scores(self):
        for i, expected in enumerate(EXPECTED_SCORES):
            assert self.index.score(QUERY, i) == pytest.approx(expected, abs=1e-12), i

    def test_full_ranking(self):
        ranked = bm25_topk(self.index, QUERY, len(DOCS))
        assert [doc for doc, _ in ranked] == [DOCS[i] for i in EXPECTED_RANKING]
        assert [s for _, s in ranked] == pytest.approx(
            [EXPECTED_SCORES[i] for i in EXPECTED_RANKING], abs=1e-12
        )

    def test_scores_vector_matches(self):
        assert self.index.scores(QUERY) == pytest.approx(EXPECTED_SCORES, abs=1e-12)


class TestBm25Behavior:
    def test_tie_broken_by_document_order(self):
        index = Bm25Index(["b c", "a c", "d c"])
        ranked = bm25_topk(index, "c", 3)
        assert [doc for doc, _ in ranked] == ["b c", "a c", "d c"]

    def test_no_hit_query_scores_zero_everywhere(self):
        index = Bm25Index(DOCS)
        ranked = bm25_topk(index, "zebra quark", len(DOCS))
        assert [s for _, s in ranked] == [0.0] * len(DOCS)
        assert [doc for doc, _ in ranked] == DOCS

    def test_exclusions_applied_before_truncation(self):
        index = Bm25Index(DOCS)
        [(doc, _)] = bm25_topk(index, QUERY, 1, exclude={DOCS[0]})
        assert doc == DOCS[2]  # the runner-up, not a shorter list

    def test_excluding_everything_yields_nothing(self):
        index = Bm25Index(DOCS)
        assert bm25_topk(index, QUERY, 3, exclude=set(DOCS)) == []

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            bm25_topk(Bm25Index(DOCS), QUERY, 0)

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            bm25_topk(Bm25Index([]), QUERY, 1)

    def test_more_matched_terms_never_hurts(self):
        index = Bm25Index(DOCS)
        one = index.score("solar", 0)
        both = index.score("solar energy", 0)
        assert both > one

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            Bm25Index(DOCS, k1=-1.0)
        with pytest.raises(ValueError):
            Bm25Index(DOCS, b=1.5)
        with pytest.raises(IndexError):
            Bm25Index(DOCS).score("solar", 99)


def positive(premises, conclusion="Anne is nice.", source="ex1"):
    return LabeledStep(tuple(premises), conclusion, True, source_id=source)


CONTEXT = [
    "Anne is kind.",
    "If Anne is kind then Anne is nice.",
    "If Anne is nice then Anne is happy.",
    "Bob is cold.",
]


class TestLabeledStep:
    def test_validation(self):
        with pytest.raises(ValueError):
            LabeledStep((), "c", True)
        with pytest.raises(ValueError):
            LabeledStep(("p",), "c", True, Perturbation.PREMISE_COPIED)
        with pytest.raises(ValueError):
            LabeledStep(("p",), "c", False, Perturbation.NONE)

    def test_json_round_trip(self):
        step = LabeledStep(("a", "b"), "c", False, Perturbation.PREMISE_SWAPPED, "ex9")
        assert labeled_step_from_json(labeled_step_to_json(step)) == step

    def test_bad_records_rejected(self):
        with pytest.raises(DataError):
            labeled_step_from_json({"premises": ["a"], "conclusion": "c", "label": "maybe", "perturbation": "none"})
        with pytest.raises(DataError):
            labeled_step_from_json({"premises": [], "conclusion": "c", "label": "pos", "perturbation": "none"})
        with pytest.raises(DataError):
            labeled_step_from_json({"label": "pos"})


class TestExtractPositives:
    def test_counts_match_gold_steps(self):
        instances = generate_dataset(
            DatasetConfig(size=9, depths=(1, 2, 3), answer_ratio=(1, 0, 0), seed=12)
        )
        for inst in instances:
            assert inst.answer is Answer.PROVED
            tree = inst.gold_tree()
            positives = extract_positives(tree, inst.id)
            assert len(positives) == len(tree.proof.steps) == max(inst.depth, 1)
            assert all(p.positive and p.source_id == inst.id for p in positives)

    def test_premises_and_conclusions_are_sentences(self):
        [inst] = generate_dataset(
            DatasetConfig(size=1, depths=(2,), answer_ratio=(1, 0, 0), seed=12)
        )
        last = extract_positives(inst.gold_tree(), inst.id)[-1]
        assert last.conclusion == inst.gold_tree().hypothesis
        assert all(not p.startswith("sent") for p in last.premises)


class TestMakeNegatives:
    def test_default_flavors_for_two_premise_step(self):
        step = positive((CONTEXT[0], CONTEXT[1]))
        out = make_negatives(step, CONTEXT, rng=random.Random(0))
        flavors = [n.perturbation for n in out]
        assert flavors == [
            Perturbation.PREMISE_REMOVED,
            Perturbation.PREMISE_SWAPPED,
            Perturbation.CONCLUSION_NEGATED,
        ]
        assert all(not n.positive for n in out)

    def test_single_premise_step_skips_removal_by_default(self):
        step = positive((CONTEXT[0],))
        flavors = {n.perturbation for n in make_negatives(step, CONTEXT, rng=random.Random(0))}
        assert Perturbation.PREMISE_REMOVED not in flavors
        assert Perturbation.PREMISE_SWAPPED in flavors

    def test_explicit_removal_on_single_premise_raises(self):
        step = positive((CONTEXT[0],))
        with pytest.raises(NotEnoughPremisesError):
            make_negatives(
                step,
                CONTEXT,
                rng=random.Random(0),
                flavor_weights={Perturbation.PREMISE_REMOVED: 1},
            )

    def test_removed_is_strict_subset(self):
        step = positive((CONTEXT[0], CONTEXT[1], CONTEXT[2]))
        for seed in range(20):
            out = make_negatives(
                step,
                CONTEXT,
                rng=random.Random(seed),
                flavor_weights={Perturbation.PREMISE_REMOVED: 1},
            )
            kept = set(out[0].premises)
            assert kept and kept < set(step.premises)
            assert out[0].conclusion == step.conclusion

    def test_swapped_pulls_top_distractor_not_own_premise(self):
        step = positive((CONTEXT[0], CONTEXT[1]))
        [swapped] = make_negatives(
            step,
            CONTEXT,
            rng=random.Random(1),
            flavor_weights={Perturbation.PREMISE_SWAPPED: 1},
        )
        new = set(swapped.premises) - set(step.premises)
        assert len(new) == 1
        assert new.pop() not in step.premises
        assert len(swapped.premises) == len(step.premises)

    def test_copied_is_opt_in(self):
        step = positive((CONTEXT[0], CONTEXT[1]))
        default = {n.perturbation for n in make_negatives(step, CONTEXT, rng=random.Random(0))}
        assert Perturbation.PREMISE_COPIED not in default
        [copied] = make_negatives(
            step,
            CONTEXT,
            rng=random.Random(0),
            flavor_weights={Perturbation.PREMISE_COPIED: 1},
        )
        assert copied.conclusion in step.premises
        assert copied.premises == step.premises

    def test_negated_prefixes_conclusion(self):
        step = positive((CONTEXT[0], CONTEXT[1]))
        [negated] = make_negatives(
            step,
            CONTEXT,
            rng=random.Random(0),
            flavor_weights={Perturbation.CONCLUSION_NEGATED: 1},
        )
        assert negated.conclusion == "I don't think anne is nice."

    def test_every_negative_differs_from_source(self):
        instances = generate_dataset(
            DatasetConfig(size=12, depths=(2, 3), answer_ratio=(1, 0, 0), seed=4)
        )
        for inst in instances:
            index = Bm25Index(list(inst.context))
            for step in extract_positives(inst.gold_tree(), inst.id):
                for neg in make_negatives(step, list(inst.context), index, random.Random(3)):
                    assert (neg.premises, neg.conclusion) != (step.premises, step.conclusion)

    def test_rejects_negative_input(self):
        bad = LabeledStep(("a",), "b", False, Perturbation.CONCLUSION_NEGATED)
        with pytest.raises(ValueError):
            make_negatives(bad, CONTEXT)

    def test_rejects_requesting_none_flavor(self):
        step = positive((CONTEXT[0], CONTEXT[1]))
        with pytest.raises(ValueError):
            make_negatives(step, CONTEXT, flavor_weights={Perturbation.NONE: 1})

    def test_multiple_per_flavor(self):
        step = positive((CONTEXT[0], CONTEXT[1], CONTEXT[2]))
        out = make_negatives(
            step,
            CONTEXT,
            rng=random.Random(5),
            flavor_weights={Perturbation.PREMISE_REMOVED: 3},
        )
        assert len(out) == 3

    def test_byte_deterministic_output(self):
        def render() -> str:
            instances = generate_dataset(
                DatasetConfig(size=8, depths=(1, 2, 3), answer_ratio=(1, 0, 0), seed=2)
            )
            buf = io.StringIO()
            rows = []
            for inst in instances:
                index = Bm25Index(list(inst.context))
                rng = random.Random(17)
                for step in extract_positives(inst.gold_tree(), inst.id):
                    rows.append(step)
                    rows.extend(make_negatives(step, list(inst.context), index, rng))
            write_labeled_steps(rows, buf)
            return buf.getvalue()

        first, second = render(), render()
        assert first == second
        assert first.encode("utf-8") == second.encode("utf-8")


class TestLabeledStepIo:
    def test_round_trip_preserves_everything(self):
        step = positive((CONTEXT[0], CONTEXT[1]))
        rows = [step, *make_negatives(step, CONTEXT, rng=random.Random(0))]
        buf = io.StringIO()
        assert write_labeled_steps(rows, buf) == len(rows)
        buf.seek(0)
        assert read_labeled_steps(buf) == rows

    def test_invalid_json_line_reported_with_number(self):
        buf = io.StringIO('{"premises": ["a"], "conclusion": "c", "label": "pos", "perturbation": "none", "source_id": ""}\nnot json\n')
        with pytest.raises(DataError, match="line 2"):
            read_labeled_steps(buf)

    def test_default_flavor_table_unchanged(self):
        assert DEFAULT_FLAVORS == {
            Perturbation.PREMISE_REMOVED: 1,
            Perturbation.PREMISE_SWAPPED: 1,
            Perturbation.CONCLUSION_NEGATED: 1,
        }
