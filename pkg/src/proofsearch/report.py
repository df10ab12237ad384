"""Evaluation outputs: report JSON, breakdown CSV, figures, text tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .evaluation import BUCKET_ORDER, InstanceOutcome, aggregate_scores
from .synth import Answer

METRIC_LABELS = (
    ("leaves_f1", "Leaves F1"),
    ("leaves_all_correct", "Leaves AllCorrect"),
    ("steps_f1", "Steps F1"),
    ("steps_all_correct", "Steps AllCorrect"),
    ("intermediates_f1", "Intermediates F1"),
    ("intermediates_all_correct", "Intermediates AllCorrect"),
    ("overall_all_correct", "Overall AllCorrect"),
)


def outcome_to_json(outcome: InstanceOutcome) -> dict:
    return {
        "id": outcome.instance_id,
        "depth": outcome.depth,
        "gold_answer": outcome.gold_answer.value,
        "predicted_answer": (
            outcome.predicted_answer.value if outcome.predicted_answer else None
        ),
        "answer_correct": outcome.answer_correct,
        "proof_correct": outcome.proof_correct,
        "scores": outcome.scores.to_json() if outcome.scores is not None else None,
    }


def build_report(
    outcomes: Sequence[InstanceOutcome],
    breakdown: dict[str, dict[str, float]],
) -> dict:
    scored = [o.scores for o in outcomes if o.scores is not None]
    return {
        "n_examples": len(outcomes),
        "answer_accuracy": (
            sum(o.answer_correct for o in outcomes) / len(outcomes) if outcomes else None
        ),
        "metrics": aggregate_scores(scored) if scored else None,
        "breakdown": breakdown,
        "examples": [outcome_to_json(o) for o in outcomes],
    }


def write_report_json(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n")


def write_breakdown_csv(path: Path, breakdown: dict[str, dict[str, float]]) -> None:
    with path.open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["bucket", "count", "answer_accuracy", "proof_accuracy"])
        for bucket in BUCKET_ORDER:
            row = breakdown.get(bucket)
            if row is None:
                continue
            writer.writerow(
                [bucket, row["count"], f"{row['answer_accuracy']:.4f}", f"{row['proof_accuracy']:.4f}"]
            )


def render_figures(
    outdir: Path,
    metrics: dict[str, float] | None,
    breakdown: dict[str, dict[str, float]],
    score_pairs: Sequence[tuple[float, float, Answer]] = (),
) -> list[Path]:
    """PNG charts for the aggregate metrics, the depth breakdown, and the
    two-score scatter.  Returns the paths written."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    if metrics:
        fig, ax = plt.subplots(figsize=(8, 4))
        labels = [label for _, label in METRIC_LABELS]
        values = [metrics[key] for key, _ in METRIC_LABELS]
        ax.bar(range(len(values)), values, color="#4878a8")
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("score")
        ax.set_title("Proof tree metrics")
        fig.tight_layout()
        path = outdir / "metrics.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if breakdown:
        buckets = [b for b in BUCKET_ORDER if b in breakdown]
        answer = [breakdown[b]["answer_accuracy"] for b in buckets]
        proof = [breakdown[b]["proof_accuracy"] for b in buckets]
        xs = range(len(buckets))
        fig, ax = plt.subplots(figsize=(7, 4))
        width = 0.38
        ax.bar([x - width / 2 for x in xs], answer, width, label="answer", color="#4878a8")
        ax.bar([x + width / 2 for x in xs], proof, width, label="proof", color="#b8623e")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(buckets)
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("proof depth")
        ax.set_ylabel("accuracy")
        ax.set_title("Accuracy by depth")
        ax.legend()
        fig.tight_layout()
        path = outdir / "depth_breakdown.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if score_pairs:
        colors = {Answer.PROVED: "#2e7d32", Answer.DISPROVED: "#c62828", Answer.UNKNOWN: "#616161"}
        fig, ax = plt.subplots(figsize=(5, 5))
        for answer_kind in (Answer.PROVED, Answer.DISPROVED, Answer.UNKNOWN):
            xs = [h for h, _, a in score_pairs if a is answer_kind]
            ys = [n for _, n, a in score_pairs if a is answer_kind]
            if xs:
                ax.scatter(xs, ys, s=18, alpha=0.6, label=answer_kind.value, color=colors[answer_kind])
        ax.set_xlim(-0.05, 1.05)
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("proof score of hypothesis")
        ax.set_ylabel("proof score of negation")
        ax.set_title("Two-score answer space")
        ax.legend()
        fig.tight_layout()
        path = outdir / "scores.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written


def format_metrics_table(metrics: dict[str, float]) -> str:
    width = max(len(label) for _, label in METRIC_LABELS)
    lines = ["┌ metrics " + "─" * (width - 1)]
    for key, label in METRIC_LABELS:
        lines.append(f"  {label:<{width}}  {metrics[key] * 100:6.1f}")
    return "\n".join(lines)


def format_breakdown_table(breakdown: dict[str, dict[str, float]]) -> str:
    lines = ["┌ accuracy by depth", f"  {'bucket':<8}{'n':>6}{'answer':>10}{'proof':>10}"]
    for bucket in BUCKET_ORDER:
        row = breakdown.get(bucket)
        if row is None:
            continue
        lines.append(
            f"  {bucket:<8}{row['count']:>6}"
            f"{row['answer_accuracy'] * 100:>10.1f}{row['proof_accuracy'] * 100:>10.1f}"
        )
    return "\n".join(lines)
