"""Comparing verification results of the default and the predicted configurations."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

from .backend import Verdict
from .campaign import DatasetRow, benchmark_ids, program_features
from .dtree import DecisionTreeModel
from .errors import BenchmarkMismatch
from .flags import FlagGrid, default_config
from .predict import select_flags

log = logging.getLogger(__name__)

BUCKETS = ("correct", "correct_unconfirmed", "incorrect", "unknown", "timeout")


def bucket(row: DatasetRow) -> str:
    if row.verdict.is_correct:
        return "correct_unconfirmed" if row.witness == "unconfirmed" else "correct"
    if row.verdict is Verdict.INCORRECT:
        return "incorrect"
    if row.verdict is Verdict.TIMEOUT:
        return "timeout"
    return "unknown"  # unknown verdicts and crashes


def improvement(default_correct, predicted_correct):
    """Relative gain in correct results; None when the default has none."""
    if default_correct == 0:
        return None
    return (predicted_correct - default_correct) / default_correct


@dataclass
class ComparisonReport:
    counts: dict  # tool -> {bucket: count}
    pairs: list  # (bench, default verdict, predicted verdict)
    tools: tuple = ("default", "predicted")

    def correct_total(self, tool):
        c = self.counts[tool]
        return c["correct"] + c["correct_unconfirmed"]

    @property
    def improvement(self):
        return improvement(self.correct_total(self.tools[0]), self.correct_total(self.tools[1]))

    def format_table(self) -> str:
        width = max(len(b) for b in BUCKETS + ("total correct",))
        head = f"{'':<{width}}" + "".join(f"{t:>12}" for t in self.tools)
        lines = [head, "-" * len(head)]
        for b in BUCKETS:
            lines.append(f"{b:<{width}}" + "".join(f"{self.counts[t][b]:>12}" for t in self.tools))
        lines.append(f"{'total correct':<{width}}"
                     + "".join(f"{self.correct_total(t):>12}" for t in self.tools))
        lines.append(f"benchmarks: {len(self.pairs)}")
        gain = self.improvement
        lines.append("improvement in correct results: "
                     + ("n/a (default has no correct results)" if gain is None else f"{gain:+.1%}"))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["tool", *BUCKETS])
        for t in self.tools:
            writer.writerow([t, *(self.counts[t][b] for b in BUCKETS)])
        return buf.getvalue()

    def pairs_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bench", *self.tools])
        for bench, a, b in self.pairs:
            writer.writerow([bench, a.value, b.value])
        return buf.getvalue()


def _one_per_bench(rows, label):
    out = {}
    for r in rows:
        if r.bench in out:
            raise BenchmarkMismatch(
                f"{label} results list benchmark {r.bench!r} more than once; "
                "select one configuration per benchmark first"
            )
        out[r.bench] = r
    return out


def report_compare(dataset_default, dataset_predicted) -> ComparisonReport:
    """Bucket counts for two result sets covering the same benchmarks."""
    default = _one_per_bench(dataset_default, "default")
    predicted = _one_per_bench(dataset_predicted, "predicted")
    if set(default) != set(predicted):
        missing = sorted(set(default) ^ set(predicted))
        raise BenchmarkMismatch(f"benchmarks differ between the two result sets: {missing[:5]}")
    counts = {t: dict.fromkeys(BUCKETS, 0) for t in ("default", "predicted")}
    pairs = []
    for bench in benchmark_ids(dataset_default):
        a, b = default[bench], predicted[bench]
        counts["default"][bucket(a)] += 1
        counts["predicted"][bucket(b)] += 1
        pairs.append((bench, a.verdict, b.verdict))
    return ComparisonReport(counts, pairs)


def rows_for_config(rows, cfg_index):
    """One row per benchmark: the one run with configuration ``cfg_index``."""
    picked = [r for r in rows if r.cfg == cfg_index]
    if set(benchmark_ids(picked)) != set(benchmark_ids(rows)):
        raise BenchmarkMismatch(f"configuration {cfg_index} was not run on every benchmark")
    return picked


def default_rows(rows, grid: FlagGrid):
    return rows_for_config(rows, grid.index(default_config()))


def predicted_rows(rows, model: DecisionTreeModel, grid: FlagGrid):
    """From a full campaign dataset, the row of each benchmark's predicted configuration."""
    by_cell = {(r.bench, r.cfg): r for r in rows}
    out = []
    for bench, feats in program_features(rows).items():
        choice = select_flags(model, feats, grid).chosen_index
        if (bench, choice) not in by_cell:
            raise BenchmarkMismatch(f"no result for {bench!r} under configuration {choice}")
        out.append(by_cell[(bench, choice)])
    return out
