"""Labeling campaigns: every benchmark under every grid configuration."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import random
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass

from .backend import (BackendAdapter, BenchmarkSpec, Expected, Verdict, classify,
                      run_backend)
from .dtree import TrainingSample
from .errors import DegenerateSplit, FormatError
from .features import ProgramFeatures, features_of_file
from .flags import FlagGrid, encode

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 180.0
TIME_DECIMALS = 6


@dataclass
class CampaignManifest:
    benchmarks: list
    grid: FlagGrid
    timeout_s: float = DEFAULT_TIMEOUT_S
    parallelism: int = 1

    def __post_init__(self):
        if not self.timeout_s > 0:
            raise ValueError("timeout must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")


@dataclass(frozen=True)
class DatasetRow:
    bench: str
    cfg: int
    features: tuple
    flags: tuple
    verdict: Verdict
    time_s: float
    outcome_class: int
    witness: str | None = None  # "confirmed"/"unconfirmed" when known

    def sample(self):
        return TrainingSample(self.features + self.flags, self.outcome_class)


def read_manifest(path):
    """Benchmarks from a ``program<TAB>property<TAB>expected`` file.

    Relative paths are resolved against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    benches = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError("expected program<TAB>property<TAB>expected", lineno)
            program, prop, expected = (p.strip() for p in parts)
            try:
                expected = Expected(expected.lower())
            except ValueError:
                raise FormatError(f"expected verdict must be true/false/unknown, got {expected!r}",
                                  lineno) from None
            resolve = (lambda p: p if not p or os.path.isabs(p) else os.path.join(base, p))
            benches.append(BenchmarkSpec(resolve(program), resolve(prop), expected))
    return benches


def bench_id(bench: BenchmarkSpec):
    return bench.program_path


def _round_time(t):
    return round(float(t), TIME_DECIMALS)


# -- journal ----------------------------------------------------------------


def _journal_line(bench, cfg, verdict, time_s, cls):
    return f"{bench}\t{cfg}\t{verdict.value}\t{time_s!r}\t{cls}\n"


def read_journal(path):
    """Completed cells from a journal: {(bench, cfg): (verdict, time, class)}.

    A torn final line (the campaign died mid-write) is ignored.
    """
    done = {}
    if not os.path.exists(path):
        return done
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    for lineno, line in enumerate(lines, 1):
        if not line:
            continue
        parts = line.split("\t")
        try:
            bench, cfg, verdict, time_s, cls = parts
            record = (Verdict(verdict), float(time_s), int(cls))
            cfg = int(cfg)
        except ValueError:
            if lineno >= len(lines) - 1:
                log.warning("ignoring torn journal record at line %d", lineno)
                continue
            raise FormatError("malformed journal record", lineno) from None
        done[(bench, cfg)] = record
    return done


class _Journal:
    def __init__(self, path):
        self.path = path
        self.lock = threading.Lock()
        self.fh = open(path, "a", encoding="utf-8") if path else None
        if self.fh is not None and self.fh.tell() > 0:
            # finish a torn last line so new records start cleanly
            with open(path, "rb") as check:
                check.seek(-1, os.SEEK_END)
                if check.read(1) != b"\n":
                    self.fh.write("\n")

    def append(self, line):
        if self.fh is None:
            return
        with self.lock:
            self.fh.write(line)
            self.fh.flush()

    def close(self):
        if self.fh is not None:
            self.fh.close()


# -- running ----------------------------------------------------------------


def run_campaign(manifest: CampaignManifest, adapter: BackendAdapter, journal_path=None,
                 features=None, max_cells=None):
    """Run every (benchmark, configuration) cell and return the dataset rows.

    Completed cells recorded in ``journal_path`` are not run again.  Rows
    come back benchmark-major, configuration-minor whatever order the
    workers finished in.  ``features`` may map benchmark ids to
    precomputed ProgramFeatures.  ``max_cells`` stops after that many new
    runs (for partial, resumable campaigns) and returns only the rows
    available so far.
    """
    benches = manifest.benchmarks
    grid = manifest.grid
    feats = dict(features or {})
    for b in benches:
        key = bench_id(b)
        if key not in feats:
            feats[key] = features_of_file(b.program_path)
    done = read_journal(journal_path) if journal_path else {}
    known = {bench_id(b) for b in benches}
    stale = {k for k in done if k[0] not in known or not 0 <= k[1] < len(grid)}
    if stale:
        log.warning("journal has %d record(s) outside this campaign; ignoring them", len(stale))
    results = {k: v for k, v in done.items() if k not in stale}

    todo = [(b, i) for b in benches for i in range(len(grid)) if (bench_id(b), i) not in results]
    if max_cells is not None:
        todo = todo[:max_cells]
    journal = _Journal(journal_path)
    lock = threading.Lock()

    def run_cell(bench, i):
        outcome = run_backend(bench, grid[i], manifest.timeout_s, adapter)
        t = _round_time(outcome.wall_time_s)
        record = (outcome.verdict, t, classify(outcome.verdict, t))
        journal.append(_journal_line(bench_id(bench), i, *record))
        with lock:
            results[(bench_id(bench), i)] = record

    try:
        if manifest.parallelism == 1:
            for bench, i in todo:
                run_cell(bench, i)
        else:
            with ThreadPoolExecutor(manifest.parallelism) as pool:
                futures = [pool.submit(run_cell, b, i) for b, i in todo]
                _, pending = wait(futures, return_when=FIRST_EXCEPTION)
                for fut in pending:
                    fut.cancel()
            for fut in futures:
                if not fut.cancelled() and fut.exception() is not None:
                    raise fut.exception()
    finally:
        journal.close()

    rows = []
    for b in benches:
        key = bench_id(b)
        fvec = tuple(feats[key].as_list())
        for i, cfg in enumerate(grid):
            if (key, i) not in results:
                continue
            verdict, t, cls = results[(key, i)]
            rows.append(DatasetRow(key, i, fvec, tuple(encode(cfg)), verdict, t, cls))
    return rows


# -- dataset files ----------------------------------------------------------

FEATURE_COLUMNS = [f"f{i}" for i in range(1, 12)]
FLAG_COLUMNS = [f"g{i}" for i in range(1, 9)]
HEADER = ["bench", "cfg", *FEATURE_COLUMNS, *FLAG_COLUMNS, "verdict", "time_s", "class"]


def write_dataset(rows, fh):
    """Write rows as CSV to an open text file (or a path)."""
    if isinstance(fh, (str, os.PathLike)):
        with open(fh, "w", encoding="utf-8", newline="") as out:
            return write_dataset(rows, out)
    with_witness = any(r.witness is not None for r in rows)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER + (["witness"] if with_witness else []))
    for r in rows:
        record = [r.bench, r.cfg, *r.features, *r.flags, r.verdict.value,
                  f"{r.time_s:.{TIME_DECIMALS}f}", r.outcome_class]
        if with_witness:
            record.append(r.witness or "")
        writer.writerow(record)


def read_dataset(fh):
    """Read a dataset CSV, validating every row's class against its verdict and time."""
    if isinstance(fh, (str, os.PathLike)):
        with open(fh, encoding="utf-8", newline="") as src:
            return read_dataset(src)
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty dataset file: missing header", 1) from None
    with_witness = header == HEADER + ["witness"]
    if header != HEADER and not with_witness:
        raise FormatError("unexpected dataset header", 1)
    rows = []
    for rowno, rec in enumerate(reader, 2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise FormatError(f"expected {len(header)} columns, got {len(rec)}", rowno)
        try:
            cfg = int(rec[1])
            feats = tuple(int(v) for v in rec[2:13])
            flags = tuple(int(v) for v in rec[13:21])
            verdict = Verdict(rec[21])
            t = float(rec[22])
            cls = int(rec[23])
        except ValueError as exc:
            raise FormatError(f"bad value: {exc}", rowno) from None
        if not math.isfinite(t) or t < 0:
            raise FormatError("time must be a finite non-negative number", rowno)
        if any(v < 0 for v in feats):
            raise FormatError("features must be non-negative", rowno)
        if cls != classify(verdict, t):
            raise FormatError(
                f"class {cls} contradicts verdict {verdict.value} at {t} s "
                f"(expected {classify(verdict, t)})",
                rowno,
            )
        witness = None
        if with_witness and rec[24]:
            witness = rec[24]
            if witness not in ("confirmed", "unconfirmed"):
                raise FormatError(f"witness must be confirmed or unconfirmed, got {witness!r}", rowno)
        rows.append(DatasetRow(rec[0], cfg, feats, flags, verdict, t, cls, witness))
    return rows


def dataset_text(rows):
    buf = io.StringIO()
    write_dataset(rows, buf)
    return buf.getvalue()


def benchmark_ids(rows):
    """Distinct benchmark ids in first-appearance order."""
    return list(dict.fromkeys(r.bench for r in rows))


def split_train(rows, fraction, seed):
    """Split rows by benchmark: a ``fraction`` of benchmarks goes to training."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be strictly between 0 and 1")
    ids = benchmark_ids(rows)
    n_train = math.floor(fraction * len(ids) + 0.5)
    if n_train == 0 or n_train == len(ids):
        raise DegenerateSplit(
            f"fraction {fraction} of {len(ids)} benchmark(s) leaves one side empty"
        )
    shuffled = sorted(ids)
    random.Random(seed).shuffle(shuffled)
    chosen = set(shuffled[:n_train])
    train = [r for r in rows if r.bench in chosen]
    holdout = [r for r in rows if r.bench not in chosen]
    return train, holdout


def to_samples(rows):
    return [r.sample() for r in rows]


def program_features(rows):
    """Benchmark id -> ProgramFeatures recorded in the dataset."""
    out = {}
    for r in rows:
        out.setdefault(r.bench, ProgramFeatures.from_list(r.features))
    return out
