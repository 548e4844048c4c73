"""Running the verification backend and labeling its outcome."""

from __future__ import annotations

import configparser
import enum
import os
import re
import shlex
import signal
import subprocess
import sys
import time
from dataclasses import dataclass, field

from .errors import FormatError, SpawnFailure
from .flags import FlagConfiguration, Strategy, render_flags


class RawVerdict(str, enum.Enum):
    """What the backend reported, before comparison with ground truth."""

    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"
    ERROR = "error"


class Verdict(str, enum.Enum):
    CORRECT_TRUE = "correct_true"
    CORRECT_FALSE = "correct_false"
    UNKNOWN = "unknown"
    INCORRECT = "incorrect"
    TIMEOUT = "timeout"
    ERROR = "error"

    @property
    def is_correct(self):
        return self in (Verdict.CORRECT_TRUE, Verdict.CORRECT_FALSE)


class Expected(str, enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNSPECIFIED = "unknown"


@dataclass(frozen=True)
class BenchmarkSpec:
    program_path: str
    property_path: str = ""
    expected: Expected = Expected.UNSPECIFIED

    @property
    def name(self):
        return os.path.basename(self.program_path)


@dataclass(frozen=True)
class VerificationOutcome:
    verdict: Verdict
    wall_time_s: float
    raw: RawVerdict
    stdout_digest: str = ""


# Table of labeling classes; lower is better.
CLASS_FAST = 0
CLASS_MEDIUM = 1
CLASS_SLOW = 2
CLASS_UNKNOWN = 3
CLASS_TIMEOUT = 4
CLASS_INCORRECT = 5
NUM_CLASSES = 6

FAST_LIMIT_S = 10.0
SLOW_LIMIT_S = 60.0


def classify(verdict: Verdict, wall_time_s: float) -> int:
    """Outcome class 0..5 from a verdict kind and its wall-clock time."""
    if verdict.is_correct:
        if wall_time_s <= FAST_LIMIT_S:
            return CLASS_FAST
        if wall_time_s < SLOW_LIMIT_S:
            return CLASS_MEDIUM
        return CLASS_SLOW
    if verdict is Verdict.TIMEOUT:
        return CLASS_TIMEOUT
    if verdict is Verdict.INCORRECT:
        return CLASS_INCORRECT
    # unknown, and crashes with no verdict at all
    return CLASS_UNKNOWN


def classify_outcome(outcome: VerificationOutcome) -> int:
    return classify(outcome.verdict, outcome.wall_time_s)


def derive_verdict(raw: RawVerdict, expected: Expected) -> Verdict:
    """Compare a raw answer with the ground truth.

    Without ground truth a true/false answer cannot be judged and counts
    as unknown.
    """
    if raw is RawVerdict.TIMEOUT:
        return Verdict.TIMEOUT
    if raw is RawVerdict.ERROR:
        return Verdict.ERROR
    if raw is RawVerdict.UNKNOWN or expected is Expected.UNSPECIFIED:
        return Verdict.UNKNOWN
    if raw.value != expected.value:
        return Verdict.INCORRECT
    return Verdict.CORRECT_TRUE if raw is RawVerdict.TRUE else Verdict.CORRECT_FALSE


DEFAULT_PATTERNS = (
    (re.compile(r"VERIFICATION FAILED"), RawVerdict.FALSE),
    (re.compile(r"VERIFICATION SUCCESSFUL"), RawVerdict.TRUE),
    (re.compile(r"VERIFICATION UNKNOWN"), RawVerdict.UNKNOWN),
)


def parse_raw_verdict(stdout: str, exit_status, timed_out: bool, patterns=DEFAULT_PATTERNS) -> RawVerdict:
    """Raw verdict from backend output; the pattern matching last in the text wins."""
    if timed_out:
        return RawVerdict.TIMEOUT
    best = None
    best_pos = -1
    for regex, kind in patterns:
        for m in regex.finditer(stdout or ""):
            if m.start() > best_pos:
                best, best_pos = kind, m.start()
    return best if best is not None else RawVerdict.ERROR


def _digest(text, limit=200):
    text = (text or "").strip()
    if len(text) <= limit:
        return text
    return "..." + text[-limit:]


# -- adapters -------------------------------------------------------------


@dataclass
class ProcessResult:
    stdout: str
    returncode: int | None
    timed_out: bool
    wall_time_s: float


def supervise(cmd, timeout_s, cwd=None) -> ProcessResult:
    """Run ``cmd`` with a wall-clock limit, killing its whole process group on expiry."""
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            cmd,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            stdin=subprocess.DEVNULL,
            cwd=cwd,
            start_new_session=True,
        )
    except (FileNotFoundError, PermissionError, NotADirectoryError) as exc:
        raise SpawnFailure(f"cannot start {cmd[0]!r}: {exc}") from exc
    timed_out = False
    try:
        out, _ = proc.communicate(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        try:
            out, _ = proc.communicate(timeout=2)
        except subprocess.TimeoutExpired:
            # a grandchild escaped the group and holds the pipe open
            proc.kill()
            out = b""
    wall = time.monotonic() - start
    return ProcessResult(out.decode("utf-8", "replace"), proc.returncode, timed_out, wall)


class BackendAdapter:
    """Knows how to run one backend and read its answers."""

    patterns = DEFAULT_PATTERNS
    arch = "32"

    def invoke(self, bench: BenchmarkSpec, config: FlagConfiguration, timeout_s: float) -> ProcessResult:
        raise NotImplementedError


@dataclass
class ProcessAdapter(BackendAdapter):
    """A real executable driven by an argument template.

    Template tokens may contain ``{arch}``, ``{program}`` and ``{property}``;
    a token that is exactly ``{flags}`` expands to the rendered flags.  When
    the template has no ``{flags}`` token the flags go right after the
    executable; without ``{program}`` the program path is appended.
    """

    executable: str = "esbmc"
    args: list = field(default_factory=lambda: ["--{arch}", "{flags}", "{program}"])
    patterns: tuple = DEFAULT_PATTERNS
    strategy_flags: dict = field(default_factory=dict)
    arch: str = "32"

    def command(self, bench, config):
        flags = render_flags(config, self.strategy_flags)
        subst = {"{arch}": self.arch, "{program}": bench.program_path,
                 "{property}": bench.property_path}
        cmd = [self.executable]
        if "{flags}" not in self.args:
            cmd += flags
        for arg in self.args:
            if arg == "{flags}":
                cmd += flags
                continue
            for key, value in subst.items():
                arg = arg.replace(key, value)
            cmd.append(arg)
        if not any("{program}" in a for a in self.args):
            cmd.append(bench.program_path)
        return cmd

    def invoke(self, bench, config, timeout_s):
        return supervise(self.command(bench, config), timeout_s)


def load_adapter(path) -> BackendAdapter:
    """Read an adapter config file (INI syntax).

    Patterns are regular expressions searched in the backend's output, with
    ``^`` and ``$`` anchoring at line boundaries; a verdict may list several
    patterns on continuation lines.

    ::

        [backend]
        executable = esbmc
        args = --{arch} {flags} {program}
        arch = 32

        [patterns]
        true = VERIFICATION SUCCESSFUL
        false = VERIFICATION FAILED
        unknown = VERIFICATION UNKNOWN

        [strategy]
        Incr = --incremental-bmc

    A ``[mock]`` section with ``table = <file>`` (and optionally
    ``sleep = yes``) selects the scripted mock backend instead.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))

    patterns = DEFAULT_PATTERNS
    if parser.has_section("patterns"):
        compiled = []
        for key, value in parser.items("patterns"):
            try:
                kind = RawVerdict(key.lower())
            except ValueError:
                raise FormatError(f"{path}: unknown verdict {key!r} in [patterns]") from None
            if kind in (RawVerdict.TIMEOUT, RawVerdict.ERROR):
                raise FormatError(f"{path}: patterns may only map to true, false or unknown")
            for line in value.splitlines():
                if line.strip():
                    try:
                        compiled.append((re.compile(line.strip(), re.MULTILINE), kind))
                    except re.error as exc:
                        raise FormatError(f"{path}: bad pattern {line!r}: {exc}") from None
        patterns = tuple(compiled)

    if parser.has_section("mock"):
        from .mock import MockAdapter, load_table

        table = parser.get("mock", "table")
        if not os.path.isabs(table):
            table = os.path.join(base, table)
        adapter = MockAdapter(load_table(table), sleep=parser.getboolean("mock", "sleep", fallback=False))
        adapter.patterns = patterns
        return adapter

    section = parser["backend"] if parser.has_section("backend") else {}
    strategy_flags = {}
    if parser.has_section("strategy"):
        for key, value in parser.items("strategy"):
            try:
                strategy_flags[Strategy(key)] = value.strip()
            except ValueError:
                raise FormatError(f"{path}: unknown strategy {key!r}") from None
    return ProcessAdapter(
        executable=section.get("executable", "esbmc"),
        args=shlex.split(section.get("args", "--{arch} {flags} {program}")),
        patterns=patterns,
        strategy_flags=strategy_flags,
        arch=section.get("arch", "32"),
    )


def run_backend(bench: BenchmarkSpec, config: FlagConfiguration, timeout_s: float,
                adapter: BackendAdapter) -> VerificationOutcome:
    """Run one verification and judge it against ``bench.expected``."""
    if timeout_s <= 0:
        raise ValueError("timeout must be positive")
    result = adapter.invoke(bench, config, timeout_s)
    raw = parse_raw_verdict(result.stdout, result.returncode, result.timed_out, adapter.patterns)
    return VerificationOutcome(
        verdict=derive_verdict(raw, bench.expected),
        wall_time_s=max(0.0, result.wall_time_s),
        raw=raw,
        stdout_digest=_digest(result.stdout),
    )


def python_command(module, *args):
    """Command line that runs a metatune module with the current interpreter."""
    return [sys.executable, "-m", module, *args]
