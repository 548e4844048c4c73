"""Scriptable stand-in for a verification backend.

A table file decides, per benchmark and configuration, what the backend
"answers" and how long it takes::

    # program-glob   predicate                    verdict   delay
    racy_*           context_bound<=2,no_por=0    true      3.5
    racy_*           *                            timeout   -
    *                cfg=7                        false     0.2
    *                *                            unknown   1

The first matching rule wins; no match behaves like a crash.  Predicates
compare configuration fields (``U`` is unlimited and compares greater than
any number) or ``cfg``, the index in the adapter's grid.  Verdicts are
``true``, ``false``, ``unknown``, ``error`` or ``timeout`` (never answers).

Delays are simulated by default: the outcome reports the delay without
waiting.  With ``sleep=True`` a real child process sleeps and prints, which
exercises timeout supervision end to end.  Run as a module, this file is
that child process.
"""

from __future__ import annotations

import argparse
import fnmatch
import math
import operator
import os
import sys
import time
from dataclasses import dataclass

from .backend import BackendAdapter, ProcessResult, python_command, supervise
from .errors import FormatError
from .flags import FLAG_FIELDS, FlagGrid, Strategy, canonical_grid

OUTPUT = {
    "true": "VERIFICATION SUCCESSFUL",
    "false": "VERIFICATION FAILED",
    "unknown": "VERIFICATION UNKNOWN",
}
VERDICTS = ("true", "false", "unknown", "error", "timeout")

_OPS = [("<=", operator.le), (">=", operator.ge), ("!=", operator.ne),
        ("=", operator.eq), ("<", operator.lt), (">", operator.gt)]


def _field_value(name, config, index):
    if name == "cfg":
        return index
    value = getattr(config, name)
    if name in ("context_bound", "unwind") and value is None:
        return math.inf
    if isinstance(value, Strategy):
        return value.value
    if isinstance(value, bool):
        return int(value)
    return value


def _parse_value(name, text):
    if name == "strategy":
        return Strategy(text).value
    if text.upper() == "U":
        return math.inf
    return int(text)


@dataclass(frozen=True)
class Condition:
    name: str
    op: object
    value: object

    def holds(self, config, index):
        actual = _field_value(self.name, config, index)
        if actual is None:
            return False
        return self.op(actual, self.value)


@dataclass(frozen=True)
class Rule:
    program_glob: str
    conditions: tuple
    verdict: str
    delay_s: float

    def matches(self, program_name, config, index):
        if not fnmatch.fnmatchcase(program_name, self.program_glob):
            return False
        return all(c.holds(config, index) for c in self.conditions)


def _parse_predicate(text, lineno):
    if text == "*":
        return ()
    conds = []
    for part in text.split(","):
        for sym, fn in _OPS:
            if sym in part:
                name, _, value = part.partition(sym)
                name = name.strip()
                if name not in FLAG_FIELDS and name != "cfg":
                    raise FormatError(f"unknown field {name!r}", lineno)
                try:
                    conds.append(Condition(name, fn, _parse_value(name, value.strip())))
                except ValueError:
                    raise FormatError(f"bad value in {part!r}", lineno) from None
                break
        else:
            raise FormatError(f"cannot parse condition {part!r}", lineno)
    return tuple(conds)


def parse_table(text):
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError("expected: program-glob predicate verdict delay", lineno)
        glob, pred, verdict, delay = parts
        verdict = verdict.lower()
        if verdict not in VERDICTS:
            raise FormatError(f"unknown verdict {verdict!r}", lineno)
        if verdict == "timeout" or delay == "-":
            delay_s = math.inf
        else:
            try:
                delay_s = float(delay)
            except ValueError:
                raise FormatError(f"bad delay {delay!r}", lineno) from None
            if delay_s < 0:
                raise FormatError("delay must be non-negative", lineno)
        rules.append(Rule(glob, _parse_predicate(pred, lineno), verdict, delay_s))
    return rules


def load_table(path):
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read())


class MockAdapter(BackendAdapter):
    def __init__(self, rules, grid: FlagGrid | None = None, sleep=False):
        self.rules = list(rules)
        self.grid = grid if grid is not None else canonical_grid()
        self.sleep = sleep

    def lookup(self, program_name, config):
        """(verdict, delay) for a benchmark/configuration pair."""
        index = self.grid.index(config) if config in self.grid else None
        for rule in self.rules:
            if rule.matches(program_name, config, index):
                return rule.verdict, rule.delay_s
        return "error", 0.0

    def invoke(self, bench, config, timeout_s):
        verdict, delay = self.lookup(os.path.basename(bench.program_path), config)
        if self.sleep:
            cmd = python_command("metatune.mock", "--verdict", verdict, "--delay", repr(delay))
            return supervise(cmd, timeout_s)
        if delay >= timeout_s:
            return ProcessResult("", None, True, float(timeout_s))
        stdout = OUTPUT.get(verdict, "")
        return ProcessResult(stdout + "\n" if stdout else "", 0 if stdout else 1, False, delay)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="metatune.mock", description="sleep, then print a verdict")
    ap.add_argument("--verdict", choices=VERDICTS, required=True)
    ap.add_argument("--delay", type=float, default=0.0)
    args = ap.parse_args(argv)
    if math.isinf(args.delay):
        while True:
            time.sleep(3600)
    time.sleep(args.delay)
    text = OUTPUT.get(args.verdict)
    if text is None:
        sys.stderr.write("mock backend: simulated crash\n")
        return 1
    print(text, flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
