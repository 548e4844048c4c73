import stat
import sys
import time

import pytest
from hypothesis import given, strategies as st

from metatune.backend import (BenchmarkSpec, Expected, ProcessAdapter, RawVerdict, Verdict,
                              VerificationOutcome, classify, classify_outcome, derive_verdict,
                              load_adapter, parse_raw_verdict, run_backend)
from metatune.errors import FormatError, SpawnFailure
from metatune.flags import FlagConfiguration, Strategy, canonical_grid, default_config
from metatune.mock import MockAdapter, parse_table


def outcome(verdict, t):
    return VerificationOutcome(verdict, t, RawVerdict.TRUE)


@pytest.mark.parametrize("verdict, t, cls", [
    (Verdict.CORRECT_TRUE, 10.0, 0),
    (Verdict.CORRECT_FALSE, 59.9, 1),
    (Verdict.CORRECT_TRUE, 60.0, 2),
    (Verdict.TIMEOUT, 180.0, 4),
    (Verdict.INCORRECT, 1.0, 5),
    (Verdict.UNKNOWN, 3.0, 3),
    (Verdict.ERROR, 0.1, 3),
])
def test_classification_examples(verdict, t, cls):
    assert classify_outcome(outcome(verdict, t)) == cls


@given(st.floats(min_value=0, max_value=1e4, allow_nan=False),
       st.sampled_from([Verdict.CORRECT_TRUE, Verdict.CORRECT_FALSE]))
def test_correct_class_is_a_step_function(t, verdict):
    expected = 0 if t <= 10 else (1 if t < 60 else 2)
    assert classify(verdict, t) == expected


@given(st.floats(min_value=0, max_value=1e4, allow_nan=False), st.sampled_from(list(Verdict)))
def test_classification_total(t, verdict):
    assert classify(verdict, t) in range(6)


def test_parse_raw_verdict_defaults():
    assert parse_raw_verdict("...VERIFICATION SUCCESSFUL\n", 0, False) is RawVerdict.TRUE
    assert parse_raw_verdict("VERIFICATION FAILED\n", 1, False) is RawVerdict.FALSE
    assert parse_raw_verdict("VERIFICATION UNKNOWN", 0, False) is RawVerdict.UNKNOWN
    assert parse_raw_verdict("", 1, False) is RawVerdict.ERROR
    assert parse_raw_verdict("VERIFICATION SUCCESSFUL", 0, True) is RawVerdict.TIMEOUT


def test_last_pattern_wins():
    text = "VERIFICATION FAILED\nretrying\nVERIFICATION SUCCESSFUL\n"
    assert parse_raw_verdict(text, 0, False) is RawVerdict.TRUE
    assert parse_raw_verdict(text + "VERIFICATION FAILED", 0, False) is RawVerdict.FALSE


def test_derive_verdict():
    assert derive_verdict(RawVerdict.TRUE, Expected.TRUE) is Verdict.CORRECT_TRUE
    assert derive_verdict(RawVerdict.FALSE, Expected.FALSE) is Verdict.CORRECT_FALSE
    assert derive_verdict(RawVerdict.FALSE, Expected.TRUE) is Verdict.INCORRECT
    assert derive_verdict(RawVerdict.TRUE, Expected.UNSPECIFIED) is Verdict.UNKNOWN
    assert derive_verdict(RawVerdict.UNKNOWN, Expected.TRUE) is Verdict.UNKNOWN
    assert derive_verdict(RawVerdict.ERROR, Expected.TRUE) is Verdict.ERROR
    assert derive_verdict(RawVerdict.TIMEOUT, Expected.FALSE) is Verdict.TIMEOUT


# -- mock backend -------------------------------------------------------------

TABLE = """
# glob      predicate                  verdict  delay
fast_*      *                          true     2
slow_*      *                          true     5
liar_*      *                          false    1
hang_*      *                          timeout  -
pick_*      cfg=7                      true     0.5
pick_*      context_bound<=2,no_por=0  unknown  3
pick_*      unwind=U                   false    70
crash_*     *                          error    0
"""


def bench(name, expected=Expected.TRUE):
    return BenchmarkSpec(name, "prop.prp", expected)


def test_mock_scripted_outcomes():
    mock = MockAdapter(parse_table(TABLE))
    out = run_backend(bench("fast_a.c"), default_config(), 180, mock)
    assert (out.verdict, out.wall_time_s) == (Verdict.CORRECT_TRUE, 2.0)
    out = run_backend(bench("liar_a.c"), default_config(), 180, mock)
    assert out.verdict is Verdict.INCORRECT
    out = run_backend(bench("hang_a.c"), default_config(), 1.0, mock)
    assert out.verdict is Verdict.TIMEOUT and out.wall_time_s >= 1.0
    out = run_backend(bench("crash_a.c"), default_config(), 10, mock)
    assert out.verdict is Verdict.ERROR and classify_outcome(out) == 3
    out = run_backend(bench("nomatch.c"), default_config(), 10, mock)
    assert out.raw is RawVerdict.ERROR


def test_mock_predicates():
    grid = canonical_grid()
    mock = MockAdapter(parse_table(TABLE), grid)
    assert mock.lookup("pick_x.c", grid[7]) == ("true", 0.5)
    assert mock.lookup("pick_x.c", grid[0]) == ("unknown", 3.0)
    assert mock.lookup("pick_x.c", default_config()) == ("false", 70.0)
    assert mock.lookup("pick_x.c", FlagConfiguration(context_bound=3, unwind=4)) == ("error", 0.0)


def test_mock_simulated_delay_hits_timeout():
    mock = MockAdapter(parse_table("* * true 5\n"))
    out = run_backend(bench("a.c"), default_config(), 5, mock)
    assert out.verdict is Verdict.TIMEOUT and out.wall_time_s == 5
    out = run_backend(bench("a.c"), default_config(), 5.5, mock)
    assert out.verdict is Verdict.CORRECT_TRUE


@pytest.mark.parametrize("bad", [
    "a * true\n", "a * maybe 1\n", "a bogus=1 true 1\n", "a unwind<=x true 1\n", "a * true -3\n",
])
def test_mock_table_errors(bad):
    with pytest.raises(FormatError):
        parse_table(bad)


def test_real_sleep_mock_reports_verdict():
    mock = MockAdapter(parse_table("* * true 0.2\n"), sleep=True)
    out = run_backend(bench("a.c"), default_config(), 10, mock)
    assert out.verdict is Verdict.CORRECT_TRUE
    assert 0.2 <= out.wall_time_s < 5


def test_real_sleep_timeout_is_supervised():
    mock = MockAdapter(parse_table("* * true 10\n"), sleep=True)
    start = time.monotonic()
    out = run_backend(bench("a.c"), default_config(), 1.0, mock)
    elapsed = time.monotonic() - start
    assert out.verdict is Verdict.TIMEOUT
    assert out.wall_time_s >= 1.0
    assert elapsed < 1.0 + 2.0


# -- process adapter ----------------------------------------------------------


def fake_backend(tmp_path, body):
    path = tmp_path / "fake-esbmc"
    path.write_text(f"#!{sys.executable}\nimport sys\n{body}\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_process_adapter_command_line(tmp_path):
    adapter = ProcessAdapter(executable="esbmc", args=["--{arch}", "-p", "{property}", "{flags}", "{program}"])
    cfg = FlagConfiguration(context_bound=2, strategy=Strategy.INCR, k_step=4, no_por=True)
    cmd = adapter.command(BenchmarkSpec("prog.c", "unreach.prp"), cfg)
    assert cmd == ["esbmc", "--32", "-p", "unreach.prp", "--context-bound", "2",
                   "--incremental-bmc", "--k-step", "4", "--no-por", "prog.c"]


def test_process_adapter_default_template():
    cmd = ProcessAdapter(arch="64").command(BenchmarkSpec("p.c"), default_config())
    assert cmd == ["esbmc", "--64", "p.c"]


def test_process_adapter_runs_executable(tmp_path):
    exe = fake_backend(tmp_path, "print('args', sys.argv[1:])\nprint('VERIFICATION FAILED')")
    adapter = ProcessAdapter(executable=exe)
    out = run_backend(BenchmarkSpec("p.c", "", Expected.FALSE), FlagConfiguration(unwind=8), 30, adapter)
    assert out.verdict is Verdict.CORRECT_FALSE
    assert "--unwind" in out.stdout_digest


def test_crash_is_error_not_spawn_failure(tmp_path):
    exe = fake_backend(tmp_path, "sys.exit(3)")
    out = run_backend(bench("p.c"), default_config(), 30, ProcessAdapter(executable=exe))
    assert out.raw is RawVerdict.ERROR


def test_missing_executable_is_spawn_failure(tmp_path):
    adapter = ProcessAdapter(executable=str(tmp_path / "nope"))
    with pytest.raises(SpawnFailure):
        run_backend(bench("p.c"), default_config(), 5, adapter)


def test_non_executable_is_spawn_failure(tmp_path):
    path = tmp_path / "plain"
    path.write_text("not a program")
    with pytest.raises(SpawnFailure):
        run_backend(bench("p.c"), default_config(), 5, ProcessAdapter(executable=str(path)))


def test_process_group_killed_on_timeout(tmp_path):
    # the child spawns a grandchild that would keep the pipe open
    exe = fake_backend(tmp_path, "import subprocess, time\n"
                       "subprocess.Popen([sys.executable, '-c', 'import time; time.sleep(30)'])\n"
                       "time.sleep(30)")
    start = time.monotonic()
    out = run_backend(bench("p.c"), default_config(), 1.0, ProcessAdapter(executable=exe))
    assert out.verdict is Verdict.TIMEOUT
    assert time.monotonic() - start < 3.0


def test_load_adapter_config(tmp_path):
    cfg = tmp_path / "backend.ini"
    cfg.write_text(
        "[backend]\nexecutable = /opt/bmc\nargs = --{arch} {flags} --prop {property} {program}\n"
        "arch = 64\n[patterns]\ntrue = ^OK$\n  ^SAFE$\nfalse = ^BUG\n[strategy]\nIncr = --incr\n"
    )
    adapter = load_adapter(cfg)
    cmd = adapter.command(BenchmarkSpec("x.c", "p.prp"), FlagConfiguration(strategy=Strategy.INCR))
    assert cmd == ["/opt/bmc", "--64", "--incr", "--k-step", "1", "--prop", "p.prp", "x.c"]
    assert parse_raw_verdict("x\nSAFE\n", 0, False, adapter.patterns) is RawVerdict.TRUE
    assert parse_raw_verdict("OK\nBUG found\n", 0, False, adapter.patterns) is RawVerdict.FALSE
    assert parse_raw_verdict("NOT OK\n", 0, False, adapter.patterns) is RawVerdict.ERROR


def test_load_adapter_mock_section(tmp_path):
    (tmp_path / "table.txt").write_text("* * true 1\n")
    cfg = tmp_path / "mock.ini"
    cfg.write_text("[mock]\ntable = table.txt\n")
    adapter = load_adapter(cfg)
    assert isinstance(adapter, MockAdapter)
    assert run_backend(bench("a.c"), default_config(), 5, adapter).verdict is Verdict.CORRECT_TRUE


def test_load_adapter_errors(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[patterns]\nmaybe = X\n")
    with pytest.raises(FormatError):
        load_adapter(cfg)
    cfg.write_text("[patterns]\ntimeout = X\n")
    with pytest.raises(FormatError):
        load_adapter(cfg)
    cfg.write_text("not ini at all")
    with pytest.raises(FormatError):
        load_adapter(cfg)
