import io

import pytest

from metatune import campaign as camp
from metatune.backend import BenchmarkSpec, Expected, Verdict
from metatune.errors import DegenerateSplit, FormatError, SpawnFailure
from metatune.flags import FlagGrid, canonical_grid, default_config, encode
from metatune.mock import MockAdapter, parse_table

import mockworld

TABLE = """\
b0.c  no_por=1   true    2.5
b0.c  *          timeout -
b1.c  unwind<=8  false   12.25
b1.c  *          unknown 0.5
"""


@pytest.fixture
def two_benches(tmp_path):
    benches = []
    for name, expected in (("b0.c", Expected.TRUE), ("b1.c", Expected.TRUE)):
        path = tmp_path / name
        path.write_text(mockworld.wide_source(2))
        benches.append(BenchmarkSpec(str(path), "", expected))
    return benches


def run(benches, journal=None, parallelism=1, max_cells=None, table=TABLE):
    manifest = camp.CampaignManifest(benches, canonical_grid(), 60, parallelism)
    return camp.run_campaign(manifest, MockAdapter(parse_table(table)), journal, max_cells=max_cells)


def test_rows_cover_every_cell_in_order(two_benches):
    rows = run(two_benches)
    assert len(rows) == 480
    assert [(r.bench, r.cfg) for r in rows] == [
        (b.program_path, i) for b in two_benches for i in range(240)
    ]
    grid = canonical_grid()
    for r in rows:
        assert r.flags == tuple(encode(grid[r.cfg]))
        assert len(r.features) == 11


def test_rows_labeled_from_mock(two_benches):
    rows = {(r.bench, r.cfg): r for r in run(two_benches)}
    grid = canonical_grid()
    b0, b1 = (b.program_path for b in two_benches)
    r = rows[(b0, 2)]  # no_por=1
    assert (r.verdict, r.time_s, r.outcome_class) == (Verdict.CORRECT_TRUE, 2.5, 0)
    r = rows[(b0, grid.index(default_config()))]
    assert (r.verdict, r.time_s, r.outcome_class) == (Verdict.TIMEOUT, 60.0, 4)
    r = rows[(b1, 0)]  # unwind 1: wrong answer
    assert (r.verdict, r.outcome_class) == (Verdict.INCORRECT, 5)
    r = rows[(b1, grid.index(default_config()))]
    assert (r.verdict, r.outcome_class) == (Verdict.UNKNOWN, 3)


def test_resume_matches_uninterrupted(two_benches, tmp_path):
    journal = tmp_path / "j.tsv"
    partial = run(two_benches, journal, max_cells=100)
    assert len(partial) == 100
    resumed = run(two_benches, journal)
    assert camp.dataset_text(resumed) == camp.dataset_text(run(two_benches))


def test_resume_tolerates_torn_line(two_benches, tmp_path):
    journal = tmp_path / "j.tsv"
    run(two_benches, journal, max_cells=10)
    with open(journal, "a") as fh:
        fh.write(f"{two_benches[0].program_path}\t10\tcorr")
    resumed = run(two_benches, journal)
    assert camp.dataset_text(resumed) == camp.dataset_text(run(two_benches))


def test_resume_does_not_rerun(two_benches, tmp_path):
    journal = tmp_path / "j.tsv"
    run(two_benches, journal)
    # a table that crashes everything: nothing should be rerun
    again = run(two_benches, journal, table="* * error 0\n")
    assert camp.dataset_text(again) == camp.dataset_text(run(two_benches))


def test_parallel_is_deterministic(two_benches):
    text = camp.dataset_text(run(two_benches))
    assert camp.dataset_text(run(two_benches, parallelism=4)) == text


def test_spawn_failure_keeps_partial_journal(two_benches, tmp_path):
    class Flaky(MockAdapter):
        calls = 0

        def invoke(self, bench, config, timeout_s):
            Flaky.calls += 1
            if Flaky.calls > 5:
                raise SpawnFailure("backend vanished")
            return super().invoke(bench, config, timeout_s)

    journal = tmp_path / "j.tsv"
    manifest = camp.CampaignManifest(two_benches, canonical_grid(), 60)
    with pytest.raises(SpawnFailure):
        camp.run_campaign(manifest, Flaky(parse_table(TABLE)), journal)
    assert len(camp.read_journal(journal)) == 5


def test_malformed_journal_middle_line(tmp_path):
    journal = tmp_path / "j.tsv"
    journal.write_text("a.c\t0\tbogus\t1.0\t0\na.c\t1\tunknown\t1.0\t3\n")
    with pytest.raises(FormatError) as exc:
        camp.read_journal(journal)
    assert exc.value.line == 1


def test_times_rounded(tmp_path):
    path = tmp_path / "p.c"
    path.write_text("int main(void){return 0;}\n")
    grid = FlagGrid([default_config()])
    manifest = camp.CampaignManifest([BenchmarkSpec(str(path), "", Expected.TRUE)], grid, 60)
    rows = camp.run_campaign(manifest, MockAdapter(parse_table("* * true 1.23456789\n"), grid))
    assert rows[0].time_s == 1.234568
    assert "1.234568" in camp.dataset_text(rows)


def test_dataset_round_trip(two_benches):
    rows = run(two_benches)
    text = camp.dataset_text(rows)
    back = camp.read_dataset(io.StringIO(text))
    assert back == rows
    assert camp.dataset_text(back) == text


def test_dataset_header():
    assert camp.dataset_text([]) == ",".join(camp.HEADER) + "\n"
    assert camp.read_dataset(io.StringIO(camp.dataset_text([]))) == []
    assert camp.HEADER[:2] == ["bench", "cfg"] and camp.HEADER[-3:] == ["verdict", "time_s", "class"]
    assert len(camp.HEADER) == 24


def test_dataset_witness_column():
    row = camp.DatasetRow("a.c", 0, (0,) * 11, (0,) * 8, Verdict.CORRECT_TRUE, 1.0, 0, "unconfirmed")
    text = camp.dataset_text([row])
    assert text.splitlines()[0].endswith(",witness")
    assert camp.read_dataset(io.StringIO(text)) == [row]


def _csv(*records):
    return ",".join(camp.HEADER) + "\n" + "".join(r + "\n" for r in records)


ZEROS = ",".join(["0"] * 20)  # cfg, features, flags


@pytest.mark.parametrize("record", [
    f"a.c,{ZEROS},correct_true,12.000000,0",  # 12 s is class 1
    f"a.c,{ZEROS},timeout,180.000000,3",
    f"a.c,{ZEROS},maybe,1.0,0",
    f"a.c,{ZEROS},unknown,-1.0,3",
    f"a.c,{ZEROS},unknown,1.0",
])
def test_dataset_rejects_bad_rows(record):
    with pytest.raises(FormatError) as exc:
        camp.read_dataset(io.StringIO(_csv(f"a.c,{ZEROS},unknown,1.000000,3", record)))
    assert exc.value.line == 3


def test_dataset_rejects_bad_header():
    with pytest.raises(FormatError):
        camp.read_dataset(io.StringIO("bench,cfg\n"))
    with pytest.raises(FormatError):
        camp.read_dataset(io.StringIO(""))


def test_read_manifest(tmp_path):
    (tmp_path / "sub").mkdir()
    path = tmp_path / "m.tsv"
    path.write_text("# comment\nsub/a.c\tprop.prp\ttrue\n/abs/b.c\t\tFALSE\n\nc.c\tp\tunknown\n")
    benches = camp.read_manifest(path)
    assert benches[0] == BenchmarkSpec(str(tmp_path / "sub/a.c"), str(tmp_path / "prop.prp"),
                                       Expected.TRUE)
    assert benches[1] == BenchmarkSpec("/abs/b.c", "", Expected.FALSE)
    assert benches[2].expected is Expected.UNSPECIFIED


@pytest.mark.parametrize("text", ["a.c\ttrue\n", "a.c\tp\tyes\n"])
def test_read_manifest_errors(tmp_path, text):
    path = tmp_path / "m.tsv"
    path.write_text("ok.c\tp\ttrue\n" + text)
    with pytest.raises(FormatError) as exc:
        camp.read_manifest(path)
    assert exc.value.line == 2


def fake_rows(n_benches, per=3):
    return [camp.DatasetRow(f"b{i:02d}", c, (0,) * 11, (0,) * 8, Verdict.UNKNOWN, 1.0, 3)
            for i in range(n_benches) for c in range(per)]


def test_split_by_benchmark():
    rows = fake_rows(10)
    train, hold = camp.split_train(rows, 0.2, 0)
    assert len(camp.benchmark_ids(train)) == 2
    assert len(train) == 6 and len(hold) == 24
    assert not set(camp.benchmark_ids(train)) & set(camp.benchmark_ids(hold))


def test_split_deterministic_and_order_free():
    rows = fake_rows(10)
    a = camp.split_train(rows, 0.5, 42)
    assert a == camp.split_train(rows, 0.5, 42)
    assert set(camp.benchmark_ids(camp.split_train(rows[::-1], 0.5, 42)[0])) == \
        set(camp.benchmark_ids(a[0]))


def test_split_degenerate():
    with pytest.raises(DegenerateSplit):
        camp.split_train(fake_rows(2), 0.2, 0)
    with pytest.raises(DegenerateSplit):
        camp.split_train(fake_rows(1), 0.5, 0)
    with pytest.raises(ValueError):
        camp.split_train(fake_rows(4), 1.0, 0)


def test_manifest_validation():
    with pytest.raises(ValueError):
        camp.CampaignManifest([], canonical_grid(), 0)
    with pytest.raises(ValueError):
        camp.CampaignManifest([], canonical_grid(), 10, 0)
