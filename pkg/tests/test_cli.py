import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cutofflab import cli
from cutofflab.bounds import BoundReport
from cutofflab.errors import AsymmetricSupport, ChainFormatError, RowSumError
from cutofflab.fileio import (
    chain_to_text,
    fmt_float,
    format_table,
    parse_chain_csv,
    parse_chain_text,
    parse_table,
    read_chain,
    write_chain,
)

from conftest import chains, cycle, lazy_two_state


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# -- chain files ----------------------------------------------------------------

def test_parse_triplets_with_comments():
    text = "# lazy walk\nn=2\n\n0 0 0.5  # self\n1 0 0.5\n0 1 0.5\n1 1 0.5\n"
    c = parse_chain_text(text)
    np.testing.assert_array_equal(c.dense(), np.full((2, 2), 0.5))


@pytest.mark.parametrize("text, line", [
    ("n=2\n0 0 0.5\n0 1\n", 3),
    ("n=2\n0 0 0.5\n0 1 abc\n", 3),
    ("n=2\n0 0 0.5\n0 5 0.5\n", 3),
    ("n=2\n0 0 0.5\n0 0 0.5\n", 3),
    ("0 0 0.5\n", 1),
    ("# only\nn=two\n", 2),
])
def test_malformed_lines_report_line_number(text, line):
    with pytest.raises(ChainFormatError) as info:
        parse_chain_text(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_entries_are_zero_and_validated():
    with pytest.raises(RowSumError):
        parse_chain_text("n=2\n0 0 0.5\n1 1 1\n")
    with pytest.raises(AsymmetricSupport):
        parse_chain_text("n=2\n0 0 0.5\n0 1 0.5\n1 1 1\n")


def test_dense_csv(tmp_path):
    path = tmp_path / "k.csv"
    path.write_text("0,1\n0.5,0.5\n")
    c = read_chain(path)
    assert c.dense()[1, 0] == 0.5
    with pytest.raises(ChainFormatError):
        parse_chain_csv("0,1\n0.5\n")


@given(chains(max_n=10))
def test_chain_file_round_trip_is_exact(c):
    again = parse_chain_text(chain_to_text(c))
    np.testing.assert_array_equal(again.dense(), c.dense())


def test_write_chain_both_formats(tmp_path):
    c = cycle(5, laziness=0.3)
    for name in ("c.txt", "c.csv"):
        write_chain(c, tmp_path / name)
        np.testing.assert_array_equal(read_chain(tmp_path / name).dense(), c.dense())


def test_unreadable_file():
    with pytest.raises(ChainFormatError):
        read_chain("/nonexistent/chain.txt")


# -- tables ------------------------------------------------------------------------

def test_fifteen_significant_digits():
    assert fmt_float(math.pi) == "3.14159265358979"
    assert fmt_float(float("nan")) == "nan"
    assert fmt_float(1e-300) == "1e-300"


_values = st.one_of(
    st.floats(allow_nan=False, allow_infinity=False),
    st.integers(-10**6, 10**6),
    st.booleans(),
)


@given(st.lists(st.fixed_dictionaries({"a": _values, "b": st.floats(allow_nan=False, allow_infinity=False)}), min_size=1, max_size=6))
def test_table_round_trip_is_stable(records):
    for fmt in ("csv", "json"):
        text = format_table(records, fmt)
        again = format_table(parse_table(text, fmt), fmt)
        assert again == text


def test_json_lines_have_one_object_per_record():
    text = format_table([{"x": 0.1 + 0.2, "nested": {"k": 1 / 3}}, {"x": float("nan")}], "json")
    lines = text.splitlines()
    assert json.loads(lines[0]) == {"x": 0.3, "nested": {"k": 0.333333333333333}}
    assert json.loads(lines[1]) == {"x": None}


# -- commands ----------------------------------------------------------------------

@pytest.fixture
def two_state_file(tmp_path):
    path = tmp_path / "two.txt"
    path.write_text(chain_to_text(lazy_two_state()))
    return path


def test_validate_ok(capsys, two_state_file):
    code, out, _ = run(capsys, "validate", str(two_state_file), "--json")
    assert code == 0
    rec = json.loads(out)
    assert rec["delta"] == 0.5 and rec["diameter"] == 1 and rec["symmetric_support"] is True


def test_validate_asymmetric_names_pair(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("n=2\n0 0 0.5\n0 1 0.5\n1 1 1\n")
    code, out, err = run(capsys, "validate", str(path), "--json")
    assert code == 1 and out == ""
    rec = json.loads(err)
    assert rec["error"] == "AsymmetricSupport" and rec["pair"] == [0, 1]


def test_validate_malformed_line(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("n=2\n0 0 0.5\n0 1 oops\n")
    code, _, err = run(capsys, "validate", str(path))
    assert code == 1 and "line 3" in err
    code, _, err = run(capsys, "validate", str(path), "--json")
    assert json.loads(err)["line"] == 3


def test_profile_fixed_grid(capsys, two_state_file):
    code, out, _ = run(capsys, "profile", str(two_state_file), "--times", "0,0.6931471805599453", "--csv")
    assert code == 0
    rows = parse_table(out, "csv")
    assert rows[0]["dtv"] == 0.5
    r = rows[1]
    assert (r["dtv"], r["argmax_tv"], r["argmax_kl"], r["argmax_vkl"]) == (0.25, 0, 0, 0)
    assert r["dkl"] == pytest.approx(0.1308123, abs=1e-6)
    assert r["vkl"] == pytest.approx(0.2263025, abs=1e-6)


def test_profile_auto_grid_and_plot_data(capsys, tmp_path):
    plots = tmp_path / "plots"
    code, out, _ = run(capsys, "profile", "--family", "cycle", "--size", "8", "--json", "--plot-data", str(plots))
    assert code == 0
    rows = [json.loads(x) for x in out.splitlines()]
    assert len(rows) == 64
    assert rows[0]["t"] == pytest.approx(1.0)
    d = [r["dtv"] for r in rows]
    assert all(b <= a for a, b in zip(d, d[1:]))
    assert sorted(p.name for p in plots.iterdir()) == ["dkl.csv", "dtv.csv", "vkl.csv"]
    curve = parse_table((plots / "dtv.csv").read_text(), "csv")
    assert [c["dtv"] for c in curve] == d


def test_mixing_time_command(capsys):
    code, out, _ = run(capsys, "mixing-time", "--family", "complete", "--size", "4", "--eps", "0.25", "--json")
    assert code == 0
    assert json.loads(out)["t_mix"] == pytest.approx(0.75 * math.log(3), abs=1e-8)


def test_verify_two_state_passes(capsys, two_state_file):
    code, out, err = run(capsys, "verify", str(two_state_file), "--json")
    assert code == 0
    assert "0 failed" in err
    statuses = {json.loads(x)["status"] for x in out.splitlines()}
    assert "FAIL" not in statuses


def test_verify_flip_chain_skips_and_strict_fails(capsys, tmp_path):
    path = tmp_path / "flip.txt"
    path.write_text("n=2\n0 1 1\n1 0 1\n")
    code, out, _ = run(capsys, "verify", str(path), "--json")
    assert code == 0
    recs = [json.loads(x) for x in out.splitlines()]
    p = [r for r in recs if r["bound_id"] == "p_control"][0]
    assert p["status"] == "SKIPPED" and p["reason"] == "delta-above-half"
    code, _, _ = run(capsys, "verify", str(path), "--strict")
    assert code == 2


def test_verify_reports_failure_with_exit_two(capsys, monkeypatch, two_state_file):
    bad = BoundReport("p_control", 2.0, 1.0, -1.0, "FAIL", True)
    monkeypatch.setattr(cli, "verify", lambda *a, **k: [bad])
    code, out, err = run(capsys, "verify", str(two_state_file))
    assert code == 2 and "1 failed" in err


def test_corrupt_file_stops_before_checks(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("n=3\n0 1 1\n")
    code, out, err = run(capsys, "verify", str(path))
    assert code == 1 and out == "" and "error" in err


def test_numerical_failure_exit_three(capsys):
    code, _, err = run(capsys, "profile", "--family", "cycle", "--size", "4", "--times", "1e7")
    assert code == 3 and "ToleranceUnreachable" in err


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "profile", "--bogus")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "sweep", "--family", "cycle")[0] == 1
    assert run(capsys, "profile", "--family", "cycle")[0] == 1


def test_generate_then_validate(capsys, tmp_path):
    path = tmp_path / "rr.txt"
    code, _, _ = run(capsys, "generate", "--family", "random-regular", "--size", "12", "--seed", "4", "-o", str(path))
    assert code == 0
    c = read_chain(path)
    assert c.n == 12
    code, out, _ = run(capsys, "generate", "--family", "random-regular", "--size", "12", "--seed", "4")
    assert out == path.read_text()
    assert run(capsys, "validate", str(path))[0] == 0
    csv_path = tmp_path / "rr.csv"
    run(capsys, "generate", "--family", "random-regular", "--size", "12", "--seed", "4", "-o", str(csv_path))
    np.testing.assert_array_equal(read_chain(csv_path).dense(), c.dense())


def test_sweep_json_sections(capsys, tmp_path):
    plots = tmp_path / "p"
    code, out, _ = run(capsys, "sweep", "--family", "cycle", "--sizes", "8,16,32", "--json", "--plot-data", str(plots))
    assert code == 0
    recs = [json.loads(x) for x in out.splitlines()]
    kinds = [r["record"] for r in recs]
    assert kinds == ["size"] * 3 + ["verdict"] + ["bound"] * 3
    assert recs[3]["verdict"] == "no-cutoff-consistent"
    assert sorted(p.name for p in plots.iterdir()) == ["vc_statistic_eps0.25.csv", "vc_statistic_eps0.5.csv",
                                                       "vc_statistic_eps0.75.csv", "window_ratio_eps0.25.csv"]


def test_sweep_csv_round_trip(capsys):
    code, out, _ = run(capsys, "sweep", "--family", "complete", "--sizes", "4,8,16", "--csv")
    assert code == 0
    first = out.split("\n\n")[0] + "\n"
    assert format_table(parse_table(first, "csv"), "csv") == first


def test_sweep_output_is_independent_of_threads(capsys):
    args = ["sweep", "--family", "random-regular", "--sizes", "16,24,32", "--seed", "5", "--json"]
    _, one, _ = run(capsys, *args, "--threads", "1")
    _, three, _ = run(capsys, *args, "--threads", "3")
    assert one == three


def test_thread_env_var(capsys, monkeypatch):
    monkeypatch.setenv(cli.ENV_THREADS, "2")
    assert cli.default_threads() == 2
    monkeypatch.setenv(cli.ENV_THREADS, "many")
    assert run(capsys, "mixing-time", "--family", "cycle", "--size", "4")[0] == 1
    assert run(capsys, "mixing-time", "--family", "cycle", "--size", "4", "--threads", "0")[0] == 1


def test_config_save_and_replay(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    args = ["mixing-time", "--family", "random-symmetric", "--size", "7", "--seed", "9",
            "--eps", "0.3,0.6", "--json", "--t-tol", "1e-10", "--save-config", str(cfg)]
    code, first, _ = run(capsys, *args)
    assert code == 0
    saved = json.loads(cfg.read_text())
    assert saved["command"] == "mixing-time" and saved["epsilons"] == [0.3, 0.6]
    code, again, _ = run(capsys, "--config", str(cfg))
    assert code == 0 and again == first


def test_config_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "validate", "bogus": 1}))
    assert run(capsys, "--config", str(cfg))[0] == 1
