import csv
import json
import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irs_swipt import cli
from irs_swipt.algorithms import BcdOptions
from irs_swipt.channel import SystemConfig, draw_realization
from irs_swipt.harness import (AGG_HEADER, CSV_HEADER, ConfigError, ExperimentSpec, TrialRecord,
                               aggregate, child_seed, emit_csv, emit_plot, emit_summary,
                               run_algorithm, run_experiment, write_outputs)

QUICK = SystemConfig(num_irs_elements=4)


def _spec(**kw):
    base = dict(config=QUICK, sweep_axis="N", sweep_values=(0, 4), trials=2,
                algorithms=("bcd", "zf", "bcd-noirs", "zf-noirs"), timing=False,
                options=BcdOptions(max_iter=5))
    base.update(kw)
    return ExperimentSpec(**base)


@pytest.fixture(scope="module")
def small_result():
    return run_experiment(_spec())


# --- seeds ---------------------------------------------------------------

def test_child_seed_collision_free():
    seeds = {child_seed(m, i, t) for m, i, t in product(range(3), range(20), range(200))}
    assert len(seeds) == 3 * 20 * 200
    with pytest.raises(ValueError):
        child_seed(-1, 0, 0)
    with pytest.raises(ValueError):
        child_seed(0, 2 ** 32, 0)


@given(st.tuples(st.integers(0, 2 ** 64), st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1)),
       st.tuples(st.integers(0, 2 ** 64), st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1)))
def test_child_seed_injective(a, b):
    assert (child_seed(*a) == child_seed(*b)) == (a == b)


def test_common_random_numbers_switch():
    assert _spec().realization_seed(1, 3) == _spec().realization_seed(0, 3)
    indep = _spec(common_random_numbers=False)
    assert indep.realization_seed(1, 3) != indep.realization_seed(0, 3)


# --- spec validation -----------------------------------------------------

@pytest.mark.parametrize("kw", [dict(sweep_axis="K"), dict(sweep_values=()),
                                dict(algorithms=("bcd", "nope")), dict(algorithms=()),
                                dict(trials=0), dict(seed=-1), dict(workers=0),
                                dict(sweep_axis="M", sweep_values=(4.5,)),
                                dict(sweep_axis="M", sweep_values=(0,))])
def test_spec_rejects_invalid(kw):
    with pytest.raises(ConfigError):
        _spec(**kw)


def test_spec_dict_roundtrip(tmp_path):
    spec = _spec(sweep_axis="sinr_target_db", sweep_values=(0, 5))
    again = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again.to_dict() == spec.to_dict()
    p = tmp_path / "s.json"
    p.write_text(json.dumps(spec.to_dict()))
    assert ExperimentSpec.from_json(p).to_dict() == spec.to_dict()
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"config": {"num_users": 0}})
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentSpec.from_json(p)
    with pytest.raises(ConfigError):
        ExperimentSpec.from_json(tmp_path / "missing.json")


def test_zf_skipped_when_too_few_antennas():
    spec = _spec(sweep_axis="M", sweep_values=(1, 2), trials=1, algorithms=("zf", "bcd-noirs"))
    assert [(v, a) for v, a, _ in spec.skipped()] == [(1, "zf")]
    res = run_experiment(spec)
    assert {(r.sweep_value, r.algorithm) for r in res.records} == {
        (1, "bcd-noirs"), (2, "zf"), (2, "bcd-noirs")}


# --- running -------------------------------------------------------------

def test_records_order_and_status(small_result):
    recs = small_result.records
    assert len(recs) == 2 * 2 * 4
    keys = [(r.sweep_index, r.trial) for r in recs]
    assert keys == sorted(keys)
    for r in recs:
        assert r.status in ("ok", "infeasible", "degenerate", "numerical-failure")
        if r.status == "ok":
            assert r.min_sinr_margin >= -1e-6 and r.min_eh_margin >= -1e-6
            assert r.power_dbw == pytest.approx(10 * math.log10(r.power_w))


def test_shared_realization_dominance():
    spec = ExperimentSpec(config=SystemConfig(), sweep_values=(50,), trials=1,
                          algorithms=("bcd-noirs", "bcd"), timing=False)
    res = run_experiment(spec)
    bcd, base = res.powers("bcd", 0), res.powers("bcd-noirs", 0)
    assert set(bcd) == set(base) == {0}
    assert bcd[0] <= base[0] * (1 + 1e-6)


def test_no_irs_baseline_flat_across_n(small_result):
    for algo in ("bcd-noirs", "zf-noirs"):
        assert small_result.powers(algo, 0) == small_result.powers(algo, 1)


def test_failures_are_recorded_not_raised():
    cfg = SystemConfig(num_bs_antennas=1, num_irs_elements=0)
    real = draw_realization(cfg, 0)
    rec = run_algorithm("zf", cfg, real, BcdOptions())
    assert rec.status == "degenerate" and "M >= K" in rec.note
    rec = run_algorithm("mrt", SystemConfig(num_irs_elements=0), draw_realization(
        SystemConfig(num_irs_elements=0), 0), BcdOptions())
    assert rec.status == "infeasible" and math.isnan(rec.power_w)


def test_aggregate_over_ok_only():
    mk = lambda st_, p, t: TrialRecord("N", 10, "bcd", 0, st_, power_w=p,  # noqa: E731
                                       power_dbw=10 * math.log10(p), trial=t)
    recs = [mk("ok", 10.0, 0), mk("ok", 1000.0, 1), mk("infeasible", 1e9, 2),
            mk("numerical-failure", 1e9, 3)]
    (a,) = aggregate(recs)
    assert (a.trials, a.ok) == (4, 2)
    assert a.infeasible_rate == 0.25
    assert a.mean_dbw == pytest.approx(20.0)
    assert a.se_dbw == pytest.approx(np.std([10, 30], ddof=1) / math.sqrt(2))
    assert a.mean_w == pytest.approx(505.0)


# --- output --------------------------------------------------------------

def test_csv_format(tmp_path):
    rec = TrialRecord("N", 10, "bcd", 12345, "ok", power_w=0.1, power_dbw=-10.0, iterations=3,
                      min_sinr_margin=1e-9, min_eh_margin=0.25, wall_ms=1.5)
    path = emit_csv([rec], tmp_path / "one.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert len(lines) == 2
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[0] == ("sweep_axis,sweep_value,algorithm,seed,status,power_w,power_dbw,"
                        "iterations,min_sinr_margin,min_eh_margin,wall_ms")
    row = next(csv.DictReader(raw.decode().splitlines()))
    assert row["power_w"] == "0.10000000000000001"  # 17 significant digits
    assert float(row["power_w"]) == 0.1
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "empty.csv")


def test_summary_and_plot(tmp_path, small_result):
    emit_summary(small_result.aggregates, tmp_path / "s.csv", "N")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == ",".join(AGG_HEADER)
    svg = emit_plot(small_result.aggregates, tmp_path / "p.svg", "N").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    for algo in small_result.spec.algorithms:
        assert algo in svg
    with pytest.raises(ValueError):
        emit_plot([], tmp_path / "e.svg")
    with pytest.raises(ValueError):
        emit_summary([], tmp_path / "e.csv", "N")


def test_unwritable_path_names_the_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rec = TrialRecord("N", 10, "bcd", 0, "ok")
    with pytest.raises(OSError, match="file"):
        emit_csv([rec], blocker / "sub" / "t.csv")


def test_rerun_is_byte_identical(tmp_path, small_result):
    a = write_outputs(small_result, tmp_path / "a")
    b = write_outputs(run_experiment(_spec()), tmp_path / "b")
    for key in ("trials", "summary", "plot", "spec"):
        assert a[key].read_bytes() == b[key].read_bytes(), key


def test_parallel_matches_serial(small_result):
    par = run_experiment(_spec(workers=2))
    assert [r.csv_row() for r in par.records] == [r.csv_row() for r in small_result.records]


# --- command line --------------------------------------------------------

def test_cli_success(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["--trials", "1", "--sweep", "N=0,2", "--algo", "bcd,bcd-noirs",
                     "--out", str(out), "--seed", "3", "--no-timing"])
    assert code == 0
    for name in ("trials.csv", "summary.csv", "power.svg", "spec.json"):
        assert (out / name).exists()
    assert len((out / "trials.csv").read_text().splitlines()) == 1 + 2 * 2
    assert "bcd-noirs" in capsys.readouterr().out
    spec = json.loads((out / "spec.json").read_text())
    assert spec["seed"] == 3 and spec["sweep"] == {"axis": "N", "values": [0, 2]}


def test_cli_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"config": {"num_irs_elements": 2}, "trials": 5,
                               "algorithms": ["zf-noirs"], "sweep": {"axis": "M",
                                                                     "values": [2, 3]}}))
    out = tmp_path / "o"
    assert cli.main(["--config", str(cfg), "--trials", "1", "--out", str(out), "-q"]) == 0
    rows = list(csv.DictReader((out / "trials.csv").open()))
    assert [r["sweep_value"] for r in rows] == ["2", "3"]
    assert all(r["algorithm"] == "zf-noirs" for r in rows)


@pytest.mark.parametrize("argv", [["--sweep", "K=1,2"], ["--sweep", "N"], ["--sweep", "N=a"],
                                  ["--sweep", "N="], ["--algo", "foo"], ["--trials", "0"],
                                  ["--config", "/nonexistent/x.json"]])
def test_cli_config_errors_exit_nonzero(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path), "-q"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_unwritable_output(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("x")
    code = cli.main(["--trials", "1", "--sweep", "N=0", "--algo", "zf-noirs",
                     "--out", str(blocker / "d"), "-q"])
    assert code == 3
