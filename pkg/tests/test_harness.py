import csv
import json

import numpy as np
import pytest

from mmwsim import harness
from mmwsim.cli import main
from mmwsim.errors import ConfigurationError
from mmwsim.harness import Scenario

SMALL = dict(layout={"site_size": 300.0, "network_size": 200.0}, bs_density=100.0, ue_density=1000.0,
             n_realizations=2, seed=3)


def small(**kw):
    return Scenario(**{**SMALL, **kw})


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_scenario_roundtrip(tmp_path):
    sc = small(mac="TDMA", n_limit=4, radio={"noise_figure_db": 7.0})
    f = tmp_path / "s.json"
    sc.save(f)
    assert Scenario.load(f) == sc
    assert json.loads(f.read_text())["schema_version"] == harness.SCHEMA_VERSION


@pytest.mark.parametrize("kw", [dict(mac="FDMA"), dict(bs_density=0.0), dict(n_realizations=0),
                                dict(bs_pattern="horn"), dict(radio={"bogus": 1}), dict(schema_version=9),
                                dict(n_limit=0), dict(max_bounces=3)])
def test_scenario_validation(kw):
    with pytest.raises(ConfigurationError):
        small(**kw)


def test_unknown_scenario_key():
    with pytest.raises(ConfigurationError):
        Scenario.from_dict({"bs_densty": 10})


def test_seeds_fixed_split():
    sc = small(n_realizations=4)
    seeds = sc.realization_seeds()
    assert seeds == small(n_realizations=4).realization_seeds()
    assert seeds[:2] == small(n_realizations=2).realization_seeds()
    assert len(set(seeds)) == 4


def test_su_and_tdma_interference_rules():
    seed = small().realization_seeds()[0]
    su = harness.run_realization(small(mac="SU"), seed)
    tdma = harness.run_realization(small(mac="TDMA"), seed)
    assert all(r.i_intra_mw == 0 and r.i_inter_mw == 0 for r in su.served)
    assert all(r.i_intra_mw == 0 for r in tdma.served)


def test_realization_deterministic():
    seed = small().realization_seeds()[1]
    a = harness.run_realization(small(), seed)
    b = harness.run_realization(small(), seed)
    assert a.records == b.records and a.scalars == b.scalars


def test_su_upper_bound_per_realization():
    for seed in small(n_realizations=3).realization_seeds():
        t = {m: harness.run_realization(small(mac=m), seed).scalars["avg_throughput_all_bps"]
             for m in ("SU", "TDMA", "SDMA")}
        assert t["SU"] >= t["TDMA"] and t["SU"] >= t["SDMA"]


def test_tdma_air_time_partition():
    b = harness.run_realization(small(mac="TDMA"), 5)
    per_bs = {}
    for r in b.served:
        per_bs[r.serving_bs] = per_bs.get(r.serving_bs, 0.0) + r.air_time
    assert per_bs and all(v == pytest.approx(1.0, abs=1e-12) for v in per_bs.values())


def test_dropped_records():
    b = harness.run_realization(small(), 2)
    for r in b.records:
        if r.dropped:
            assert r.throughput_bps == 0 and r.sinr_db is None
        else:
            assert np.isfinite(r.sinr_db) and r.throughput_bps > 0
    s = b.scalars
    assert s["coverage_ratio"] == pytest.approx(np.mean([r.throughput_bps > 0 for r in b.records]))


def test_served_ratio_with_limit():
    seed = small().realization_seeds()[0]
    assert harness.run_realization(small(), seed).scalars["served_ratio"] == 1.0
    ratios = [harness.run_realization(small(n_limit=n), seed).scalars["served_ratio"] for n in (1, 2, 4, 8)]
    assert all(r <= 1.0 for r in ratios)
    assert ratios == sorted(ratios)


def test_aggregate_single_and_pooled():
    one, per = harness.run_scenario(small(n_realizations=1))
    assert one.scalars == per[0].scalars and one.records == per[0].records
    agg, per = harness.run_scenario(small(n_realizations=3))
    assert len(agg.records) == sum(len(p.records) for p in per)
    assert all(np.isfinite(agg.std[k]) for k in ("coverage_ratio", "avg_throughput_all_bps"))


def test_parallel_matches_serial():
    a, _ = harness.run_scenario(small(), workers=1)
    b, _ = harness.run_scenario(small(), workers=2)
    assert a.records == b.records and a.scalars == b.scalars


def test_emit_outputs(tmp_path):
    agg, _ = harness.run_scenario(small())
    harness.emit_outputs(agg, tmp_path)
    recs = read(tmp_path / "ue_records.csv")
    assert recs[0][:4] == ["realization", "ue_id", "x", "y"]
    assert len(recs) - 1 == len(agg.records)
    for name in ("cdf_sinr.csv", "cdf_throughput.csv", "cdf_interference.csv"):
        rows = read(tmp_path / name)[1:]
        for col in range(1, 3):
            p = [float(r[col]) for r in rows]
            assert all(0 <= x <= 1 for x in p) and p == sorted(p)
    inter = read(tmp_path / "cdf_interference.csv")
    assert inter[0] == ["interference_dbm", "cdf_intra", "cdf_inter", "noise_floor_dbm"]
    assert {r[3] for r in inter[1:]} == {"-78.0"}
    links = read(tmp_path / "links.csv")
    assert len(links) - 1 == len(agg.served)
    assert {r[9] for r in links[1:]} <= {"LOS", "NLOS"}
    summary = {r[0]: r for r in read(tmp_path / "summary.csv")[1:]}
    assert float(summary["coverage_ratio"][1]) == pytest.approx(agg.scalars["coverage_ratio"])


def test_emit_with_nobody_served(tmp_path):
    b = harness.MetricsBundle([harness.UERecord(0, 0, 1.0, 2.0, None, None, None, None, None, 0.0,
                                                None, None, None, True, False)], {"coverage_ratio": 0.0})
    harness.emit_outputs(b, tmp_path)
    assert read(tmp_path / "cdf_sinr.csv") == [["sinr_db", "cdf_served", "cdf_all"]]
    assert len(read(tmp_path / "ue_records.csv")) == 2


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    agg, _ = harness.run_scenario(small(n_realizations=1))
    with pytest.raises(OSError):
        harness.emit_outputs(agg, blocker / "out")


def test_csv_byte_identical(tmp_path):
    for d in ("a", "b"):
        agg, _ = harness.run_scenario(small())
        harness.emit_outputs(agg, tmp_path / d)
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_ecdf_rows_counts_dropped():
    rows = harness.ecdf_rows([3.0, 1.0, 1.0], n_total=4)
    assert rows == [(1.0, 2 / 3, 3 / 4), (3.0, 1.0, 1.0)]
    assert harness.ecdf_rows([]) == []


def test_sweep_cells_and_errors():
    cells = harness.sweep_cells(small(), {"bs_density": [32, 64, 100, 196], "mac": ["SU", "TDMA", "SDMA"]})
    assert len(cells) == 12
    with pytest.raises(ConfigurationError, match="mac"):
        harness.sweep_cells(small(), {"bs_density": [64], "mac": []})
    with pytest.raises(ConfigurationError, match="colour"):
        harness.sweep_cells(small(), {"colour": [1]})
    (_, sc), = harness.sweep_cells(small(), {"antenna": ["32x32/4x4"]})
    assert (sc.bs_pattern, sc.ue_pattern) == ("32x32", "4x4")


def test_sweep_reproducible(tmp_path):
    axes = {"mac": ["TDMA", "SDMA"], "n_limit": [None, 2]}
    a = harness.sweep(small(n_realizations=1), axes)
    b = harness.sweep(small(n_realizations=1), axes)
    assert len(a) == 4
    harness.write_sweep(a, tmp_path / "a.csv")
    harness.write_sweep(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_end_to_end(tmp_path, capsys):
    sc = tmp_path / "sc.json"
    small(n_realizations=1).save(sc)
    out = tmp_path / "run"
    assert main(["run", "--scenario", str(sc), "--out", str(out), "--mac", "TDMA"]) == 0
    assert (out / "figures" / "cdf_sinr.png").stat().st_size > 0
    assert (out / "figures" / "link_map.png").exists()
    assert Scenario.load(out / "scenario.json").mac == "TDMA"

    axes = tmp_path / "axes.json"
    axes.write_text(json.dumps({"base": small(n_realizations=1).to_dict(),
                                "axes": {"bs_density": [64, 100], "mac": ["TDMA", "SDMA"]}}))
    assert main(["sweep", "--axes", str(axes), "--out", str(tmp_path / "sw")]) == 0
    assert len(read(tmp_path / "sw" / "sweep.csv")) == 5
    assert (tmp_path / "sw" / "sweep_throughput.png").exists()

    lay = tmp_path / "lay.csv"
    assert main(["export-layout", "--params", '{"site_size": 300, "network_size": 200}', "--out", str(lay)]) == 0
    inv = tmp_path / "inv.csv"
    assert main(["trace-paths", "--layout", str(lay), "--bs", "0", "--out", str(inv)]) == 0
    assert read(inv)[1][0] == "bs_id"
    assert main(["export-pattern", "16x16", "--out", str(tmp_path / "p.csv")]) == 0
    assert "HPBW" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mac": "CDMA"}))
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "unknown MAC" in capsys.readouterr().err
    axes = tmp_path / "axes.json"
    axes.write_text(json.dumps({"axes": {"mac": []}}))
    assert main(["sweep", "--axes", str(axes), "--out", str(tmp_path / "o")]) == 2
    assert "'mac' is empty" in capsys.readouterr().err
