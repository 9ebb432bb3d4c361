"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a PASS/FAIL line shown in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import math
import subprocess
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from mmwsim import antenna, harness
from mmwsim.allocation import allocate_exhaustive, allocate_greedy, build_candidates
from mmwsim.linkmodel import AllocationState, LinkModel, RadioConfig, throughput, total_power_dbm
from mmwsim.propagation import PropagationPath, fspl_db

import oracles

# dense synthetic layout, 250 m x 250 m network in a 400 m site, five UE realizations
BASE = harness.Scenario(layout_preset="dense", layout={"site_size": 400.0, "network_size": 250.0},
                        layout_seed=0, bs_density=64.0, ue_density=1000.0, bs_pattern="ideal10",
                        ue_pattern="ideal10", n_realizations=5, seed=0)


@lru_cache(maxsize=None)
def scalars(**kw):
    agg, _ = harness.run_scenario(BASE.replace(**kw))
    return agg.scalars


def test_c01_noise_floor(criterion):
    n = RadioConfig().noise_power_dbm
    ok = abs(n - (-78.0)) <= 0.05
    criterion(1, ok, f"noise power {n:.4f} dBm (target -78.0 +/- 0.05)")
    assert ok


def test_c02_throughput_breakpoints(criterion):
    cfg = RadioConfig()
    below = throughput(-10.01, 1.0, cfg)
    above = [throughput(22.06, a, cfg) for a in (1.0, 0.5, 0.25)]
    cont = cfg.alpha * cfg.bandwidth_hz * math.log2(1 + 10 ** (22.05 / 10))
    ok = (below == 0.0 and all(r == pytest.approx(a * 4.4e9, rel=1e-12) for r, a in zip(above, (1.0, 0.5, 0.25)))
          and abs(cont / 4.4e9 - 1) <= 0.005)
    criterion(2, ok, f"R(-10.01)={below:.0f}, R(22.06)={above[0]:.4g}, continuity {cont / 4.4e9 - 1:+.4%}")
    assert ok


TABLE3 = [("32x32", "iso", -48.0), ("32x32", "4x4", -31.5), ("32x32", "8x8", -25.2), ("32x32", "16x16", -19.1),
          ("32x32", "32x32", -13.0), ("16x16", "16x16", -19.1), ("8x8", "8x8", -25.2), ("4x4", "4x4", -31.5)]


def test_c03_link_budget_table(criterion):
    t0 = time.perf_counter()
    cfg = RadioConfig()
    worst = 0.0
    got = []
    for bs_name, ue_name, want in TABLE3:
        p_bs, p_ue = antenna.pattern_from_name(bs_name), antenna.pattern_from_name(ue_name)
        path = PropagationPath("LOS", 0, (0.0, 0.0), (-180.0, 0.0), fspl_db(10.0), 10.0)
        m = LinkModel({(0, 0): [path]}, p_bs, p_ue, cfg)
        rss = total_power_dbm(cfg, p_bs) + 10 * math.log10(m.total_link_gain(0, 0, 0))
        got.append(round(rss, 2))
        worst = max(worst, abs(rss - want))
    dt = time.perf_counter() - t0
    ok = worst <= 1.0 and dt < 1.0
    criterion(3, ok, f"RSS {got} dBm, worst deviation {worst:.2f} dB, {dt:.2f} s")
    assert ok


def test_c04_array_table(criterion):
    t0 = time.perf_counter()
    peaks = {4: 16.5, 8: 22.8, 16: 28.9, 32: 35.0}
    hpbw = {4: 26.0, 8: 12.4, 16: 6.0, 32: 2.8}
    rows = []
    ok = True
    for n in peaks:
        p = antenna.PlanarArray(n)    # fresh instance so the timing includes the integration
        g, h = p.peak_gain_dbi, antenna.hpbw_deg(p)
        ok &= abs(g - peaks[n]) <= 1.0 and abs(h - hpbw[n]) / hpbw[n] <= 0.15
        rows.append(f"{n}x{n}: {g:.2f} dBi / {h:.2f} deg")
    dt = time.perf_counter() - t0
    ok &= dt < 10.0
    criterion(4, ok, "; ".join(rows) + f"; {dt:.1f} s")
    assert ok


def test_c05_power_cap(criterion):
    cfg = RadioConfig()
    a = total_power_dbm(cfg, antenna.IdealSector(30))
    b = total_power_dbm(cfg, antenna.Isotropic())
    ok = a == 25.0 and b == 30.0
    criterion(5, ok, f"ideal30 BS {a} dBm, iso BS {b} dBm")
    assert ok


def _constraints_hold(res, cfg):
    ues = [l.ue_id for l in res.links]
    load = {}
    for l in res.links:
        load[l.bs_id] = load.get(l.bs_id, 0) + 1
    lim = cfg.effective_limit()
    return (len(ues) == len(set(ues)) and all(l.sinr_db >= cfg.sinr_min_db for l in res.links)
            and (lim is None or max(load.values(), default=0) <= lim))


def test_c06_greedy_vs_exhaustive(criterion):
    t0 = time.perf_counter()
    p = antenna.pattern_from_name("ideal10")
    ratios, violations = [], 0
    for seed in range(200):
        inv, ues = oracles.small_network(seed)
        cfg = RadioConfig(mac="SDMA" if seed % 2 == 0 else "TDMA")
        m = LinkModel(inv, p, p, cfg)
        g = allocate_greedy(build_candidates(m), AllocationState(m), ues)
        e = allocate_exhaustive(m, ues)
        violations += not _constraints_hold(g, cfg)
        ratios.append(1.0 if e.objective <= 0 else g.objective / e.objective)
    ratios = np.array(ratios)
    frac = float(np.mean(ratios >= 0.95))
    dt = time.perf_counter() - t0
    ok = frac >= 0.90 and violations == 0 and dt < 300
    criterion(6, ok, f"greedy >= 95% of optimum on {frac:.1%} of 200 instances (need 90%), "
                     f"min ratio {ratios.min():.3f}, {violations} constraint violations, {dt:.0f} s")
    assert ok


def test_c07_interference_and_mac(criterion):
    t0 = time.perf_counter()
    sd, td = scalars(mac="SDMA"), scalars(mac="TDMA")
    ok = (sd["frac_inter_below_noise"] >= 0.85 and td["frac_inter_below_noise"] >= 0.85
          and sd["avg_throughput_all_bps"] > td["avg_throughput_all_bps"])
    dt = time.perf_counter() - t0
    ok &= dt < 600
    criterion(7, ok, f"inter-cell below noise: SDMA {sd['frac_inter_below_noise']:.1%}, "
                     f"TDMA {td['frac_inter_below_noise']:.1%}; avg throughput SDMA "
                     f"{sd['avg_throughput_all_bps'] / 1e9:.3f} vs TDMA {td['avg_throughput_all_bps'] / 1e9:.3f} Gbps")
    assert ok


def test_c08_antenna_realism(criterion):
    ideal = scalars(mac="SDMA")
    arr = scalars(mac="SDMA", bs_pattern="8x8", ue_pattern="8x8")
    ok = (arr["frac_intra_above_noise"] > ideal["frac_intra_above_noise"]
          and arr["avg_throughput_all_bps"] < ideal["avg_throughput_all_bps"])
    criterion(8, ok, f"above-noise intra-cell {ideal['frac_intra_above_noise']:.1%} -> "
                     f"{arr['frac_intra_above_noise']:.1%}; avg throughput "
                     f"{ideal['avg_throughput_all_bps'] / 1e9:.3f} -> {arr['avg_throughput_all_bps'] / 1e9:.3f} Gbps")
    assert ok


def test_c09_densification(criterion):
    lo = scalars(mac="SDMA", bs_density=32.0)["median_sinr_served_db"]
    hi = scalars(mac="SDMA", bs_density=196.0)["median_sinr_served_db"]
    dens = (32.0, 64.0, 100.0, 196.0)
    tput = [scalars(mac="TDMA", bs_density=d)["avg_throughput_all_bps"] for d in dens]
    ok = hi - lo >= 10.0 and all(b > a for a, b in zip(tput, tput[1:]))
    criterion(9, ok, f"SDMA median SINR {lo:.1f} dB @32 -> {hi:.1f} dB @196 (gain {hi - lo:.1f} dB); "
                     f"TDMA avg throughput " + ", ".join(f"{t / 1e9:.3f}" for t in tput) + " Gbps")
    assert ok


def test_c10_asymmetric_antennas(criterion):
    asym = scalars(mac="SDMA", bs_pattern="32x32", ue_pattern="4x4")["median_sinr_served_db"]
    sym = scalars(mac="SDMA", bs_pattern="16x16", ue_pattern="16x16")["median_sinr_served_db"]
    ok = abs(asym - sym) <= 5.0
    criterion(10, ok, f"SDMA median SINR 32x32/4x4 {asym:.2f} dB vs 16x16/16x16 {sym:.2f} dB "
                      f"(gap {asym - sym:+.2f} dB, limit 5)")
    assert ok


def test_c11_n_limit_tradeoff(criterion):
    free = scalars(mac="SDMA")
    lim = scalars(mac="SDMA", n_limit=5)
    ok = (lim["served_ratio"] < free["served_ratio"]
          and lim["frac_sinr_above_20db_served"] > free["frac_sinr_above_20db_served"]
          and lim["p90_sinr_served_db"] > free["p90_sinr_served_db"])
    criterion(11, ok, f"served ratio {free['served_ratio']:.3f} -> {lim['served_ratio']:.3f}; served UEs above "
                      f"20 dB {free['frac_sinr_above_20db_served']:.1%} -> {lim['frac_sinr_above_20db_served']:.1%}; "
                      f"p90 SINR {free['p90_sinr_served_db']:.1f} -> {lim['p90_sinr_served_db']:.1f} dB")
    assert ok


INVARIANT_SUITES = [
    "tests/test_antenna.py::test_symmetry",
    "tests/test_antenna.py::test_wrap_direction_consistent",
    "tests/test_antenna.py::test_wrap_to_full_turn",
    "tests/test_antenna.py::test_energy_normalisation",
    "tests/test_propagation.py::test_tracer_matches_mirror_oracle",
    "tests/test_linkmodel.py::test_matches_naive_sum",
    "tests/test_harness.py::test_su_upper_bound_per_realization",
    "tests/test_harness.py::test_tdma_air_time_partition",
    "tests/test_harness.py::test_csv_byte_identical",
]


def test_c12_invariant_suites_standalone(criterion):
    root = Path(__file__).resolve().parent.parent
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *INVARIANT_SUITES],
                          cwd=root, capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    ok = proc.returncode == 0
    criterion(12, ok, f"{len(INVARIANT_SUITES)} invariant suites in a separate run: {tail}")
    assert ok, proc.stdout[-3000:]
