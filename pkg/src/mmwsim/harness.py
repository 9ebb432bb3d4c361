"""Scenario configuration, Monte Carlo realizations, aggregation and CSV output."""
from __future__ import annotations

import csv
import functools
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import antenna, geometry, propagation
from .allocation import allocate_greedy, build_candidates
from .errors import ConfigurationError
from .linkmodel import AllocationState, LinkModel, RadioConfig, total_power_dbm

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    layout_preset: str | None = "dense"
    layout: dict = field(default_factory=dict)     # LayoutParams overrides
    layout_file: str | None = None
    layout_seed: int = 0
    bs_density: float = 64.0
    ue_density: float = 1000.0
    mac: str = "SDMA"
    bs_pattern: str = "ideal10"
    ue_pattern: str = "ideal10"
    n_limit: int | None = None
    radio: dict = field(default_factory=dict)      # RadioConfig overrides
    n_realizations: int = 5
    seed: int = 0
    prune_floor_dbm: float | None = None           # default: noise - 10 dB
    max_bounces: int = 2
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        if self.bs_density <= 0 or self.ue_density <= 0:
            raise ConfigurationError("densities must be positive")
        if self.n_realizations < 1:
            raise ConfigurationError("n_realizations must be >= 1")
        if not 0 <= self.max_bounces <= propagation.MAX_BOUNCES:
            raise ConfigurationError("max_bounces must be 0, 1 or 2")
        if self.n_limit is not None and self.n_limit < 1:
            raise ConfigurationError("n_limit must be >= 1 or null")
        self.radio_config()   # validates mac / radio overrides
        antenna.pattern_from_name(self.bs_pattern)
        antenna.pattern_from_name(self.ue_pattern)

    def layout_params(self):
        if self.layout_preset:
            return geometry.LayoutParams.preset(self.layout_preset, **_tupled(self.layout))
        return geometry.LayoutParams(**_tupled(self.layout))

    def radio_config(self):
        unknown = set(self.radio) - {f.name for f in fields(RadioConfig)}
        if unknown:
            raise ConfigurationError(f"unknown radio keys {sorted(unknown)}")
        return RadioConfig(**{**self.radio, "mac": self.mac, "n_limit": self.n_limit})

    def realization_seeds(self):
        ss = np.random.SeedSequence(self.seed)
        return [int(c.generate_state(1)[0]) for c in ss.spawn(self.n_realizations)]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.setdefault("schema_version", SCHEMA_VERSION)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown scenario keys {sorted(unknown)}")
        return cls(**d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def replace(self, **kw):
        return replace(self, **kw)


def _tupled(d):
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


# --- deployment and propagation, cached across MAC/antenna variants -------

@functools.lru_cache(maxsize=16)
def _layout(preset, layout_items, layout_file, layout_seed):
    if layout_file:
        return geometry.load_layout(layout_file)
    kw = dict(layout_items)
    params = geometry.LayoutParams.preset(preset, **kw) if preset else geometry.LayoutParams(**kw)
    return geometry.generate_layout(params, layout_seed)


def scenario_layout(sc: Scenario):
    items = tuple(sorted(_tupled(sc.layout).items()))
    return _layout(sc.layout_preset, items, sc.layout_file, sc.layout_seed)


@functools.lru_cache(maxsize=64)
def _deployment(preset, layout_items, layout_file, layout_seed, bs_density, ue_density,
                ue_seed, max_bounces, f_c):
    lay = _layout(preset, layout_items, layout_file, layout_seed)
    bss = geometry.place_bs(lay, bs_density)
    ues = geometry.place_ue(lay, ue_density, ue_seed)
    inv = propagation.build_inventory(lay, bss, ues, f_c=f_c, max_bounces=max_bounces)
    return lay, tuple(bss), tuple(ues), inv


def deployment(sc: Scenario, ue_seed):
    items = tuple(sorted(_tupled(sc.layout).items()))
    return _deployment(sc.layout_preset, items, sc.layout_file, sc.layout_seed, sc.bs_density,
                       sc.ue_density, ue_seed, sc.max_bounces, sc.radio_config().f_c)


# --- metrics ---------------------------------------------------------------

RECORD_FIELDS = ("realization", "ue_id", "x", "y", "serving_bs", "path_kind", "bounces",
                 "path_loss_db", "sinr_db", "throughput_bps", "air_time", "i_intra_mw",
                 "i_inter_mw", "dropped", "servable")


@dataclass
class UERecord:
    realization: int
    ue_id: int
    x: float
    y: float
    serving_bs: int | None
    path_kind: str | None
    bounces: int | None
    path_loss_db: float | None
    sinr_db: float | None
    throughput_bps: float
    air_time: float | None
    i_intra_mw: float | None
    i_inter_mw: float | None
    dropped: bool
    servable: bool
    # serving ray geometry for link maps
    bs_pos: tuple | None = None
    ue_pos: tuple | None = None
    points: tuple = ()


@dataclass
class MetricsBundle:
    records: list
    scalars: dict                      # name -> value (single) or mean
    std: dict = field(default_factory=dict)
    n: int = 1
    noise_floor_dbm: float = -78.0
    layout: object = None
    bs_nodes: tuple = ()
    alloc_log: list = field(default_factory=list)

    @property
    def served(self):
        return [r for r in self.records if not r.dropped]


def _scalars(records, noise_dbm, sinr_min_db):
    n = len(records)
    served = [r for r in records if not r.dropped]
    servable = sum(r.servable for r in records)
    s = np.array([r.sinr_db for r in served], dtype=float)
    tput_all = np.array([r.throughput_bps for r in records], dtype=float)
    noise_mw = 10 ** (noise_dbm / 10)
    intra = np.array([r.i_intra_mw for r in served], dtype=float)
    inter = np.array([r.i_inter_mw for r in served], dtype=float)

    def frac(mask):
        return float(mask.mean()) if len(mask) else float("nan")

    def q(p):
        return float(np.quantile(s, p)) if len(s) else float("nan")

    return {
        "n_ue": float(n),
        "n_served": float(len(served)),
        "n_servable": float(servable),
        "coverage_ratio": len(served) / n if n else float("nan"),
        "coverage_ratio_servable": len(served) / servable if servable else float("nan"),
        "avg_throughput_all_bps": float(tput_all.mean()) if n else float("nan"),
        "avg_throughput_served_bps": float(tput_all[~np.array([r.dropped for r in records])].mean())
        if served else float("nan"),
        "median_sinr_served_db": q(0.5),
        "p10_sinr_served_db": q(0.1),
        "p90_sinr_served_db": q(0.9),
        "frac_sinr_above_20db_served": frac(s > 20.0),
        "frac_intra_above_noise": frac(intra > noise_mw),
        "frac_inter_above_noise": frac(inter > noise_mw),
        "frac_inter_below_noise": frac(inter < noise_mw),
    }


def run_realization(sc: Scenario, realization_seed, realization=0, trace_alloc=False,
                    servable_baseline=True):
    """One UE drop: deploy, trace, prune, allocate, measure."""
    try:
        lay, bss, ues, inv = deployment(sc, realization_seed)
    except ConfigurationError as exc:
        raise ConfigurationError(f"scenario (seed {realization_seed}): {exc}") from exc
    cfg = sc.radio_config()
    p_bs = antenna.pattern_from_name(sc.bs_pattern)
    p_ue = antenna.pattern_from_name(sc.ue_pattern)
    floor = sc.prune_floor_dbm if sc.prune_floor_dbm is not None else cfg.noise_power_dbm - 10.0
    inv = propagation.prune_inventory(inv, floor, p_bs, p_ue, total_power_dbm(cfg, p_bs))
    model = LinkModel(inv, p_bs, p_ue, cfg)
    cands = build_candidates(model)
    ue_ids = [u.id for u in ues]
    result = allocate_greedy(cands, AllocationState(model), ue_ids, trace=trace_alloc)
    servable_ids = {c.ue_id for c in cands if c.snr_db >= cfg.sinr_min_db}
    bs_by_id = {b.id: b for b in bss}
    records = []
    for u in ues:
        link = result.served.get(u.id)
        if link is None:
            records.append(UERecord(realization, u.id, u.x, u.y, None, None, None, None, None, 0.0,
                                    None, None, None, True, u.id in servable_ids))
            continue
        p = inv[(link.bs_id, u.id)][link.path_index]
        records.append(UERecord(
            realization, u.id, u.x, u.y, link.bs_id, p.kind, p.bounces, p.path_loss_db,
            link.sinr_db, link.throughput_bps, link.air_time_ratio, link.i_intra_mw,
            link.i_inter_mw, False, True, bs_by_id[link.bs_id].position, u.position, p.points))
    scal = _scalars(records, cfg.noise_power_dbm, cfg.sinr_min_db)
    scal["served_ratio"] = 1.0
    if cfg.effective_limit() is not None and servable_baseline:
        base = run_realization(sc.replace(n_limit=None), realization_seed, realization,
                               servable_baseline=False)
        nb = base.scalars["n_served"]
        scal["served_ratio"] = scal["n_served"] / nb if nb else float("nan")
    return MetricsBundle(records, scal, {}, 1, cfg.noise_power_dbm, lay, bss, result.log)


def _one(args):
    sc, seed, i, trace = args
    return run_realization(sc, seed, i, trace)


def aggregate(bundles):
    if len(bundles) == 1:
        b = bundles[0]
        return MetricsBundle(list(b.records), dict(b.scalars), {k: float("nan") for k in b.scalars},
                             1, b.noise_floor_dbm, b.layout, b.bs_nodes, b.alloc_log)
    keys = list(bundles[0].scalars)
    mean, std = {}, {}
    for k in keys:
        v = np.array([b.scalars[k] for b in bundles], dtype=float)
        v = v[np.isfinite(v)]
        mean[k] = float(v.mean()) if len(v) else float("nan")
        std[k] = float(v.std(ddof=1)) if len(v) > 1 else float("nan")
    records = [r for b in bundles for r in b.records]
    records.sort(key=lambda r: (r.realization, r.ue_id))
    return MetricsBundle(records, mean, std, len(bundles), bundles[0].noise_floor_dbm,
                         bundles[0].layout, bundles[0].bs_nodes, [])


def run_scenario(sc: Scenario, workers=1, trace_alloc=False):
    """All realizations; returns ``(aggregate, per_realization)``."""
    jobs = [(sc, s, i, trace_alloc) for i, s in enumerate(sc.realization_seeds())]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            per = list(ex.map(_one, jobs))
    else:
        per = [_one(j) for j in jobs]
    return aggregate(per), per


# --- sweeps ----------------------------------------------------------------

SWEEP_AXES = ("bs_density", "mac", "antenna", "n_limit", "ue_density")


def _apply_axis(sc, axis, value):
    if axis == "antenna":
        bs, _, ue = str(value).partition("/")
        return sc.replace(bs_pattern=bs, ue_pattern=ue or bs)
    return sc.replace(**{axis: value})


def sweep_cells(base: Scenario, axes: dict):
    for name, vals in axes.items():
        if name not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {name!r}; choose from {SWEEP_AXES}")
        if not vals:
            raise ConfigurationError(f"sweep axis {name!r} is empty")
    names = [a for a in SWEEP_AXES if a in axes]
    cells = []
    for combo in itertools.product(*(axes[a] for a in names)):
        sc = base
        for a, v in zip(names, combo):
            sc = _apply_axis(sc, a, v)
        cells.append((dict(zip(names, combo)), sc))
    return cells


def sweep(base: Scenario, axes: dict, workers=1):
    """Cross product over ``axes``; one row per cell with scalar means and stds."""
    rows = []
    for cell, sc in sweep_cells(base, axes):
        agg, _ = run_scenario(sc, workers=workers)
        row = dict(cell)
        for k, v in agg.scalars.items():
            row[k] = v
            row[k + "_std"] = agg.std.get(k, float("nan"))
        rows.append(row)
    return rows


def load_axes(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    base = Scenario.from_dict(d.get("base", {}))
    axes = d.get("axes")
    if not isinstance(axes, dict) or not axes:
        raise ConfigurationError("axes file needs a non-empty 'axes' object")
    return base, axes


# --- output ----------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, np.integer):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "" if math.isnan(v) else repr(v)
        return repr(v)
    return str(v)


def _dbm(mw):
    if mw is None or mw <= 0:
        return None
    return 10 * math.log10(mw)


def ecdf_rows(values, n_total=None):
    """``(value, cdf_served, cdf_all)`` at each distinct value.

    ``cdf_all`` counts ``n_total - len(values)`` extra samples sitting below
    every value (dropped UEs, zero interference).
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        return []
    n_total = n if n_total is None else n_total
    extra = n_total - n
    uniq, idx = np.unique(v, return_index=True)
    counts = np.append(idx[1:], n)
    return [(float(x), float(c / n), float((extra + c) / n_total)) for x, c in zip(uniq, counts)]


def interference_cdf_rows(intra_mw, inter_mw, noise_dbm):
    """Union grid of intra/inter dBm values with ``P(I <= x)`` for each kind.

    Zero interference counts as lying below every grid value.
    """
    intra = np.array([_dbm(x) for x in intra_mw if _dbm(x) is not None], dtype=float)
    inter = np.array([_dbm(x) for x in inter_mw if _dbm(x) is not None], dtype=float)
    n = len(intra_mw)
    if n == 0:
        return []
    grid = np.unique(np.concatenate([intra, inter]))
    zero_intra = n - len(intra)
    zero_inter = n - len(inter)
    si, se = np.sort(intra), np.sort(inter)
    rows = []
    for x in grid:
        ci = (zero_intra + np.searchsorted(si, x, side="right")) / n
        ce = (zero_inter + np.searchsorted(se, x, side="right")) / n
        rows.append((float(x), float(ci), float(ce), noise_dbm))
    return rows


def _write(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_outputs(bundle: MetricsBundle, out_dir, figures=False):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = bundle.records
    served = bundle.served
    _write(out / "ue_records.csv",
           ("realization", "ue_id", "x", "y", "serving_bs", "path_kind", "bounces", "path_loss_db",
            "sinr_db", "throughput_bps", "air_time", "i_intra_dbm", "i_inter_dbm", "dropped", "servable"),
           [(r.realization, r.ue_id, r.x, r.y, r.serving_bs, r.path_kind, r.bounces, r.path_loss_db,
             r.sinr_db, r.throughput_bps, r.air_time, _dbm(r.i_intra_mw), _dbm(r.i_inter_mw),
             r.dropped, r.servable) for r in recs])
    _write(out / "cdf_sinr.csv", ("sinr_db", "cdf_served", "cdf_all"),
           ecdf_rows([r.sinr_db for r in served], len(recs)))
    _write(out / "cdf_throughput.csv", ("throughput_bps", "cdf_served", "cdf_all"),
           ecdf_rows([r.throughput_bps for r in served], len(recs)))
    _write(out / "cdf_interference.csv", ("interference_dbm", "cdf_intra", "cdf_inter", "noise_floor_dbm"),
           interference_cdf_rows([r.i_intra_mw for r in served], [r.i_inter_mw for r in served],
                                 bundle.noise_floor_dbm))
    _write(out / "summary.csv", ("metric", "mean", "std", "n_realizations"),
           [(k, v, bundle.std.get(k, float("nan")), bundle.n) for k, v in bundle.scalars.items()])
    _write(out / "links.csv",
           ("realization", "ue_id", "bs_id", "bs_x", "bs_y", "bs_z", "ue_x", "ue_y", "ue_z",
            "kind", "bounces", "path_loss_db", "reflection_points"),
           [(r.realization, r.ue_id, r.serving_bs, *r.bs_pos, *r.ue_pos, r.path_kind, r.bounces,
             r.path_loss_db, ";".join(" ".join(repr(c) for c in p) for p in r.points)) for r in served])
    if figures:
        from . import plotting
        plotting.render_bundle(bundle, out / "figures")


def write_sweep(rows, path):
    if not rows:
        _write(path, (), [])
        return
    header = list(rows[0])
    _write(path, header, [[r.get(h) for h in header] for r in rows])
