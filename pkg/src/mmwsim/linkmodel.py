"""Link gain, power allocation, interference, SINR and throughput.

Every sum is carried out in linear units (mW, linear gain); dB/dBm appear
only at the API edges.  The central quantity is the *coupling* between two
links: the multipath gain from the BS of link ``i`` (beam steered along its
own path) into the UE of link ``k`` (beam steered along its serving path).
Signal power, intra- and inter-cell interference are all couplings scaled by
transmit power and air-time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError

MACS = ("SU", "TDMA", "SDMA")


@dataclass(frozen=True)
class RadioConfig:
    f_c: float = 60e9
    p_bs_max_dbm: float = 30.0
    eirp_max_dbm: float = 40.0
    bandwidth_hz: float = 1e9
    noise_figure_db: float = 6.0
    sinr_min_db: float = -10.0
    sinr_max_db: float = 22.05
    r_max_bps: float = 4.4e9
    alpha: float = 0.6
    mac: str = "SDMA"
    n_limit: int | None = None      # None: unlimited
    n_limit_tdma: bool = False      # apply n_limit to TDMA as well

    def __post_init__(self):
        mac = self.mac.upper()
        if mac not in MACS:
            raise ConfigurationError(f"unknown MAC {self.mac!r}; choose from {MACS}")
        object.__setattr__(self, "mac", mac)
        if self.sinr_min_db >= self.sinr_max_db:
            raise ConfigurationError("sinr_min_db must be below sinr_max_db")
        if self.n_limit is not None and self.n_limit < 1:
            raise ConfigurationError("n_limit must be >= 1 or None")

    @property
    def noise_power_dbm(self):
        return -174.0 + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db

    @property
    def noise_power_mw(self):
        return 10 ** (self.noise_power_dbm / 10)

    def effective_limit(self):
        if self.mac == "SDMA" or (self.mac == "TDMA" and self.n_limit_tdma):
            return self.n_limit
        return None

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def with_(self, **kw):
        return replace(self, **kw)


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def total_power_dbm(cfg: RadioConfig, pattern_bs):
    """BS transmit power: full power unless that would break the EIRP cap."""
    if cfg.p_bs_max_dbm + pattern_bs.peak_gain_dbi < cfg.eirp_max_dbm:
        return cfg.p_bs_max_dbm
    return cfg.eirp_max_dbm - pattern_bs.peak_gain_dbi


def tx_power_per_link(cfg: RadioConfig, pattern_bs, n_links=1):
    """Per-link power in dBm: the total split equally (linear) over SDMA beams."""
    if n_links < 1:
        raise ValueError("n_links must be >= 1")
    p = total_power_dbm(cfg, pattern_bs)
    if cfg.mac != "SDMA":
        return p
    return p - 10 * math.log10(n_links)


def throughput(sinr_db, a_r, cfg: RadioConfig):
    """Truncated Shannon rate in bit/s."""
    s = np.asarray(sinr_db, dtype=float)
    a = np.asarray(a_r, dtype=float)
    if np.any((a <= 0) | (a > 1)):
        raise ValueError("air-time ratio must be in (0, 1]")
    shannon = cfg.alpha * cfg.bandwidth_hz * np.log2(1 + 10 ** (np.minimum(s, 1e3) / 10))
    # log2 at sinr_max overshoots r_max by a hair; cap it so the map stays monotone
    shannon = np.minimum(shannon, cfg.r_max_bps)
    r = np.where(s < cfg.sinr_min_db, 0.0, np.where(s > cfg.sinr_max_db, cfg.r_max_bps, shannon))
    r = a * r
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class Link:
    bs_id: int
    ue_id: int
    path_index: int
    tx_power_dbm: float = float("nan")
    sinr_db: float = float("nan")
    throughput_bps: float = 0.0
    air_time_ratio: float = 1.0
    signal_mw: float = 0.0
    i_intra_mw: float = 0.0
    i_inter_mw: float = 0.0

    @property
    def key(self):
        return (self.bs_id, self.ue_id, self.path_index)


class LinkModel:
    """Gain bookkeeping over a path inventory for one BS/UE pattern pair."""

    def __init__(self, inventory, pattern_bs, pattern_ue, cfg: RadioConfig):
        self.inventory = inventory
        self.pattern_bs = pattern_bs
        self.pattern_ue = pattern_ue
        self.cfg = cfg
        self._pairs = {}
        self._coupling = {}

    def pair(self, bs_id, ue_id):
        """Arrays ``aod (n, 2), aoa (n, 2), 1/L (n,)`` for a BS/UE pair, or None."""
        key = (bs_id, ue_id)
        if key not in self._pairs:
            paths = self.inventory.get(key) or []
            if not paths:
                self._pairs[key] = None
            else:
                aod = np.array([p.aod for p in paths], dtype=float)
                aoa = np.array([p.aoa for p in paths], dtype=float)
                inv_l = 10.0 ** (-np.array([p.path_loss_db for p in paths]) / 10.0)
                self._pairs[key] = (aod, aoa, inv_l)
        return self._pairs[key]

    def path(self, bs_id, ue_id, k):
        return self.inventory[(bs_id, ue_id)][k]

    def coupling(self, src, victim):
        """Linear multipath gain from BS of ``src`` into UE of ``victim``.

        ``src`` and ``victim`` are ``(bs, ue, path_index)`` keys. The BS
        beam follows ``src``'s path, the UE beam ``victim``'s path.
        """
        key = (src, victim)
        c = self._coupling.get(key)
        if c is not None:
            return c
        bs_i, ue_i, k_i = src
        bs_k, ue_k, k_k = victim
        arr = self.pair(bs_i, ue_k)
        if arr is None:
            c = 0.0
        else:
            aod, aoa, inv_l = arr
            steer_bs = self.pair(bs_i, ue_i)[0][k_i]
            steer_ue = self.pair(bs_k, ue_k)[1][k_k]
            g_bs = self.pattern_bs.gain_linear(steer_bs[0] - aod[:, 0], steer_bs[1] - aod[:, 1])
            g_ue = self.pattern_ue.gain_linear(steer_ue[0] - aoa[:, 0], steer_ue[1] - aoa[:, 1])
            c = float(np.sum(g_bs * g_ue * inv_l))
        self._coupling[key] = c
        return c

    def total_link_gain(self, bs_id, ue_id, k):
        if (bs_id, ue_id) not in self.inventory or not self.inventory[(bs_id, ue_id)]:
            raise KeyError(f"no paths for BS {bs_id} / UE {ue_id}")
        if not 0 <= k < len(self.inventory[(bs_id, ue_id)]):
            raise IndexError(f"path index {k} out of range")
        key = (bs_id, ue_id, k)
        return self.coupling(key, key)

    def snr_db(self, bs_id, ue_id, k):
        """Interference-free SNR at full (single-link) power."""
        p = total_power_dbm(self.cfg, self.pattern_bs)
        t = self.total_link_gain(bs_id, ue_id, k)
        if t <= 0:
            return -math.inf
        return p + 10 * math.log10(t) - self.cfg.noise_power_dbm


@dataclass
class _Snapshot:
    keys: list
    counts: dict
    coupling: np.ndarray
    metrics: dict


class AllocationState:
    """Allocated links plus their network-wide metrics.

    One link per UE. ``snapshot()``/``restore()`` give single-level rollback
    with bit-identical metrics.
    """

    def __init__(self, model: LinkModel):
        self.model = model
        self.cfg = model.cfg
        self.keys = []
        self.counts = {}
        self._m = np.zeros((0, 0))
        self._metrics = self._empty_metrics()
        self._snap = None
        self._p_tot_mw = 10 ** (total_power_dbm(self.cfg, model.pattern_bs) / 10)

    @staticmethod
    def _empty_metrics():
        e = np.zeros(0)
        return {"power_mw": e, "air_time": e, "signal_mw": e, "intra_mw": e,
                "inter_mw": e, "sinr_db": e, "throughput": e}

    # -- mutation ---------------------------------------------------------

    def __len__(self):
        return len(self.keys)

    def served_ues(self):
        return {k[1] for k in self.keys}

    def add(self, key):
        bs, ue, k = key
        if ue in self.served_ues():
            raise ValueError(f"UE {ue} already has a link")
        n = len(self.keys)
        m = np.zeros((n + 1, n + 1))
        m[:n, :n] = self._m
        for i, other in enumerate(self.keys):
            m[i, n] = self.model.coupling(other, key)
            m[n, i] = self.model.coupling(key, other)
        m[n, n] = self.model.coupling(key, key)
        self._m = m
        self.keys.append(key)
        self.counts[bs] = self.counts.get(bs, 0) + 1
        self.recompute()

    def remove(self, key):
        i = self.keys.index(key)
        keep = [j for j in range(len(self.keys)) if j != i]
        self._m = self._m[np.ix_(keep, keep)]
        self.keys.pop(i)
        self.counts[key[0]] -= 1
        if self.counts[key[0]] == 0:
            del self.counts[key[0]]
        self.recompute()

    def snapshot(self):
        self._snap = _Snapshot(list(self.keys), dict(self.counts), self._m.copy(),
                               {k: v.copy() for k, v in self._metrics.items()})

    def restore(self):
        if self._snap is None:
            raise RuntimeError("restore() without a snapshot")
        s = self._snap
        self.keys, self.counts, self._m, self._metrics = s.keys, s.counts, s.coupling, s.metrics
        self._snap = None

    def discard_snapshot(self):
        self._snap = None

    # -- metrics ----------------------------------------------------------

    def recompute(self):
        n = len(self.keys)
        if n == 0:
            self._metrics = self._empty_metrics()
            return
        cfg = self.cfg
        bs = np.array([k[0] for k in self.keys])
        load = np.array([self.counts[b] for b in bs], dtype=float)
        if cfg.mac == "SDMA":
            power = self._p_tot_mw / load
            air = np.ones(n)
        elif cfg.mac == "TDMA":
            power = np.full(n, self._p_tot_mw)
            air = 1.0 / load
        else:
            power = np.full(n, self._p_tot_mw)
            air = np.ones(n)
        same = bs[:, None] == bs[None, :]
        np.fill_diagonal(same, False)
        other = bs[:, None] != bs[None, :]
        contrib = self._m * power[:, None]     # [i, k]: from link i into victim k
        if cfg.mac == "SU":
            intra = np.zeros(n)
            inter = np.zeros(n)
        elif cfg.mac == "TDMA":
            intra = np.zeros(n)
            inter = (contrib * air[:, None] * other).sum(axis=0)
        else:
            intra = (contrib * same).sum(axis=0)
            inter = (contrib * other).sum(axis=0)
        signal = np.diag(self._m) * power
        with np.errstate(divide="ignore"):
            sinr = 10 * np.log10(signal / (intra + inter + cfg.noise_power_mw))
        self._metrics = {"power_mw": power, "air_time": air, "signal_mw": signal,
                         "intra_mw": intra, "inter_mw": inter, "sinr_db": sinr,
                         "throughput": throughput(sinr, air, cfg)}

    def sinr_db(self):
        return self._metrics["sinr_db"]

    def metrics(self):
        return {k: v.copy() for k, v in self._metrics.items()}

    def all_feasible(self):
        return bool(np.all(self._metrics["sinr_db"] >= self.cfg.sinr_min_db))

    def objective(self):
        return float(self._metrics["throughput"].sum())

    def links(self):
        m = self._metrics
        return [Link(b, u, k, float(10 * np.log10(m["power_mw"][i])), float(m["sinr_db"][i]),
                     float(m["throughput"][i]), float(m["air_time"][i]), float(m["signal_mw"][i]),
                     float(m["intra_mw"][i]), float(m["inter_mw"][i]))
                for i, (b, u, k) in enumerate(self.keys)]

    def link(self, key):
        return self.links()[self.keys.index(key)]


def sinr(state: AllocationState, key):
    return state.link(key).sinr_db


def intra_cell_interference(state: AllocationState, key):
    return state.link(key).i_intra_mw


def inter_cell_interference(state: AllocationState, key):
    return state.link(key).i_inter_mw
