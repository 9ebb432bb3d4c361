"""Network-wide link allocation.

``allocate_greedy`` walks the candidate links in descending SNR order and
admits a candidate only if every allocated link (itself included) still
meets the minimum SINR afterwards; otherwise the state is rolled back.
``allocate_exhaustive`` enumerates every assignment for small instances and
serves as the optimality reference.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllocationTooLarge
from .linkmodel import AllocationState, LinkModel, throughput, total_power_dbm

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10 ** 6


@dataclass(frozen=True)
class CandidateLink:
    bs_id: int
    ue_id: int
    path_index: int
    snr_db: float
    rate_bps: float

    @property
    def key(self):
        return (self.bs_id, self.ue_id, self.path_index)

    @property
    def sort_key(self):
        return (-self.snr_db, self.ue_id, self.bs_id, self.path_index)


@dataclass
class AllocationResult:
    links: list
    dropped: list
    served: dict                 # ue_id -> Link
    log: list = field(default_factory=list)
    objective: float = 0.0

    @property
    def n_served(self):
        return len(self.served)


def build_candidates(model: LinkModel):
    """One candidate per (UE, BS, path), ordered best SNR first."""
    out = []
    for (b, u), paths in model.inventory.items():
        for k in range(len(paths)):
            snr = model.snr_db(b, u, k)
            rate = throughput(snr, 1.0, model.cfg) if math.isfinite(snr) else 0.0
            out.append(CandidateLink(b, u, k, snr, rate))
    out.sort(key=lambda c: c.sort_key)
    return out


def _result(state: AllocationState, ue_ids, log_entries):
    links = state.links()
    served = {l.ue_id: l for l in links}
    dropped = sorted(set(ue_ids) - set(served))
    return AllocationResult(links, dropped, served, log_entries, state.objective())


def allocate_greedy(candidates, state: AllocationState, ue_ids=None, trace=False):
    """Sequential admission with rollback; see module docstring."""
    if len(state):
        raise ValueError("greedy allocation starts from an empty state")
    cfg = state.cfg
    limit = cfg.effective_limit()
    if ue_ids is None:
        ue_ids = sorted({c.ue_id for c in candidates})
    served = set()
    entries = []

    def note(c, decision, reason):
        e = {"bs": c.bs_id, "ue": c.ue_id, "path": c.path_index, "snr_db": c.snr_db,
             "decision": decision, "reason": reason}
        entries.append(e)
        if trace:
            log.info("alloc bs=%d ue=%d path=%d snr=%.2f %s %s", c.bs_id, c.ue_id,
                     c.path_index, c.snr_db, decision, reason)

    for c in candidates:
        if c.ue_id in served:
            continue
        if c.snr_db < cfg.sinr_min_db:
            note(c, "reject", "snr_below_min")
            continue
        if limit is not None and state.counts.get(c.bs_id, 0) >= limit:
            note(c, "reject", "n_limit")
            continue
        state.snapshot()
        state.add(c.key)
        sinr = state.sinr_db()
        if np.all(sinr >= cfg.sinr_min_db):
            state.discard_snapshot()
            served.add(c.ue_id)
            note(c, "accept", "ok")
        else:
            bad = [state.keys[i][1] for i in np.flatnonzero(sinr < cfg.sinr_min_db)]
            state.restore()
            reason = "sinr_below_min" if c.ue_id in bad and len(bad) == 1 else \
                "degrades_ue:" + "|".join(str(u) for u in sorted(set(bad) - {c.ue_id}))
            note(c, "reject", reason)
    return _result(state, ue_ids, entries)


def _evaluate(cand_keys, coupling, assign, cfg, p_tot_mw, limit):
    """Objective, served count and feasibility of each assignment row.

    ``assign``: (a, n_ue) candidate indices, -1 for unserved.
    """
    a, n_ue = assign.shape
    bs_of = np.array([k[0] for k in cand_keys] + [-1])
    present = assign >= 0
    idx = np.where(present, assign, len(cand_keys))   # sentinel row/col of zeros
    cm = np.zeros((len(cand_keys) + 1, len(cand_keys) + 1))
    cm[:-1, :-1] = coupling
    bs = bs_of[idx]
    same = (bs[:, :, None] == bs[:, None, :]) & present[:, :, None] & present[:, None, :]
    load = same.sum(axis=2).astype(float)            # includes self
    load_safe = np.maximum(load, 1.0)
    if cfg.mac == "SDMA":
        power = p_tot_mw / load_safe
        air = np.ones_like(load_safe)
    elif cfg.mac == "TDMA":
        power = np.full(load.shape, p_tot_mw)
        air = 1.0 / load_safe
    else:
        power = np.full(load.shape, p_tot_mw)
        air = np.ones_like(load_safe)
    power = power * present
    c_uv = cm[idx[:, :, None], idx[:, None, :]]      # [a, v, u]: from v into u
    eye = np.eye(n_ue, dtype=bool)[None]
    both = present[:, :, None] & present[:, None, :] & ~eye
    same_bs = (bs[:, :, None] == bs[:, None, :]) & both
    diff_bs = (bs[:, :, None] != bs[:, None, :]) & both
    contrib = c_uv * power[:, :, None]
    if cfg.mac == "SU":
        interf = np.zeros((a, n_ue))
    elif cfg.mac == "TDMA":
        interf = (contrib * air[:, :, None] * diff_bs).sum(axis=1)
    else:
        interf = (contrib * (same_bs | diff_bs)).sum(axis=1)
    signal = np.einsum("aii->ai", c_uv) * power
    with np.errstate(divide="ignore"):
        sinr = 10 * np.log10(signal / (interf + cfg.noise_power_mw))
    sinr = np.where(present, sinr, np.inf)
    rate = throughput(np.where(present, sinr, 0.0), air, cfg) * present
    feasible = np.all(sinr >= cfg.sinr_min_db, axis=1)
    if limit is not None:
        feasible &= np.all(load <= limit, axis=1)
    return rate.sum(axis=1), present.sum(axis=1), feasible


def allocate_exhaustive(model: LinkModel, ue_ids=None, limit=EXHAUSTIVE_LIMIT, chunk=50_000):
    """Optimal allocation by enumeration; ties favour more served UEs, then
    the first assignment in enumeration order."""
    cfg = model.cfg
    cands = build_candidates(model)
    if ue_ids is None:
        ue_ids = sorted({c.ue_id for c in cands})
    ue_ids = list(ue_ids)
    keys = [c.key for c in cands]
    kidx = {k: i for i, k in enumerate(keys)}
    options = [[-1] + [kidx[c.key] for c in cands if c.ue_id == u] for u in ue_ids]
    size = math.prod(len(o) for o in options)
    if size > limit:
        raise AllocationTooLarge(size, limit)
    coupling = np.array([[model.coupling(ki, kk) for kk in keys] for ki in keys]).reshape(len(keys), len(keys))
    p_tot = 10 ** (total_power_dbm(cfg, model.pattern_bs) / 10)
    lim = cfg.effective_limit()
    best = None      # (objective rounded to 1e-3 bit/s, served count)
    best_row = None
    it = itertools.product(*options)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        rows = np.array(block, dtype=int).reshape(len(block), len(ue_ids))
        obj, nserv, feas = _evaluate(keys, coupling, rows, cfg, p_tot, lim)
        score = np.where(feas, np.round(obj, 3), -np.inf)
        top = score.max()
        if not np.isfinite(top):
            continue
        tied = np.flatnonzero(score == top)
        j = tied[np.argmax(nserv[tied])]          # argmax keeps the earliest
        cand = (float(top), int(nserv[j]))
        if best is None or cand > best:
            best, best_row = cand, rows[j]
    state = AllocationState(model)
    for r in best_row:
        if r >= 0:
            state.add(keys[r])
    return _result(state, ue_ids, [{"evaluated": size}])
