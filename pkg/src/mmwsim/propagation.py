"""Path inventory: LOS plus one- and two-bounce specular paths.

The tracer is a 2.5D image method over the vertical faces of the layout's
building prisms.  Reflections happen off walls only (no ground or roof), each
costing a fixed loss on top of free-space loss along the unfolded length.
Blockage is a full 3D segment-versus-prism test, so rays can pass over
buildings lower than the segment.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .antenna import wrap_az
from .errors import InventoryParseError

C_LIGHT = 299_792_458.0
F_C = 60e9
REFLECTION_LOSS_DB = 3.0
MAX_BOUNCES = 2

_EPS = 1e-9


def fspl_db(distance_m, f_c=F_C):
    """Free-space path loss 20 log10(4 pi d f / c) in dB."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 20.0 * np.log10(4.0 * np.pi * d * f_c / C_LIGHT)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PropagationPath:
    kind: str             # "LOS" or "NLOS"
    bounces: int
    aod: tuple            # (az, el) deg at the BS
    aoa: tuple            # (az, el) deg at the UE, pointing back along the arriving ray
    path_loss_db: float
    length_m: float
    walls: tuple = ()     # wall ids in bounce order (tracer output only)
    points: tuple = field(default=(), compare=False)  # reflection points

    def __post_init__(self):
        if (self.kind == "LOS") != (self.bounces == 0):
            raise ValueError("LOS paths have zero bounces and vice versa")
        if self.kind not in ("LOS", "NLOS"):
            raise ValueError(f"bad path kind {self.kind!r}")
        if not 0 <= self.bounces <= MAX_BOUNCES:
            raise ValueError("bounce count out of range")
        for az, el in (self.aod, self.aoa):
            if not (-180.0 <= az < 180.0) or not (-90.0 <= el <= 90.0):
                raise ValueError(f"angle out of range: {(az, el)}")
        if self.path_loss_db < 0 or self.length_m <= 0:
            raise ValueError("negative loss or non-positive length")


def _angles(vec):
    """(az, el) in degrees of direction vectors, shape (..., 3)."""
    az = np.degrees(np.arctan2(vec[..., 1], vec[..., 0]))
    el = np.degrees(np.arctan2(vec[..., 2], np.hypot(vec[..., 0], vec[..., 1])))
    return wrap_az(az), np.clip(el, -90.0, 90.0)


@dataclass(frozen=True)
class Walls:
    """Vertical building faces, columnar.

    ``axis`` is the coordinate held constant on the face (0: x, 1: y),
    ``coord`` its value, ``lo``/``hi`` the extent along the other horizontal
    axis, ``normal`` the outward sign along ``axis``.
    """

    axis: np.ndarray
    coord: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    height: np.ndarray
    normal: np.ndarray
    building: np.ndarray

    def __len__(self):
        return len(self.axis)


def layout_walls(layout) -> Walls:
    rows = []
    for b, bl in enumerate(layout.buildings):
        f = bl.footprint
        rows += [
            (0, f.x_min, f.y_min, f.y_max, bl.height, -1.0, b),
            (0, f.x_max, f.y_min, f.y_max, bl.height, 1.0, b),
            (1, f.y_min, f.x_min, f.x_max, bl.height, -1.0, b),
            (1, f.y_max, f.x_min, f.x_max, bl.height, 1.0, b),
        ]
    if not rows:
        e = np.zeros(0)
        return Walls(e.astype(int), e, e, e, e, e, e.astype(int))
    a = np.array(rows, dtype=float)
    return Walls(a[:, 0].astype(int), a[:, 1], a[:, 2], a[:, 3], a[:, 4], a[:, 5], a[:, 6].astype(int))


def segments_blocked(p0, p1, boxes, tol=_EPS):
    """True where segment p0->p1 passes through the open interior of any box.

    ``p0``, ``p1``: (m, 3); ``boxes``: (b, 5) rows ``x0, y0, x1, y1, h``.
    Slab clipping per axis; touching a face or edge is not a blockage.
    """
    p0 = np.asarray(p0, dtype=float).reshape(-1, 3)
    p1 = np.asarray(p1, dtype=float).reshape(-1, 3)
    m = len(p0)
    if m == 0 or len(boxes) == 0:
        return np.zeros(m, dtype=bool)
    d = p1 - p0
    lo = np.stack([boxes[:, 0], boxes[:, 1], np.zeros(len(boxes))], axis=1)  # (b, 3)
    hi = np.stack([boxes[:, 2], boxes[:, 3], boxes[:, 4]], axis=1)
    t_in = np.zeros((m, len(boxes)))
    t_out = np.ones((m, len(boxes)))
    for ax in range(3):
        o = p0[:, ax:ax + 1]
        v = d[:, ax:ax + 1]
        par = np.abs(v) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[None, :, ax] - o) / v
            t2 = (hi[None, :, ax] - o) / v
        tmin = np.where(par, -np.inf, np.minimum(t1, t2))
        tmax = np.where(par, np.inf, np.maximum(t1, t2))
        inside = (o > lo[None, :, ax]) & (o < hi[None, :, ax])
        tmax = np.where(par & ~inside, -np.inf, tmax)
        t_in = np.maximum(t_in, tmin)
        t_out = np.minimum(t_out, tmax)
    return (t_out - t_in > tol).any(axis=1)


def _hit(src, dst, walls, w):
    """Crossing of segments src->dst (m, 3) with the planes of walls ``w`` (m,).

    Returns the crossing points and a mask of crossings that land on the
    face itself (inside its horizontal extent and below its top).
    """
    ax = walls.axis[w]
    c = walls.coord[w]
    rows = np.arange(len(w))
    s_a = src[rows, ax]
    den = dst[rows, ax] - s_a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (c - s_a) / den
    pt = src + t[:, None] * (dst - src)
    pt[rows, ax] = c
    o = pt[rows, 1 - ax]
    ok = ((np.abs(den) > 1e-12) & (t > _EPS) & (t < 1 - _EPS)
          & (o > walls.lo[w] + _EPS) & (o < walls.hi[w] - _EPS)
          & (pt[:, 2] >= 0.0) & (pt[:, 2] <= walls.height[w]))
    return pt, ok


def _outside(p, walls, w):
    """Strictly on the outward side of wall(s) ``w``."""
    v = p[np.arange(len(w)), walls.axis[w]]
    return walls.normal[w] * (v - walls.coord[w]) > _EPS


def _make_path(pts, f_c, walls_ids):
    pts = np.asarray(pts, dtype=float)
    seg = np.diff(pts, axis=0)
    length = float(np.linalg.norm(seg, axis=1).sum())
    aod = _angles(seg[0])
    aoa = _angles(-seg[-1])
    b = len(walls_ids)
    return PropagationPath(
        kind="LOS" if b == 0 else "NLOS",
        bounces=b,
        aod=(float(aod[0]), float(aod[1])),
        aoa=(float(aoa[0]), float(aoa[1])),
        path_loss_db=fspl_db(length, f_c) + REFLECTION_LOSS_DB * b,
        length_m=length,
        walls=tuple(int(w) for w in walls_ids),
        points=tuple(tuple(float(v) for v in p) for p in pts[1:-1]),
    )


def trace_paths(layout, bs, ues, f_c=F_C, max_bounces=MAX_BOUNCES, ue_chunk=64):
    """All LOS and up-to-``max_bounces`` specular paths from ``bs`` to each UE.

    Returns ``{(bs.id, ue.id): [PropagationPath, ...]}`` with each list
    sorted by path loss.  Pairs without any path map to an empty list.
    """
    boxes = layout.box_array()
    walls = layout_walls(layout)
    tx = np.asarray(bs.position, dtype=float)
    out = {}
    ues = list(ues)
    for start in range(0, len(ues), ue_chunk):
        chunk = ues[start:start + ue_chunk]
        rx = np.array([u.position for u in chunk], dtype=float).reshape(-1, 3)
        found = [[] for _ in chunk]
        _trace_los(tx, rx, boxes, found, f_c)
        if max_bounces >= 1 and len(walls):
            _trace_one(tx, rx, boxes, walls, found, f_c)
        if max_bounces >= 2 and len(walls) > 1:
            _trace_two(tx, rx, boxes, walls, found, f_c)
        for u, paths in zip(chunk, found):
            uniq = {}
            for p in paths:
                uniq.setdefault(p.walls, p)
            out[(bs.id, u.id)] = sorted(uniq.values(), key=lambda p: (p.path_loss_db, p.walls))
    return out


def _trace_los(tx, rx, boxes, found, f_c):
    dist = np.linalg.norm(rx - tx, axis=1)
    ok = (dist > 0) & ~segments_blocked(np.broadcast_to(tx, rx.shape), rx, boxes)
    for i in np.flatnonzero(ok):
        found[i].append(_make_path([tx, rx[i]], f_c, ()))


def _trace_one(tx, rx, boxes, walls, found, f_c):
    cand = np.flatnonzero(_outside(tx[None, :].repeat(len(walls), 0), walls, np.arange(len(walls))))
    if len(cand) == 0:
        return
    nw, nu = len(cand), len(rx)
    w = np.repeat(cand, nu)                     # (nw*nu,)
    ui = np.tile(np.arange(nu), nw)
    img = tx[None, :].repeat(nw, 0)
    img[np.arange(nw), walls.axis[cand]] = 2 * walls.coord[cand] - tx[walls.axis[cand]]
    src = np.repeat(img, nu, axis=0)
    dst = rx[ui]
    ok = _outside(dst, walls, w)
    pt, hit = _hit(src, dst, walls, w)
    ok &= hit
    idx = np.flatnonzero(ok)
    if len(idx) == 0:
        return
    t0 = np.broadcast_to(tx, (len(idx), 3))
    blocked = segments_blocked(t0, pt[idx], boxes) | segments_blocked(pt[idx], dst[idx], boxes)
    for k in idx[~blocked]:
        found[ui[k]].append(_make_path([tx, pt[k], dst[k]], f_c, (w[k],)))


def _pair_candidates(tx, walls):
    """Ordered wall pairs (w1, w2) that can possibly carry a double bounce."""
    n = len(walls)
    all_w = np.arange(n)
    first = all_w[_outside(tx[None, :].repeat(n, 0), walls, all_w)]
    if len(first) == 0:
        return np.zeros(0, int), np.zeros(0, int)
    w1 = np.repeat(first, n)
    w2 = np.tile(all_w, len(first))
    keep = (w1 != w2) & (walls.building[w1] != walls.building[w2])
    w1, w2 = w1[keep], w2[keep]

    def ends(w):
        # the two horizontal end points of each wall, at z = 0
        a = walls.axis[w]
        e0 = np.zeros((len(w), 3))
        e1 = np.zeros((len(w), 3))
        e0[np.arange(len(w)), a] = walls.coord[w]
        e1[np.arange(len(w)), a] = walls.coord[w]
        e0[np.arange(len(w)), 1 - a] = walls.lo[w]
        e1[np.arange(len(w)), 1 - a] = walls.hi[w]
        return e0, e1

    # some part of each wall must face the other
    a0, a1 = ends(w2)
    b0, b1 = ends(w1)
    keep = ((_outside(a0, walls, w1) | _outside(a1, walls, w1))
            & (_outside(b0, walls, w2) | _outside(b1, walls, w2)))
    return w1[keep], w2[keep]


def _trace_two(tx, rx, boxes, walls, found, f_c, block=200_000):
    w1_all, w2_all = _pair_candidates(tx, walls)
    if len(w1_all) == 0:
        return
    nu = len(rx)
    img1_all = tx[None, :].repeat(len(w1_all), 0)
    r = np.arange(len(w1_all))
    img1_all[r, walls.axis[w1_all]] = 2 * walls.coord[w1_all] - tx[walls.axis[w1_all]]
    img2_all = img1_all.copy()
    img2_all[r, walls.axis[w2_all]] = 2 * walls.coord[w2_all] - img1_all[r, walls.axis[w2_all]]
    step = max(1, block // max(nu, 1))
    for s in range(0, len(w1_all), step):
        w1p = w1_all[s:s + step]
        w2p = w2_all[s:s + step]
        npair = len(w1p)
        w1 = np.repeat(w1p, nu)
        w2 = np.repeat(w2p, nu)
        ui = np.tile(np.arange(nu), npair)
        i1 = np.repeat(img1_all[s:s + step], nu, axis=0)
        i2 = np.repeat(img2_all[s:s + step], nu, axis=0)
        dst = rx[ui]
        ok = _outside(dst, walls, w2)
        idx = np.flatnonzero(ok)
        if len(idx) == 0:
            continue
        p2, hit2 = _hit(i2[idx], dst[idx], walls, w2[idx])
        idx, p2 = idx[hit2], p2[hit2]
        if len(idx) == 0:
            continue
        p1, hit1 = _hit(i1[idx], p2, walls, w1[idx])
        good = hit1 & _outside(p1, walls, w2[idx]) & _outside(p2, walls, w1[idx])
        idx, p1, p2 = idx[good], p1[good], p2[good]
        if len(idx) == 0:
            continue
        t0 = np.broadcast_to(tx, (len(idx), 3))
        blocked = (segments_blocked(t0, p1, boxes) | segments_blocked(p1, p2, boxes)
                   | segments_blocked(p2, dst[idx], boxes))
        for k, a, b in zip(idx[~blocked], p1[~blocked], p2[~blocked]):
            found[ui[k]].append(_make_path([tx, a, b, dst[k]], f_c, (w1[k], w2[k])))


def build_inventory(layout, bss, ues, f_c=F_C, max_bounces=MAX_BOUNCES):
    inv = {}
    for bs in bss:
        inv.update(trace_paths(layout, bs, ues, f_c=f_c, max_bounces=max_bounces))
    return inv


# --- inventory files -------------------------------------------------------

INVENTORY_COLUMNS = ("bs_id", "ue_id", "kind", "bounces", "aod_az", "aod_el",
                     "aoa_az", "aoa_el", "path_loss_db", "length_m")


def save_inventory(inv, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# path inventory: angles deg, loss dB, length m\n")
        fh.write(",".join(INVENTORY_COLUMNS) + "\n")
        for (b, u) in sorted(inv):
            for p in inv[(b, u)]:
                fh.write(f"{b},{u},{p.kind},{p.bounces},{p.aod[0]!r},{p.aod[1]!r},"
                         f"{p.aoa[0]!r},{p.aoa[1]!r},{p.path_loss_db!r},{p.length_m!r}\n")


def load_inventory(file, bs_ids=None, ue_ids=None, f_c=F_C):
    """Parse an inventory file; every row is validated and rejected with its line number."""
    text = Path(file).read_text(encoding="utf-8") if not hasattr(file, "read") else file.read()
    inv = defaultdict(list)
    header_seen = False
    bs_ok = None if bs_ids is None else set(bs_ids)
    ue_ok = None if ue_ids is None else set(ue_ids)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cols = [c.strip() for c in line.split(",")]
        if not header_seen and cols[0] == "bs_id":
            if tuple(cols) != INVENTORY_COLUMNS:
                raise InventoryParseError(f"unexpected header {cols}", lineno)
            header_seen = True
            continue
        if len(cols) != len(INVENTORY_COLUMNS):
            raise InventoryParseError(f"expected {len(INVENTORY_COLUMNS)} columns, got {len(cols)}", lineno)
        try:
            b, u, bounces = int(cols[0]), int(cols[1]), int(cols[3])
            aod_az, aod_el, aoa_az, aoa_el, loss, length = (float(c) for c in cols[4:])
        except ValueError as exc:
            raise InventoryParseError(f"non-numeric field: {exc}", lineno) from None
        kind = cols[2].upper()
        if bs_ok is not None and b not in bs_ok:
            raise InventoryParseError(f"unknown BS id {b}", lineno)
        if ue_ok is not None and u not in ue_ok:
            raise InventoryParseError(f"unknown UE id {u}", lineno)
        for name, el in (("aod_el", aod_el), ("aoa_el", aoa_el)):
            if not -90.0 <= el <= 90.0:
                raise InventoryParseError(f"{name}={el} outside [-90, 90]", lineno)
        for name, az in (("aod_az", aod_az), ("aoa_az", aoa_az)):
            if not -180.0 <= az <= 180.0:
                raise InventoryParseError(f"{name}={az} outside [-180, 180]", lineno)
        if loss < 0:
            raise InventoryParseError(f"negative path loss {loss}", lineno)
        if length <= 0:
            raise InventoryParseError(f"non-positive length {length}", lineno)
        if loss < fspl_db(length, f_c) - 1e-6:
            raise InventoryParseError(f"path loss {loss} below free-space loss at {length} m", lineno)
        try:
            p = PropagationPath(kind, bounces, (float(wrap_az(aod_az)), aod_el),
                                (float(wrap_az(aoa_az)), aoa_el), loss, length)
        except ValueError as exc:
            raise InventoryParseError(str(exc), lineno) from None
        inv[(b, u)].append(p)
    return {k: sorted(v, key=lambda p: p.path_loss_db) for k, v in inv.items()}


def prune_inventory(inv, floor_dbm, bs_pattern, ue_pattern, tx_power_dbm):
    """Drop paths whose best-case RSS (full power, both peak gains) is below ``floor_dbm``.

    Pairs left without paths are removed.
    """
    best = tx_power_dbm + bs_pattern.peak_gain_dbi + ue_pattern.peak_gain_dbi
    out = {}
    for key, paths in inv.items():
        kept = [p for p in paths if best - p.path_loss_db >= floor_dbm]
        if kept:
            out[key] = kept
    return out


def inventory_size(inv):
    return sum(len(v) for v in inv.values())
