"""Synthetic urban layouts and BS/UE deployment.

Buildings are axis-aligned rectangular prisms on a regular block grid.  BSs
sit on a uniform grid snapped to the nearest building corner, UEs follow a
Poisson point process over the network area and are kept outdoors.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

log = logging.getLogger(__name__)

H_BS = 6.0
H_UE = 1.5


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.width * self.height

    def contains(self, other: "Rect") -> bool:
        return (self.x_min <= other.x_min and self.y_min <= other.y_min
                and other.x_max <= self.x_max and other.y_max <= self.y_max)

    def contains_point(self, x, y):
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class Building:
    footprint: Rect
    height: float

    def corners(self):
        f = self.footprint
        return [(f.x_min, f.y_min), (f.x_max, f.y_min), (f.x_max, f.y_max), (f.x_min, f.y_max)]


@dataclass(frozen=True)
class UrbanLayout:
    site_extent: Rect
    network_extent: Rect
    buildings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        validate_layout(self)

    def box_array(self):
        """Buildings as an ``(n, 5)`` array of ``x_min, y_min, x_max, y_max, height``."""
        if not self.buildings:
            return np.zeros((0, 5))
        return np.array([[b.footprint.x_min, b.footprint.y_min, b.footprint.x_max,
                          b.footprint.y_max, b.height] for b in self.buildings], dtype=float)

    def indoor_mask(self, xy):
        """True where a point lies strictly inside a building footprint."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        boxes = self.box_array()
        if len(boxes) == 0:
            return np.zeros(len(xy), dtype=bool)
        x = xy[:, 0:1]
        y = xy[:, 1:2]
        inside = (x > boxes[:, 0]) & (x < boxes[:, 2]) & (y > boxes[:, 1]) & (y < boxes[:, 3])
        return inside.any(axis=1)


@dataclass(frozen=True)
class Node:
    id: int
    position: tuple
    kind: str  # "BS" or "UE"

    @property
    def x(self):
        return self.position[0]

    @property
    def y(self):
        return self.position[1]

    @property
    def z(self):
        return self.position[2]


def validate_layout(layout: UrbanLayout):
    if not layout.site_extent.contains(layout.network_extent):
        raise ConfigurationError("network extent must lie inside the site extent")
    for i, b in enumerate(layout.buildings):
        f = b.footprint
        if f.area <= 0 or b.height <= 0:
            raise ConfigurationError(f"building {i} has non-positive area or height")
        if not layout.site_extent.contains(f):
            raise ConfigurationError(f"building {i} lies outside the site extent")
    boxes = layout.box_array()
    if len(boxes) > 1:
        ov = ((boxes[:, None, 0] < boxes[None, :, 2]) & (boxes[None, :, 0] < boxes[:, None, 2])
              & (boxes[:, None, 1] < boxes[None, :, 3]) & (boxes[None, :, 1] < boxes[:, None, 3]))
        np.fill_diagonal(ov, False)
        if ov.any():
            i, j = np.argwhere(ov)[0]
            raise ConfigurationError(f"buildings {i} and {j} overlap")


@dataclass(frozen=True)
class LayoutParams:
    site_size: float = 750.0
    network_size: float = 500.0
    block_size: float = 50.0
    street_width: float = 15.0
    fill_ratio: float = 1.0
    height_range: tuple = (12.0, 40.0)

    @classmethod
    def preset(cls, name, **overrides):
        """``dense`` is a tight block grid; ``open`` has wide streets and sparse buildings."""
        presets = {
            "dense": dict(block_size=50.0, street_width=15.0, fill_ratio=0.9, height_range=(12.0, 40.0)),
            "open": dict(block_size=60.0, street_width=30.0, fill_ratio=0.55, height_range=(8.0, 25.0)),
        }
        if name not in presets:
            raise ConfigurationError(f"unknown layout preset {name!r}; choose from {sorted(presets)}")
        kw = presets[name]
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self):
        return {"site_size": self.site_size, "network_size": self.network_size,
                "block_size": self.block_size, "street_width": self.street_width,
                "fill_ratio": self.fill_ratio, "height_range": list(self.height_range)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "height_range" in d:
            d["height_range"] = tuple(d["height_range"])
        return cls(**d)


def _check_params(p: LayoutParams):
    if p.street_width <= 0:
        raise ConfigurationError("street width must be positive")
    if p.block_size <= 0:
        raise ConfigurationError("block size must be positive")
    if p.street_width > p.block_size:
        raise ConfigurationError(
            f"street width {p.street_width} m exceeds block size {p.block_size} m")
    if not 0.0 < p.fill_ratio <= 1.0:
        raise ConfigurationError("fill ratio must be in (0, 1]")
    if p.network_size > p.site_size:
        raise ConfigurationError("network area larger than site")
    if p.block_size + p.street_width > p.site_size:
        raise ConfigurationError("site too small for a single block")
    lo, hi = p.height_range
    if lo <= 0 or hi < lo:
        raise ConfigurationError("invalid building height range")


def _site_rects(p: LayoutParams):
    site = Rect(0.0, 0.0, p.site_size, p.site_size)
    m = (p.site_size - p.network_size) / 2
    return site, Rect(m, m, m + p.network_size, m + p.network_size)


def generate_layout(params: LayoutParams, seed: int = 0) -> UrbanLayout:
    """Block grid with pitch ``block + street``, centred on the site.

    Each block is built with probability ``fill_ratio``; heights are uniform
    over ``height_range``.
    """
    _check_params(params)
    site, net = _site_rects(params)
    pitch = params.block_size + params.street_width
    n = int(math.floor(params.site_size / pitch))
    offset = (params.site_size - n * pitch) / 2 + params.street_width / 2
    rng = np.random.default_rng(seed)
    lo, hi = params.height_range
    buildings = []
    for i in range(n):
        for j in range(n):
            built = rng.random() < params.fill_ratio
            h = rng.uniform(lo, hi)
            if not built:
                continue
            x0 = offset + i * pitch
            y0 = offset + j * pitch
            buildings.append(Building(Rect(x0, y0, x0 + params.block_size, y0 + params.block_size),
                                      float(h)))
    return UrbanLayout(site, net, tuple(buildings))


def empty_layout(site_size=750.0, network_size=500.0) -> UrbanLayout:
    site, net = _site_rects(LayoutParams(site_size=site_size, network_size=network_size))
    return UrbanLayout(site, net, ())


def _grid_shape(n):
    """Rows/cols for ``n`` grid points: the most square exact factorisation,
    or a near-square grid with a partial last row."""
    best = None
    for r in range(1, int(math.isqrt(n)) + 1):
        if n % r == 0:
            best = (r, n // r)
    r, c = best
    if c <= 2 * r:
        return [c] * r
    c = math.ceil(math.sqrt(n))
    rows = [c] * (n // c)
    if n % c:
        rows.append(n % c)
    return rows


def nominal_bs_grid(net: Rect, n: int):
    rows = _grid_shape(n)
    pts = []
    dy = net.height / len(rows)
    for ri, nc in enumerate(rows):
        dx = net.width / nc
        y = net.y_min + (ri + 0.5) * dy
        for ci in range(nc):
            pts.append((net.x_min + (ci + 0.5) * dx, y))
    return pts


def bs_count(layout: UrbanLayout, density):
    return int(round(density * layout.network_extent.area / 1e6))


def place_bs(layout: UrbanLayout, density, h_bs=H_BS):
    """Uniform grid over the network area, each point moved to the closest
    building corner. Equidistant corners resolve to the lowest (x, y)."""
    if not layout.buildings:
        raise ConfigurationError("BS placement needs at least one building")
    n = bs_count(layout, density)
    if n < 1:
        raise ConfigurationError(f"BS density {density}/km^2 gives no BS on this network area")
    corners = np.array(sorted({c for b in layout.buildings for c in b.corners()}))
    nodes = []
    used = {}
    for i, (gx, gy) in enumerate(nominal_bs_grid(layout.network_extent, n)):
        d = np.hypot(corners[:, 0] - gx, corners[:, 1] - gy)
        # corners are sorted by (x, y), so argmin over near-ties keeps the lowest one
        k = int(np.flatnonzero(d <= d.min() + 1e-9)[0])
        cx, cy = float(corners[k, 0]), float(corners[k, 1])
        if (cx, cy) in used:
            log.warning("BS %d co-located with BS %d at corner (%.2f, %.2f)", i, used[(cx, cy)], cx, cy)
        used.setdefault((cx, cy), i)
        nodes.append(Node(i, (cx, cy, float(h_bs)), "BS"))
    return nodes


def colocated_bs(nodes):
    """Groups of BS ids sharing one position (only groups of size > 1)."""
    groups = {}
    for n in nodes:
        groups.setdefault(n.position, []).append(n.id)
    return [g for g in groups.values() if len(g) > 1]


def place_ue(layout: UrbanLayout, density, seed=0, h_ue=H_UE):
    """PPP over the network area; indoor draws are rejected and redrawn."""
    if density <= 0:
        raise ConfigurationError("UE density must be positive")
    net = layout.network_extent
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(density * net.area / 1e6))
    pts = np.empty((0, 2))
    while len(pts) < n:
        need = n - len(pts)
        cand = np.column_stack([rng.uniform(net.x_min, net.x_max, need),
                                rng.uniform(net.y_min, net.y_max, need)])
        cand = cand[~layout.indoor_mask(cand)]
        pts = np.vstack([pts, cand])
    return [Node(i, (float(x), float(y), float(h_ue)), "UE") for i, (x, y) in enumerate(pts)]


def save_layout(layout: UrbanLayout, path):
    s, n = layout.site_extent, layout.network_extent
    lines = [
        "# urban layout: axis-aligned building prisms, meters",
        f"# site_extent={s.x_min},{s.y_min},{s.x_max},{s.y_max}",
        f"# network_extent={n.x_min},{n.y_min},{n.x_max},{n.y_max}",
        "x_min,y_min,x_max,y_max,height",
    ]
    for b in layout.buildings:
        f = b.footprint
        lines.append(f"{f.x_min!r},{f.y_min!r},{f.x_max!r},{f.y_max!r},{b.height!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_layout(path) -> UrbanLayout:
    site = net = None
    buildings = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = (t.strip() for t in body.split("=", 1))
                if key in ("site_extent", "network_extent"):
                    r = Rect(*(float(v) for v in val.split(",")))
                    if key == "site_extent":
                        site = r
                    else:
                        net = r
            continue
        if line.startswith("x_min"):
            continue
        try:
            x0, y0, x1, y1, h = (float(v) for v in line.split(","))
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: malformed building row {raw!r}") from exc
        buildings.append(Building(Rect(x0, y0, x1, y1), h))
    if site is None:
        if not buildings:
            raise ConfigurationError(f"{path}: no site extent and no buildings")
        arr = np.array([[b.footprint.x_min, b.footprint.y_min, b.footprint.x_max, b.footprint.y_max]
                        for b in buildings])
        site = Rect(float(arr[:, 0].min()), float(arr[:, 1].min()),
                    float(arr[:, 2].max()), float(arr[:, 3].max()))
    if net is None:
        net = site
    return UrbanLayout(site, net, tuple(buildings))
