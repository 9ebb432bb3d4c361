"""Antenna patterns: isotropic, ideal sectored and N x N planar arrays.

All patterns are expressed in steering-offset space: ``gain(d_az, d_el)`` is
the gain towards a direction offset by ``(d_az, d_el)`` degrees from the
main-lobe pointing direction.  The nominal pattern is translated, not
re-synthesised, when the beam is steered.
"""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SECTOR_FLOOR_DBI = -40.0
MIN_GAIN_DBI = -200.0

# HPBW (deg) -> peak gain (dBi) of the ideal sectored antennas
IDEAL_SECTOR_PEAKS = {30.0: 15.0, 10.0: 25.0, 6.0: 30.0, 2.0: 40.0}


def wrap_az(az):
    """Wrap azimuth to [-180, 180)."""
    return (np.asarray(az, dtype=float) + 180.0) % 360.0 - 180.0


def wrap_direction(az, el):
    """Map an arbitrary (az, el) pair onto az in [-180, 180), el in [-90, 90].

    Elevations past a pole continue over it, which flips the azimuth.
    """
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    el = (el + 180.0) % 360.0 - 180.0          # [-180, 180)
    over = np.abs(el) > 90.0
    el = np.where(over, np.sign(el) * 180.0 - el, el)
    az = np.where(over, az + 180.0, az)
    return wrap_az(az), el


def to_db(x):
    return 10.0 * np.log10(np.maximum(x, 10 ** (MIN_GAIN_DBI / 10)))


def to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


class AntennaPattern:
    """Base class. Subclasses implement :meth:`gain_linear`."""

    name = "pattern"
    peak_gain_dbi = 0.0

    def gain_linear(self, d_az, d_el):
        raise NotImplementedError

    def gain_db(self, d_az, d_el):
        return to_db(self.gain_linear(d_az, d_el))

    @property
    def peak_gain_linear(self):
        return 10 ** (self.peak_gain_dbi / 10)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class Isotropic(AntennaPattern):
    name = "iso"
    peak_gain_dbi = 0.0

    def gain_linear(self, d_az, d_el):
        d_az, d_el = np.broadcast_arrays(np.asarray(d_az, float), np.asarray(d_el, float))
        return np.ones(d_az.shape)


class IdealSector(AntennaPattern):
    """Separable square sector: peak gain while both |d_az| and |d_el| are
    within half the beamwidth, -40 dBi elsewhere."""

    def __init__(self, hpbw_deg, peak_gain_dbi=None):
        if hpbw_deg <= 0 or hpbw_deg > 360:
            raise ConfigurationError("sector beamwidth must be in (0, 360]")
        if peak_gain_dbi is None:
            try:
                peak_gain_dbi = IDEAL_SECTOR_PEAKS[float(hpbw_deg)]
            except KeyError:
                raise ConfigurationError(
                    f"no tabulated peak gain for a {hpbw_deg} deg sector; pass peak_gain_dbi") from None
        self.hpbw_deg = float(hpbw_deg)
        self.peak_gain_dbi = float(peak_gain_dbi)
        self.name = f"ideal{hpbw_deg:g}"
        self._peak = 10 ** (self.peak_gain_dbi / 10)
        self._floor = 10 ** (SECTOR_FLOOR_DBI / 10)

    def gain_linear(self, d_az, d_el):
        az, el = wrap_direction(d_az, d_el)
        half = self.hpbw_deg / 2
        inside = (np.abs(az) <= half + 1e-12) & (np.abs(el) <= half + 1e-12)
        return np.where(inside, self._peak, self._floor)


def _dirichlet_power(psi, n):
    """|sum_m exp(j m psi)|^2 for m = 0..n-1."""
    half = np.sin(psi / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.sin(n * psi / 2) / half) ** 2
    return np.where(np.abs(half) < 1e-12, float(n * n), val)


class PlanarArray(AntennaPattern):
    """Uniform N x N array of isotropic elements in the y-z plane, boresight +x.

    The elements radiate into the front half-space only (back-baffled).  The
    array factor is sampled on an (el, az) grid, normalised so the pattern
    integrates to 4*pi over the sphere, and queried by bilinear interpolation.
    """

    def __init__(self, n, spacing=0.5, resolution_deg=0.25):
        if n < 2:
            raise ConfigurationError("planar array needs n >= 2; use Isotropic for one element")
        self.n = int(n)
        self.spacing = float(spacing)
        self.resolution_deg = float(resolution_deg)
        self.name = f"{self.n}x{self.n}"
        steps = round(180.0 / self.resolution_deg)
        if not math.isclose(steps * self.resolution_deg, 180.0):
            raise ConfigurationError("grid resolution must divide 180 degrees")
        self.az_grid = np.linspace(-180.0, 180.0, 2 * steps + 1)
        self.el_grid = np.linspace(-90.0, 90.0, steps + 1)
        az, el = np.meshgrid(self.az_grid, self.el_grid)
        raw = self._raw_power(az, el)
        self._norm = self._sphere_mean(raw)
        self.grid = raw / self._norm
        self.peak_gain_dbi = float(10 * np.log10(self.grid.max()))

    def _raw_power(self, az, el):
        a = np.deg2rad(az)
        e = np.deg2rad(el)
        x = np.cos(e) * np.cos(a)
        u = np.cos(e) * np.sin(a)
        v = np.sin(e)
        k = 2 * np.pi * self.spacing
        p = _dirichlet_power(k * u, self.n) * _dirichlet_power(k * v, self.n)
        return np.where(x > 0, p, 0.0)

    def _sphere_mean(self, raw):
        # az = +180 duplicates -180; cos(el) vanishes at the poles
        w = np.cos(np.deg2rad(self.el_grid))[:, None]
        cell = np.deg2rad(self.resolution_deg) ** 2
        return float((raw[:, :-1] * w).sum() * cell / (4 * np.pi))

    def exact_gain_linear(self, d_az, d_el):
        """Closed-form gain, same normalisation as the grid (no interpolation)."""
        az, el = wrap_direction(d_az, d_el)
        return self._raw_power(az, el) / self._norm

    def gain_linear(self, d_az, d_el):
        az, el = wrap_direction(d_az, d_el)
        res = self.resolution_deg
        fa = (az + 180.0) / res
        fe = (el + 90.0) / res
        ia = np.clip(np.floor(fa).astype(int), 0, len(self.az_grid) - 2)
        ie = np.clip(np.floor(fe).astype(int), 0, len(self.el_grid) - 2)
        ta = fa - ia
        te = fe - ie
        g = self.grid
        return ((1 - te) * ((1 - ta) * g[ie, ia] + ta * g[ie, ia + 1])
                + te * ((1 - ta) * g[ie + 1, ia] + ta * g[ie + 1, ia + 1]))


@dataclass(frozen=True)
class Steering:
    az: float
    el: float

    def __post_init__(self):
        az, el = wrap_direction(self.az, self.el)
        object.__setattr__(self, "az", float(az))
        object.__setattr__(self, "el", float(el))


def gain_offset(p: AntennaPattern, d_az, d_el):
    """Gain in dBi at an angular offset from the main lobe."""
    return p.gain_db(d_az, d_el)


def steered_gain(p: AntennaPattern, steer: Steering, direction):
    """Gain in dBi towards ``direction = (az, el)`` with the main lobe on ``steer``."""
    az, el = direction
    return gain_offset(p, steer.az - np.asarray(az), steer.el - np.asarray(el))


@functools.lru_cache(maxsize=None)
def build_planar_array(n, spacing=0.5, resolution_deg=0.25):
    if n < 1:
        raise ConfigurationError("array size must be >= 1")
    if n == 1:
        return Isotropic()
    return PlanarArray(n, spacing, resolution_deg)


@functools.lru_cache(maxsize=None)
def pattern_from_name(name: str) -> AntennaPattern:
    """``iso``, ``ideal<HPBW>`` (e.g. ``ideal10``) or ``<n>x<n>`` (e.g. ``8x8``)."""
    key = name.strip().lower()
    if key in ("iso", "isotropic"):
        return Isotropic()
    m = re.fullmatch(r"ideal(\d+(?:\.\d+)?)", key)
    if m:
        return IdealSector(float(m.group(1)))
    m = re.fullmatch(r"(?:array)?(\d+)x(\d+)", key)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if a != b:
            raise ConfigurationError("only square arrays are supported")
        return build_planar_array(a)
    raise ConfigurationError(f"unknown antenna pattern {name!r}")


def hpbw_deg(p: AntennaPattern, tol=1e-6):
    """Half-power beamwidth of the azimuth cut at zero elevation."""
    if isinstance(p, IdealSector):
        return p.hpbw_deg
    if isinstance(p, Isotropic):
        return 360.0
    f = p.exact_gain_linear if isinstance(p, PlanarArray) else p.gain_linear
    half = float(f(0.0, 0.0)) / 2
    # first null of a uniform n-element line at this spacing bounds the main lobe
    hi = np.rad2deg(np.arcsin(min(1.0, 1.0 / (p.n * p.spacing)))) if isinstance(p, PlanarArray) else 90.0
    lo = 0.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if float(f(mid, 0.0)) >= half:
            lo = mid
        else:
            hi = mid
    return 2 * lo


def pattern_cuts(p: AntennaPattern, step_deg=0.25):
    """Rows ``(cut, az, el, gain_dbi)`` for the el=0 and az=0 cuts."""
    rows = []
    az = np.arange(-180.0, 180.0, step_deg)
    for a, g in zip(az, p.gain_db(az, np.zeros_like(az))):
        rows.append(("el0", float(a), 0.0, float(g)))
    el = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
    for e, g in zip(el, p.gain_db(np.zeros_like(el), el)):
        rows.append(("az0", 0.0, float(e), float(g)))
    return rows


def write_pattern_csv(p: AntennaPattern, path, step_deg=0.25):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cut,az_deg,el_deg,gain_dbi\n")
        for cut, a, e, g in pattern_cuts(p, step_deg):
            fh.write(f"{cut},{a:.4f},{e:.4f},{g:.6f}\n")
