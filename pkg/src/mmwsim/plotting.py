"""Figures rendered next to the CSV outputs. The CSVs remain the data contract."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from . import harness  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cdf(rows, xlabel, path, labels=("served", "all"), ref=None):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if rows:
        x = [r[0] for r in rows]
        for j, lab in enumerate(labels, start=1):
            ax.step(x, [r[j] for r in rows], where="post", label=lab)
    if ref is not None:
        ax.axvline(ref, color="k", ls="--", lw=0.8, label="noise floor")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    _save(fig, path)


def plot_link_map(bundle, path, realization=0):
    fig, ax = plt.subplots(figsize=(6, 6))
    lay = bundle.layout
    if lay is not None:
        for b in lay.buildings:
            f = b.footprint
            ax.add_patch(Rectangle((f.x_min, f.y_min), f.width, f.height, color="0.75"))
        n = lay.network_extent
        ax.add_patch(Rectangle((n.x_min, n.y_min), n.width, n.height, fill=False, ls="--", ec="k"))
        ax.set_xlim(lay.site_extent.x_min, lay.site_extent.x_max)
        ax.set_ylim(lay.site_extent.y_min, lay.site_extent.y_max)
    recs = [r for r in bundle.records if r.realization == realization]
    for r in recs:
        if r.dropped:
            continue
        pts = [r.bs_pos[:2], *[p[:2] for p in r.points], r.ue_pos[:2]]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=0.5,
                color="tab:green" if r.path_kind == "LOS" else "tab:orange")
    served = [r for r in recs if not r.dropped]
    dropped = [r for r in recs if r.dropped]
    if served:
        sc = ax.scatter([r.x for r in served], [r.y for r in served], c=[r.sinr_db for r in served],
                        s=10, cmap="viridis", zorder=3)
        fig.colorbar(sc, ax=ax, label="SINR [dB]", shrink=0.8)
    if dropped:
        ax.scatter([r.x for r in dropped], [r.y for r in dropped], marker="x", c="r", s=10, zorder=3)
    ax.scatter([b.x for b in bundle.bs_nodes], [b.y for b in bundle.bs_nodes], marker="^", c="k", s=30, zorder=4)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    _save(fig, path)


def render_bundle(bundle, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    served = bundle.served
    n = len(bundle.records)
    plot_cdf(harness.ecdf_rows([r.sinr_db for r in served], n), "SINR [dB]", out / "cdf_sinr.png")
    plot_cdf(harness.ecdf_rows([r.throughput_bps / 1e9 for r in served], n), "throughput [Gbit/s]",
             out / "cdf_throughput.png")
    plot_cdf(harness.interference_cdf_rows([r.i_intra_mw for r in served], [r.i_inter_mw for r in served],
                                           bundle.noise_floor_dbm),
             "interference [dBm]", out / "cdf_interference.png", labels=("intra-cell", "inter-cell"),
             ref=bundle.noise_floor_dbm)
    plot_link_map(bundle, out / "link_map.png")


def plot_sweep(rows, x, y, group, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    groups = sorted({str(r.get(group)) for r in rows}) if group else [None]
    for g in groups:
        sel = [r for r in rows if group is None or str(r.get(group)) == g]
        sel.sort(key=lambda r: r[x])
        ax.errorbar([r[x] for r in sel], [r[y] for r in sel], yerr=[r.get(y + "_std") or 0 for r in sel],
                    marker="o", capsize=2, label=g)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.grid(alpha=0.3)
    if group:
        ax.legend(title=group)
    _save(fig, path)
