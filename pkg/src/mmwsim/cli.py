"""Command-line entry point: ``mmwsim run|sweep|trace-paths|export-pattern|export-layout``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import antenna, geometry, harness, propagation
from .errors import ConfigurationError, InventoryParseError

log = logging.getLogger("mmwsim")


def _scenario(args):
    sc = harness.Scenario.load(args.scenario) if args.scenario else harness.Scenario()
    kw = {}
    if args.layout_preset:
        kw["layout_preset"] = args.layout_preset
    if args.layout:
        kw["layout_file"] = args.layout
    for name in ("bs_density", "ue_density", "seed", "mac", "n_realizations"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return sc.replace(**kw) if kw else sc


def cmd_run(args):
    sc = _scenario(args)
    agg, _ = harness.run_scenario(sc, workers=args.workers, trace_alloc=args.trace_alloc)
    out = Path(args.out)
    harness.emit_outputs(agg, out, figures=args.figures)
    sc.save(out / "scenario.json")
    for k in ("coverage_ratio", "avg_throughput_all_bps", "median_sinr_served_db"):
        print(f"{k}\t{agg.scalars[k]:.6g}")
    return 0


def cmd_sweep(args):
    base, axes = harness.load_axes(args.axes)
    if args.seed is not None:
        base = base.replace(seed=args.seed)
    rows = harness.sweep(base, axes, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_sweep(rows, out / "sweep.csv")
    if args.figures and "bs_density" in axes:
        from . import plotting
        others = [a for a in axes if a != "bs_density" and len(axes[a]) > 1]
        plotting.plot_sweep(rows, "bs_density", "avg_throughput_all_bps", others[0] if others else None,
                            out / "sweep_throughput.png")
    print(f"{len(rows)} cells -> {out / 'sweep.csv'}")
    return 0


def cmd_trace(args):
    lay = geometry.load_layout(args.layout)
    bss = geometry.place_bs(lay, args.bs_density)
    ues = geometry.place_ue(lay, args.ue_density, args.seed)
    ids = {b.id for b in bss}
    if args.bs is not None and args.bs not in ids:
        raise ConfigurationError(f"BS id {args.bs} not in 0..{len(bss) - 1}")
    sel = [b for b in bss if args.bs is None or b.id == args.bs]
    inv = {}
    for b in sel:
        inv.update(propagation.trace_paths(lay, b, ues, max_bounces=args.max_bounces))
    propagation.save_inventory(inv, args.out)
    print(f"{propagation.inventory_size(inv)} paths -> {args.out}")
    return 0


def cmd_pattern(args):
    p = antenna.pattern_from_name(args.pattern)
    antenna.write_pattern_csv(p, args.out, args.step)
    print(f"{p.name}: peak {p.peak_gain_dbi:.2f} dBi, HPBW {antenna.hpbw_deg(p):.2f} deg")
    return 0


def cmd_layout(args):
    params = geometry.LayoutParams.preset(args.preset, **json.loads(args.params or "{}"))
    lay = geometry.generate_layout(params, args.layout_seed)
    geometry.save_layout(lay, args.out)
    print(f"{len(lay.buildings)} buildings -> {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="mmwsim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="Monte Carlo run of one scenario")
    r.add_argument("--scenario", help="scenario JSON file (defaults if omitted)")
    r.add_argument("--out", required=True)
    r.add_argument("--layout-preset", choices=("dense", "open"))
    r.add_argument("--layout", help="layout CSV, overrides the preset")
    r.add_argument("--bs-density", type=float)
    r.add_argument("--ue-density", type=float)
    r.add_argument("--mac", choices=("SU", "TDMA", "SDMA"))
    r.add_argument("--n-realizations", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--trace-alloc", action="store_true", help="log every allocation decision")
    r.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="cross-product sweep")
    s.add_argument("--axes", required=True, help="JSON with 'base' scenario and 'axes' lists")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("trace-paths", help="write the path inventory of a layout")
    t.add_argument("--layout", required=True)
    t.add_argument("--bs", type=int, help="single BS id (all if omitted)")
    t.add_argument("--bs-density", type=float, default=64.0)
    t.add_argument("--ue-density", type=float, default=1000.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--max-bounces", type=int, default=2, choices=(0, 1, 2))
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trace)

    p = sub.add_parser("export-pattern", help="write el=0 / az=0 pattern cuts")
    p.add_argument("pattern", help="iso, ideal<HPBW> or <n>x<n>")
    p.add_argument("--out", required=True)
    p.add_argument("--step", type=float, default=0.25)
    p.set_defaults(func=cmd_pattern)

    g = sub.add_parser("export-layout", help="generate and save a synthetic layout")
    g.add_argument("--preset", default="dense", choices=("dense", "open"))
    g.add_argument("--params", help="JSON object of layout overrides")
    g.add_argument("--layout-seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_layout)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or getattr(args, "trace_alloc", False)
                        else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, InventoryParseError, OSError) as exc:
        print(f"mmwsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
