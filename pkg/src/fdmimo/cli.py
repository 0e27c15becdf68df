"""``fdmimo`` command-line front end.

Subcommands write CSV (and JSON for ``simulate``) into ``--out``, which
defaults to ``$FDMIMO_OUT`` or ``./fdmimo_out``.  Every CSV starts with a
``#`` provenance line followed by a header row.  Failures are reported as a
single JSON object on stderr with a nonzero exit status.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .array import ArrayConfig, ElementPattern, array_factor, array_response, build_array
from .config import ConfigError, config_hash, load_config
from .feedback import feedback_bits, pilot_overhead_fraction
from .io import provenance_line, read_csv, write_csv, write_json
from .precoding import effective_sum_capacity

OUT_ENV = "FDMIMO_OUT"

PATTERN_HEADER = ["angle_deg", "magnitude", "gain_db"]
OVERHEAD_HEADER = ["n_t", "class_a_bits", "class_b_bits", "pilot_fraction_nonprecoded",
                   "pilot_fraction_beamformed"]
CAPACITY_HEADER = ["n_t", "zero_overhead", "non_precoded", "beamformed",
                   "overhead_non_precoded", "overhead_beamformed"]
SUMMARY_HEADER = ["config", "config_hash", "kind", "seed", "n_ues", "mean_user_tput_mbps",
                  "p5_user_tput_mbps", "median_user_tput_mbps", "cell_avg_se", "edge_se"]
CDF_HEADER = ["config", "user_tput_mbps", "cdf"]


class CliError(Exception):
    pass


def _out_dir(arg):
    path = arg or os.environ.get(OUT_ENV) or "fdmimo_out"
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path!r}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise CliError(f"output directory {path!r} is not writable")
    return path


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _range_or_list(text):
    """``a..b`` or ``a,b,c``."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        if lo > hi:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return _int_list(text)


# -- pattern -----------------------------------------------------------------

def pattern_rows(m, n, dv, dh, cut="horizontal", steer=(0.0, 0.0), step=0.1):
    """Array factor of a single-polarization ``m x n`` panel along one cut.

    Weights are the conjugate response towards ``steer`` (uniform at
    broadside); the element is isotropic so only the array factor shows.
    """
    if cut not in ("horizontal", "vertical"):
        raise CliError(f"cut must be horizontal or vertical, got {cut!r}")
    if not step > 0:
        raise CliError("step must be positive")
    geom = build_array(ArrayConfig(m, n, 1, dv, dh, element=ElementPattern("isotropic")))
    w = np.conj(array_response(geom, steer[0], steer[1], single_pol=True))
    n_pts = int(round(180.0 / step)) + 1
    angles = np.round(np.linspace(-90.0, 90.0, n_pts), 10)
    mags = np.array([abs(array_factor(geom, w, (a, 0.0) if cut == "horizontal" else (0.0, a)))
                     for a in angles])
    peak = float(mags.max())
    with np.errstate(divide="ignore"):
        gain = 20.0 * np.log10(mags / peak)
    return [(float(a), float(x), float(g)) for a, x, g in zip(angles, mags, gain)]


def cmd_pattern(args):
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
        block = d.get("array", d)
        unknown = sorted(set(block) - {"M", "N", "P", "dv_lambda", "dh_lambda", "carrier_hz"})
        if unknown:
            raise ConfigError(f"array: unknown key(s) {', '.join(unknown)}")
        m, n = int(block.get("M", args.M)), int(block.get("N", args.N))
        dv, dh = float(block.get("dv_lambda", args.dv)), float(block.get("dh_lambda", args.dh))
    else:
        m, n, dv, dh = args.M, args.N, args.dv, args.dh
    try:
        rows = pattern_rows(m, n, dv, dh, args.cut, (args.steer_az, args.steer_el), args.step)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = os.path.join(_out_dir(args.out), f"pattern_{args.cut}.csv")
    prov = provenance_line(M=m, N=n, dv=dv, dh=dh, cut=args.cut,
                           steer=f"{args.steer_az:g}/{args.steer_el:g}")
    write_csv(out, PATTERN_HEADER, rows, prov)
    return out


# -- overhead / capacity -------------------------------------------------------

def overhead_rows(n_t_values, snr_db=10.0, n_b=4):
    return [(nt, feedback_bits("A", nt, snr_db=snr_db), feedback_bits("B", nt, n_b=n_b),
             pilot_overhead_fraction("NonPrecoded", nt), pilot_overhead_fraction("Beamformed", n_b))
            for nt in n_t_values]


def cmd_overhead(args):
    rows = overhead_rows(args.n_t, args.snr_db, args.n_b)
    out = os.path.join(_out_dir(args.out), "overhead.csv")
    write_csv(out, OVERHEAD_HEADER, rows, provenance_line(snr_db=args.snr_db, n_b=args.n_b))
    return out


def capacity_rows(n_t_values, n_users=10, snr_db=10.0, n_b=12, draws=2000, seed=0):
    rows = []
    for nt in n_t_values:
        o_np = pilot_overhead_fraction("NonPrecoded", nt)
        o_bf = pilot_overhead_fraction("Beamformed", n_b)
        base = effective_sum_capacity(nt, n_users, snr_db, 0.0, draws, seed)
        rows.append((nt, base, (1.0 - o_np) * base, (1.0 - o_bf) * base, o_np, o_bf))
    return rows


def cmd_capacity(args):
    rows = capacity_rows(args.n_t, args.users, args.snr_db, args.n_b, args.draws, args.seed)
    out = os.path.join(_out_dir(args.out), "capacity.csv")
    prov = provenance_line(seeds=[args.seed], users=args.users, snr_db=args.snr_db,
                           n_b=args.n_b, draws=args.draws)
    write_csv(out, CAPACITY_HEADER, rows, prov)
    return out


# -- simulate / summarize ------------------------------------------------------

def _load_configs(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    items = d if isinstance(d, list) else [d]
    if not items:
        raise ConfigError(f"{path}: empty config list")
    out = []
    for i, item in enumerate(items):
        try:
            out.append(load_config(item))
        except ConfigError as exc:
            raise ConfigError(f"config[{i}]: {exc}") if len(items) > 1 else exc
    return out


def cmd_simulate(args):
    from .sim.campaign import RESULT_HEADER, aggregate, packet_rows, run_campaign, ue_rows

    configs = _load_configs(args.config)
    out_dir = _out_dir(args.out)
    res = run_campaign(configs, args.seeds, parallelism=args.parallel)
    hashes = [config_hash(c) for c in configs]
    prov = provenance_line(",".join(hashes), args.seeds)
    write_csv(os.path.join(out_dir, "results.csv"), RESULT_HEADER, res.rows(), prov)
    write_csv(os.path.join(out_dir, "ue_throughput.csv"), ["config", "seed", "ue", "throughput_bps"],
              ue_rows(res), prov)
    write_csv(os.path.join(out_dir, "packets.csv"), ["config", "seed", "packet", "throughput_bps"],
              packet_rows(res), prov)
    summary = {
        "version": __version__,
        "seeds": list(args.seeds),
        "configs": [{"config_hash": h, "config": c.to_dict(),
                     **aggregate([res.metrics[(i, s)] for s in args.seeds if (i, s) in res.metrics])}
                    for i, (h, c) in enumerate(zip(hashes, configs))],
        "failures": [{"config": i, "seed": s, "error": e} for (i, s), e in sorted(res.failures.items())],
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    if res.failures:
        raise CliError(f"{len(res.failures)} of {len(configs) * len(args.seeds)} drops failed; "
                       "see summary.json")
    return out_dir


def _percentile_rows(config, chash, kind, seed, tput, cell_se, edge_se):
    mbps = np.asarray(tput, dtype=float) / 1e6
    if len(mbps) == 0:
        return {"config": config, "config_hash": chash, "kind": kind, "seed": seed, "n_ues": 0}
    return {"config": config, "config_hash": chash, "kind": kind, "seed": seed, "n_ues": len(mbps),
            "mean_user_tput_mbps": float(np.mean(mbps)),
            "p5_user_tput_mbps": float(np.percentile(mbps, 5)),
            "median_user_tput_mbps": float(np.median(mbps)),
            "cell_avg_se": cell_se, "edge_se": edge_se}


def summarize_dir(in_dir):
    """Rows of ``summary.csv`` (per seed then one pooled aggregate per config) and ``cdf.csv``."""
    prov, header, rows = read_csv(os.path.join(in_dir, "results.csv"))
    col = {h: i for i, h in enumerate(header)}
    _, _, ue = read_csv(os.path.join(in_dir, "ue_throughput.csv"))
    tputs = {}
    for c, s, _, v in ue:
        tputs.setdefault((int(c), int(s)), []).append(float(v))
    summary, cdf = [], []
    by_config = {}
    for r in rows:
        if r[col["kind"]] != "drop" or r[col["status"]] != "ok":
            continue
        c, s = int(r[col["config"]]), int(r[col["seed"]])
        by_config.setdefault(c, []).append((s, r))
    for c in sorted(by_config):
        drops = by_config[c]
        chash = drops[0][1][col["config_hash"]]
        pooled = []
        for s, r in drops:
            t = tputs.get((c, s), [])
            pooled += t
            summary.append(_percentile_rows(c, chash, "drop", s, t, float(r[col["cell_avg_se"]]),
                                            float(r[col["edge_se"]])))
        summary.append(_percentile_rows(
            c, chash, "aggregate", "", pooled,
            float(np.mean([float(r[col["cell_avg_se"]]) for _, r in drops])),
            float(np.mean([float(r[col["edge_se"]]) for _, r in drops]))))
        x = np.sort(np.asarray(pooled)) / 1e6
        cdf += [(c, float(v), (k + 1) / len(x)) for k, v in enumerate(x)]
    return prov, summary, cdf


def cmd_summarize(args):
    in_dir = args.input or _out_dir(args.out)
    prov, summary, cdf = summarize_dir(in_dir)
    out_dir = _out_dir(args.out)
    prov = prov or provenance_line()
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER, summary, prov)
    write_csv(os.path.join(out_dir, "cdf.csv"), CDF_HEADER, cdf, prov)
    return out_dir


# -- entry point ---------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fdmimo", description="FD-MIMO analysis and simulation tools")
    p.add_argument("--version", action="version", version=f"fdmimo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./fdmimo_out)")

    sp = sub.add_parser("pattern", help="array factor cut of a uniform panel")
    common(sp)
    sp.add_argument("--config", help="JSON file with an array block")
    sp.add_argument("--M", type=int, default=1, help="rows")
    sp.add_argument("--N", type=int, default=4, help="columns")
    sp.add_argument("--dv", type=float, default=0.5, help="vertical spacing (wavelengths)")
    sp.add_argument("--dh", type=float, default=0.5, help="horizontal spacing (wavelengths)")
    sp.add_argument("--cut", choices=["horizontal", "vertical"], default="horizontal")
    sp.add_argument("--steer-az", type=float, default=0.0)
    sp.add_argument("--steer-el", type=float, default=0.0)
    sp.add_argument("--step", type=float, default=0.1, help="angle step (degrees)")
    sp.set_defaults(func=cmd_pattern)

    sp = sub.add_parser("overhead", help="feedback bits and pilot fraction versus N_T")
    common(sp)
    sp.add_argument("--n-t", type=_range_or_list, default=list(range(1, 65)), help="a..b or a,b,c")
    sp.add_argument("--snr-db", type=float, default=10.0)
    sp.add_argument("--n-b", type=int, default=4)
    sp.set_defaults(func=cmd_overhead)

    sp = sub.add_parser("capacity", help="overhead-scaled ZF sum capacity versus N_T")
    common(sp)
    sp.add_argument("--n-t", type=_range_or_list, default=[8, 16, 32, 64])
    sp.add_argument("--users", type=int, default=10)
    sp.add_argument("--snr-db", type=float, default=10.0)
    sp.add_argument("--n-b", type=int, default=12)
    sp.add_argument("--draws", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_capacity)

    sp = sub.add_parser("simulate", help="run a (config x seed) campaign")
    common(sp)
    sp.add_argument("--config", required=True, help="JSON config object or list of objects")
    sp.add_argument("--seeds", type=_int_list, default=[1])
    sp.add_argument("--parallel", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("summarize", help="percentiles and CDFs of a simulate output directory")
    common(sp)
    sp.add_argument("--in", dest="input", help="simulate output directory (default: --out)")
    sp.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = args.func(args)
    except Exception as exc:  # every failure becomes one machine-readable line
        kind = "config" if isinstance(exc, ConfigError) else type(exc).__name__
        print(json.dumps({"error": kind, "message": str(exc), "command": args.command}), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
