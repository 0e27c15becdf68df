"""Run a matrix of (config, seed) drops, optionally in worker processes."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..config import config_hash
from .engine import METRIC_FIELDS, run_drop

__all__ = ["CampaignResult", "run_campaign", "aggregate", "ue_rows", "packet_rows", "AGG_FIELDS",
           "RESULT_HEADER"]

AGG_FIELDS = [f for f in METRIC_FIELDS if f != "seed"]
RESULT_HEADER = (["config", "config_hash", "kind", "status"] + METRIC_FIELDS
                 + [f + "_ci95" for f in AGG_FIELDS])


@dataclass
class CampaignResult:
    """Per-drop results in (config index, seed) order plus failures."""

    configs: list
    seeds: list
    metrics: dict = field(default_factory=dict)  # (config index, seed) -> SimMetrics
    failures: dict = field(default_factory=dict)  # (config index, seed) -> message

    def rows(self):
        """One row per drop, then one ``aggregate`` row per config.

        The aggregate row holds the mean over successful drops; the
        ``*_ci95`` columns hold the 95 % confidence half-widths.
        """
        out = []
        for i, cfg in enumerate(self.configs):
            h = config_hash(cfg)
            done = []
            for s in self.seeds:
                key = (i, s)
                if key in self.metrics:
                    m = self.metrics[key]
                    done.append(m)
                    out.append({"config": i, "config_hash": h, "kind": "drop", "status": "ok", **m.row()})
                else:
                    out.append({"config": i, "config_hash": h, "kind": "drop", "seed": s,
                                "status": "error: " + self.failures.get(key, "not run")})
            agg = aggregate(done)
            row = {"config": i, "config_hash": h, "kind": "aggregate", "seed": "",
                   "status": f"{len(done)}/{len(self.seeds)} ok", **agg["mean"]}
            row.update({f + "_ci95": v for f, v in agg["ci95"].items()})
            out.append(row)
        return out


def aggregate(metrics) -> dict:
    """Mean and 95 % Student-t half-width of every metric over drops."""
    mean, ci = {}, {}
    for f in AGG_FIELDS:
        x = np.array([getattr(m, f) for m in metrics], dtype=float)
        if len(x) == 0:
            mean[f] = ci[f] = float("nan")
            continue
        mean[f] = float(np.mean(x))
        if len(x) > 1:
            ci[f] = float(stats.t.ppf(0.975, len(x) - 1) * np.std(x, ddof=1) / np.sqrt(len(x)))
        else:
            ci[f] = float("nan")
    return {"mean": mean, "ci95": ci}


def _job(args):
    cfg, seed = args
    try:
        return seed, run_drop(cfg, seed), None
    except Exception as exc:  # reported per cell, the campaign goes on
        return seed, None, f"{type(exc).__name__}: {exc}"


def run_campaign(configs, seeds, parallelism: int = 1) -> CampaignResult:
    """Run every (config, seed) pair.

    Results do not depend on ``parallelism``: each drop is a pure function
    of its config and seed, and rows are emitted in input order.
    """
    configs = list(configs)
    seeds = [int(s) for s in seeds]
    if not configs or not seeds:
        raise ValueError("campaign needs at least one config and one seed")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    jobs = [(i, cfg, s) for i, cfg in enumerate(configs) for s in seeds]
    res = CampaignResult(configs, seeds)
    if parallelism == 1:
        outs = [_job((cfg, s)) for _, cfg, s in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as ex:
            outs = list(ex.map(_job, [(cfg, s) for _, cfg, s in jobs]))
    for (i, _, s), (_, m, err) in zip(jobs, outs):
        if err is None:
            res.metrics[(i, s)] = m
        else:
            res.failures[(i, s)] = err
    return res


def ue_rows(result: CampaignResult):
    """Per-UE throughput rows ``(config, seed, ue, throughput_bps)`` for CDFs."""
    for (i, s), m in sorted(result.metrics.items()):
        for u, v in enumerate(m.ue_throughput_bps):
            yield (i, s, u, float(v))


def packet_rows(result: CampaignResult):
    for (i, s), m in sorted(result.metrics.items()):
        for k, v in enumerate(m.packet_throughput_bps):
            yield (i, s, k, float(v))

