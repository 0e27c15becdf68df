"""Proportional-fair scheduling over time and frequency."""

from dataclasses import dataclass

import numpy as np

__all__ = ["SchedulingState", "MuGroup", "pf_schedule", "write_scheduler_csv"]


class SchedulingState:
    """Exponentially smoothed per-UE throughput.

    Every call to :meth:`update` moves each average towards the rate the UE
    was served in that slot (zero if unscheduled) with weight ``1 / window``.
    Averages are floored at ``eps`` so PF metrics stay finite.
    """

    def __init__(self, n_ues: int, window: float = 100.0, eps: float = 1e-6, initial: float | None = None):
        if n_ues < 1:
            raise ValueError("empty UE set")
        if window <= 1.0:
            raise ValueError("window must exceed one slot")
        self.alpha = 1.0 / window
        self.eps = eps
        self.avg = np.full(n_ues, eps if initial is None else float(initial))

    @property
    def n_ues(self) -> int:
        return len(self.avg)

    def update(self, served):
        served = np.asarray(served, dtype=float)
        self.avg = np.maximum((1.0 - self.alpha) * self.avg + self.alpha * served, self.eps)


@dataclass(frozen=True)
class MuGroup:
    """Co-scheduled UEs on one subband."""

    members: tuple
    ranks: tuple = ()
    metric: float = 0.0

    def __post_init__(self):
        ranks = self.ranks or (1,) * len(self.members)
        if len(ranks) != len(self.members):
            raise ValueError("one rank per member")
        if any(r > 2 for r in ranks) or sum(ranks) > 4:
            raise ValueError("at most 2 layers per UE and 4 in total")
        object.__setattr__(self, "ranks", tuple(ranks))


def pf_schedule(state: SchedulingState, per_ue_subband_rates, groups=None, update: bool = True):
    """Give every subband to the group with the largest sum of rate / average.

    Parameters
    ----------
    state : SchedulingState
    per_ue_subband_rates : array_like, shape (U, S)
        Instantaneous single-user rates.
    groups : sequence of (members, ranks, rates), optional
        Candidate MU groups; ``rates`` is ``(len(members), S)``.  Single-UE
        groups built from ``per_ue_subband_rates`` are always candidates.
    update : bool
        Apply the throughput-average update with the granted rates.

    Returns
    -------
    list of MuGroup
        One entry per subband.  Ties go to the candidate listed first, and
        single-UE candidates are listed in UE order.
    """
    rates = np.asarray(per_ue_subband_rates, dtype=float)
    if rates.ndim != 2 or rates.shape[0] == 0:
        raise ValueError("empty UE set")
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    n_ue, n_sb = rates.shape
    cands = [((u,), (1,), rates[u:u + 1]) for u in range(n_ue)]
    for members, ranks, r in groups or ():
        cands.append((tuple(members), tuple(ranks), np.asarray(r, dtype=float).reshape(len(members), n_sb)))
    avg = state.avg
    metrics = np.array([np.sum(r / avg[list(m)][:, None], axis=0) for m, _, r in cands])  # (C, S)
    alloc, served = [], np.zeros(n_ue)
    for s in range(n_sb):
        col = metrics[:, s]
        c = int(np.flatnonzero(col >= col.max() * (1 - 1e-12))[0])
        members, ranks, r = cands[c]
        alloc.append(MuGroup(members, ranks, float(col[c])))
        for i, u in enumerate(members):
            served[u] += r[i, s]
    if update:
        state.update(served)
    return alloc


def write_scheduler_csv(path, rows) -> None:
    """Scheduler trace ``subframe,subband,members,ranks,pf_metric``."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subframe", "subband", "members", "ranks", "pf_metric"])
        for sf, sb, grp in rows:
            w.writerow([sf, sb, " ".join(map(str, grp.members)), " ".join(map(str, grp.ranks)),
                        f"{grp.metric:.6g}"])
