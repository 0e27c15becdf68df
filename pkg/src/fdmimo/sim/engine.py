"""One simulation drop: channels, CSI reporting, scheduling, SLNR precoding,
MMSE reception and HARQ, with every one of the cells transmitting its
actually scheduled precoders.

Channels are drawn once per drop (quasi-static) and projected on a per-cell
transmit basis ``T_c`` (the TXRU virtualization, or the beam set for the
beamformed schemes).  All link quantities are scaled so that the thermal
noise power per receive antenna is one.
"""

from dataclasses import dataclass, field

import numpy as np

from ..array import build_array
from ..channel import cluster_steering, draw_link
from ..config import SimConfig, load_config
from ..feedback import (CO_PHASES, RES_PER_RB, build_dft_codebook, cqi_efficiency, cqi_index,
                        long_term_pmi)
from ..rng import stream
from ..scheduling import SchedulingState
from ..txru import TxruGrid, build_connected, build_partitioned, tilt_weight
from .layout import UeDrop, build_layout, drop_ues
from .linalg import generalized_top, herm, mmse_sinr

__all__ = ["OverheadLedger", "overhead_ledger", "SimMetrics", "run_drop", "DropSimulator",
           "default_beam_elevations", "METRIC_FIELDS"]

_CRS_OUTSIDE_CONTROL = {1: 6, 2: 12, 4: 16}
_MAX_HARQ_PROCESSES = 8
_LT_ELEVATIONS = np.arange(-45.0, 10.01, 1.0)
_LT_AZIMUTHS = np.arange(-60.0, 60.01, 5.0)


@dataclass(frozen=True)
class OverheadLedger:
    """Resource elements per RB per subframe taken by each overhead item."""

    control: float
    crs: float
    dmrs: float
    csi_rs: float
    total: int = RES_PER_RB

    @property
    def data(self) -> float:
        return self.total - self.control - self.crs - self.dmrs - self.csi_rs

    def fractions(self) -> dict:
        f = {k: getattr(self, k) / self.total for k in ("control", "crs", "dmrs", "csi_rs")}
        f["data"] = self.data / self.total
        return f


def csi_rs_ports(cfg) -> float:
    """CSI-RS REs per RB sent in one report period."""
    fb = cfg.feedback
    if fb.feedback_class in ("A", "ideal"):
        ports = float(cfg.txru.L)
    else:
        ports = 2.0 * fb.N_B
    if fb.feedback_class == "B2":
        ports += cfg.array.n_elements * fb.report_period_ms / fb.long_term_period_ms
    return ports


def overhead_ledger(cfg) -> OverheadLedger:
    """Control symbols, CRS outside the control region, DM-RS and averaged CSI-RS.

    CSI-RS is capped at ``csi_rs_max_re`` REs per RB every report period.
    """
    sp = cfg.sim
    if sp.crs_ports not in _CRS_OUTSIDE_CONTROL:
        raise ValueError("crs_ports must be 1, 2 or 4")
    csi = min(csi_rs_ports(cfg), sp.csi_rs_max_re) / cfg.feedback.report_period_ms
    return OverheadLedger(12.0 * sp.control_symbols, float(_CRS_OUTSIDE_CONTROL[sp.crs_ports]),
                          float(sp.dmrs_re), csi)


def default_beam_elevations(n_b: int, low: float = -30.0, high: float = 0.0) -> np.ndarray:
    """Centres of ``n_b`` equal slices of the elevation range below the horizon."""
    step = (high - low) / n_b
    return low + step * (np.arange(n_b) + 0.5)


METRIC_FIELDS = ["seed", "cell_avg_se", "edge_se", "mean_user_tput_mbps", "edge_user_tput_mbps",
                 "utilization", "mu_fraction", "mean_rank", "harq_drop_rate", "packets_completed"]


@dataclass(frozen=True, eq=False)
class SimMetrics:
    """Drop-level results.

    Spectral efficiencies are in b/s/Hz (per cell for the average, per UE
    for the edge).  User throughput is delivered bits over the time the UE
    had data waiting; under full buffer that is the whole drop.
    """

    seed: int
    cell_avg_se: float
    edge_se: float
    mean_user_tput_mbps: float
    edge_user_tput_mbps: float
    utilization: float
    mu_fraction: float
    mean_rank: float
    harq_drop_rate: float
    packets_completed: int
    ue_throughput_bps: np.ndarray = field(repr=False)
    packet_throughput_bps: np.ndarray = field(repr=False)
    traces: dict = field(default_factory=dict, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_FIELDS}


def _quantize(sinr, cap):
    eff = np.minimum(np.log2(1.0 + np.maximum(sinr, 0.0)), cap)
    return cqi_efficiency(cqi_index(eff, cap), cap)


def _shannon(sinr, cap):
    return np.minimum(np.log2(1.0 + np.maximum(sinr, 0.0)), cap)


@dataclass
class _Report:
    rank: np.ndarray  # (U,)
    cdi: np.ndarray  # (U, S, L, 2) basis coordinates, unit element-domain columns
    eff: np.ndarray  # (U, S, 2) per-layer efficiency the eNB believes
    gamma: np.ndarray  # (U, S, 2) matching linear SINR
    index: np.ndarray  # (U, S)


class DropSimulator:
    """State of one drop.  Use :func:`run_drop` unless stepping manually."""

    def __init__(self, cfg, seed: int, ues: UeDrop | None = None):
        self.cfg, self.seed = cfg, int(seed)
        sp, fb, sc = cfg.sim, cfg.feedback, cfg.scenario
        self.layout = build_layout(sc, sp.n_sites, sp.wraparound)
        self.ues = ues if ues is not None else drop_ues(self.layout, sc, sp.ues_per_cell, seed)
        self.geometry = build_array(cfg.geometry_config)
        self.n_cells = self.layout.n_cells
        self.n_ues = self.ues.n_ues
        self._draw_links()
        self._associate()
        self.rb = np.array([len(x) for x in np.array_split(np.arange(sp.n_rb), sp.n_subbands)])
        self.ledger = overhead_ledger(cfg)
        self.n_re = self.rb * self.ledger.data
        self.cap = sp.se_cap
        self.ideal = fb.feedback_class == "ideal"
        if self.ideal and cfg.txru.kind != "partitioned":
            raise ValueError("ideal feedback is defined on the partitioned architecture")
        self._build_bases()
        self._project()

    # ------------------------------------------------------------------ setup
    def _draw_links(self):
        cfg, sp, sc = self.cfg, self.cfg.sim, self.cfg.scenario
        d2d, az = self.layout.link_geometry(self.ues.xy)
        U, C = self.n_ues, self.n_cells
        P = cfg.array.polarization
        self.links = [[None] * C for _ in range(U)]
        site = self.layout.cell_site
        for u in range(U):
            # LOS state and shadowing are properties of the site-UE path
            shared = {}
            for s in range(self.layout.n_sites):
                r = stream(self.seed, "large-scale", s, u)
                shared[s] = (r.random(), r.standard_normal())
            for c in range(C):
                rng = stream(self.seed, "link", c, u)
                self.links[u][c] = draw_link(sc, rng, d2d[u, c], self.ues.height[u], az[u, c],
                                             sp.n_subbands, sp.n_rx, P, indoor=bool(self.ues.indoor[u]),
                                             large_scale=shared[site[c]])
        self.snr_scale = 10.0 ** ((sc.tx_power_dbm - sc.noise_power_dbm) / 10.0)
        el_los = np.degrees(np.arctan2(self.ues.height[:, None] - sc.bs_height, np.maximum(d2d, 1e-3)))
        elem = self.cfg.element.gain_db(az, el_los)
        gain = np.array([[lk.gain for lk in row] for row in self.links])
        self.coupling_db = 10.0 * np.log10(gain) + elem

    def _associate(self):
        """Serving cell = strongest wideband coupling (pathloss, shadowing, element gain)."""
        self.serv = np.argmax(self.coupling_db, axis=1)
        counts = np.bincount(self.serv, minlength=self.n_cells)
        self.uc = max(int(counts.max()), 1)
        slots = np.full((self.n_cells, self.uc), -1)
        for c in range(self.n_cells):
            members = np.flatnonzero(self.serv == c)
            slots[c, :len(members)] = members
        self.slots = slots
        self.slot_of = np.zeros(self.n_ues, dtype=int)
        for c in range(self.n_cells):
            for j, u in enumerate(slots[c]):
                if u >= 0:
                    self.slot_of[u] = j

    def _serving_elements(self, u):
        """Element-domain serving channel ``(S, R, N_T)``, noise-normalized."""
        lp = self.links[u][self.serv[u]]
        steer = cluster_steering(self.geometry, lp.az_deg, lp.el_deg)
        pol_of = np.arange(self.geometry.n_elements) // (self.cfg.array.m_vertical * self.cfg.array.n_horizontal)
        h = np.einsum("skre,ke->sre", lp.alpha[..., pol_of], steer)
        return np.sqrt(lp.gain * self.snr_scale) * h

    def _beam_block(self, directions):
        """Dual-pol beam basis: ``n_b`` beams on pol 0 followed by the same on pol 1."""
        n_b = len(directions)
        arch = build_connected(self.geometry, 2 * n_b, n_b, list(directions) * 2)
        return arch.w_t / np.linalg.norm(arch.w_t, axis=0, keepdims=True)

    def _build_bases(self):
        cfg, fb, t = self.cfg, self.cfg.feedback, self.cfg.txru
        a = cfg.array
        self.lt = None
        if fb.feedback_class in ("A", "ideal"):
            w = None
            if t.tilt_deg is not None:
                rows_per = a.m_vertical // t.NV
                cols_per = a.n_horizontal // (t.NH // a.polarization)
                w = np.kron(tilt_weight(rows_per, a.dv, t.tilt_deg), np.ones(cols_per))
            arch = build_partitioned(self.geometry, TxruGrid(t.NV, t.NH), w)
            base = arch.w_t / np.linalg.norm(arch.w_t, axis=0, keepdims=True)
            self.bases = [base] * self.n_cells
        else:
            els = fb.beam_elevations_deg or tuple(default_beam_elevations(fb.N_B))
            fallback = self._beam_block([(0.0, e) for e in els])
            self.fallback_elevations = np.array(els, dtype=float)
            if fb.feedback_class == "B":
                self.bases = [fallback] * self.n_cells
            else:
                self._long_term()
                bases = []
                for c in range(self.n_cells):
                    blocks = [fallback]
                    for u in self.slots[c]:
                        if u >= 0:
                            blocks.append(self._beam_block(self._recentred(u)))
                    bases.append(np.concatenate(blocks, axis=1))
                self.bases = bases
        self.n_basis = np.array([b.shape[1] for b in self.bases])
        self.l_max = int(self.n_basis.max())
        self.gram = np.zeros((self.n_cells, self.l_max, self.l_max), dtype=complex)
        for c, b in enumerate(self.bases):
            self.gram[c, :b.shape[1], :b.shape[1]] = b.conj().T @ b

    def _long_term(self):
        """Wideband PMI of every UE from a noisy non-precoded measurement."""
        a, fb = self.cfg.array, self.cfg.feedback
        mn = a.m_vertical * a.n_horizontal
        self.lt = []
        for u in range(self.n_ues):
            h = self._serving_elements(u)
            if not self.cfg.sim.ideal_channel_estimation:
                # every element port gets P / N_T, averaged over all RBs
                var = a.n_elements / self.cfg.sim.n_rb
                rng = stream(self.seed, "lt-csi", u)
                h = h + np.sqrt(var / 2.0) * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))
            rows = np.concatenate([h[..., p * mn:(p + 1) * mn] for p in range(a.polarization)], axis=0)
            self.lt.append(long_term_pmi(rows, a.m_vertical, a.n_horizontal, a.dv, a.dh,
                                         _LT_ELEVATIONS, _LT_AZIMUTHS))

    def _recentred(self, u):
        fb = self.cfg.feedback
        lt = self.lt[u]
        step = fb.beam_span_deg / fb.N_B
        els = lt.elevation_deg + (np.arange(fb.N_B) - (fb.N_B - 1) / 2.0) * step
        return [(lt.azimuth_deg, float(e)) for e in els]

    def _project(self):
        """``G[s, c, u] = H_{u,c,s} T_c``, zero-padded to the largest basis."""
        cfg, sp = self.cfg, self.cfg.sim
        U, C, S, R = self.n_ues, self.n_cells, sp.n_subbands, sp.n_rx
        P = cfg.array.polarization
        mn = cfg.array.m_vertical * cfg.array.n_horizontal
        self.G = np.zeros((S, C, U, R, self.l_max), dtype=complex)
        for c in range(C):
            base = self.bases[c]
            lc = base.shape[1]
            az = np.array([self.links[u][c].az_deg for u in range(U)])
            el = np.array([self.links[u][c].el_deg for u in range(U)])
            steer = cluster_steering(self.geometry, az, el)  # (U, K, N_T)
            proj = np.stack([steer[..., p * mn:(p + 1) * mn] @ base[p * mn:(p + 1) * mn] for p in range(P)],
                            axis=2)  # (U, K, P, L)
            alpha = np.stack([self.links[u][c].alpha for u in range(U)])  # (U, S, K, R, P)
            gain = np.array([self.links[u][c].gain for u in range(U)])
            g = np.einsum("uskrp,ukpl->usrl", alpha, proj)
            g = np.sqrt(gain * self.snr_scale)[:, None, None, None] * g
            self.G[:, c, :, :, :lc] = np.moveaxis(g, 1, 0)
        self.G_serv = np.moveaxis(self.G[:, self.serv, np.arange(U)], 0, 1)  # (U, S, R, L)
        power = np.sum(np.abs(self.G) ** 2, axis=(3, 4)) / (self.n_basis[None, :, None] * R)  # (S, C, U)
        power = np.moveaxis(power, 2, 0)  # (U, S, C)
        if sp.single_cell:
            self.i_est = np.zeros((U, S))
        else:
            self.i_est = power.sum(axis=2) - power[np.arange(U), :, self.serv]
        self._candidates()

    def _candidates(self):
        """Rank-1 and rank-2 candidate precoders in basis coordinates."""
        fb, t = self.cfg.feedback, self.cfg.txru
        L = self.l_max
        if fb.feedback_class == "ideal":
            self.cand1 = self.cand2 = None
            return
        co = {1: CO_PHASES[:1], 2: CO_PHASES[::2], 4: CO_PHASES}[fb.co_phases]
        if fb.feedback_class == "A":
            n_hp = t.NH // self.cfg.array.polarization
            vb = build_dft_codebook(t.NV, fb.v_oversampling).codewords
            hb = build_dft_codebook(n_hp, fb.h_oversampling).codewords
            if fb.v_beams > len(vb) or fb.h_beams > len(hb):
                raise ValueError("more codebook beams requested than the DFT grid provides")
            vb, hb = vb[:fb.v_beams], hb[:fb.h_beams]
            c1, c2 = [], []
            for v in vb:
                for b in hb:
                    for c in co:
                        x = np.kron(v, np.concatenate([b, c * b])) / np.sqrt(2.0)
                        y = np.kron(v, np.concatenate([b, -c * b])) / np.sqrt(2.0)
                        c1.append(x)
                        c2.append(np.stack([x, y], axis=1))
            self.cand1 = np.array(c1)[None]  # (1, n, L)
            self.cand2 = np.array(c2)[None]  # (1, n, L, 2)
            self.index_bits = int(np.ceil(np.log2(len(c1)))) if len(c1) > 1 else 0
            return
        n_b = fb.N_B

        def block(offset):
            c1 = np.zeros((n_b, L), dtype=complex)
            c2 = np.zeros((n_b, L, 2), dtype=complex)
            for j in range(n_b):
                c1[j, offset + j] = c1[j, offset + n_b + j] = 1 / np.sqrt(2.0)
                c2[j, offset + j, :] = 1 / np.sqrt(2.0)
                c2[j, offset + n_b + j, 0] = 1 / np.sqrt(2.0)
                c2[j, offset + n_b + j, 1] = -1 / np.sqrt(2.0)
            return c1, c2

        self.index_bits = int(np.ceil(np.log2(n_b))) if n_b > 1 else 0
        f1, f2 = block(0)
        self.cand1, self.cand2 = f1[None], f2[None]
        if fb.feedback_class == "B2":
            own1 = np.zeros((self.n_ues, n_b, L), dtype=complex)
            own2 = np.zeros((self.n_ues, n_b, L, 2), dtype=complex)
            for u in range(self.n_ues):
                own1[u], own2[u] = block(2 * n_b * (1 + self.slot_of[u]))
            self.own1, self.own2 = own1, own2

    # ------------------------------------------------------------ CSI reports
    def measure(self, t_m: int) -> _Report:
        """CSI reports of every UE from the CSI-RS of subframe ``t_m``."""
        cfg, sp, fb = self.cfg, self.cfg.sim, self.cfg.feedback
        U, S, R = self.n_ues, sp.n_subbands, sp.n_rx
        L = self.l_max
        g = self.G_serv
        noise = 1.0 + self.i_est  # (U, S)
        eye = np.eye(R)
        allow2 = R >= 2 and fb.max_rank >= 2
        if self.ideal:
            _, s_val, vh = np.linalg.svd(g, full_matrices=True)
            v = herm(vh)[..., :2]  # (U, S, L, 2)
            if v.shape[-1] < 2:
                v = np.concatenate([v, np.zeros_like(v)], axis=-1)
            w1, w2 = v[..., :1], v
            idx = np.zeros((U, S), dtype=int)
            rate = _shannon
        else:
            if not sp.ideal_channel_estimation:
                n_ports = float(csi_rs_ports(cfg)) if fb.feedback_class != "B2" else 2.0 * fb.N_B
                var = noise * n_ports / self.rb[None, :]
                rng = stream(self.seed, "csi", t_m)
                e = rng.standard_normal((U, S, R, L, 2))
                # LMMSE estimate against the UE's long-term per-port channel power
                prior = np.sum(np.abs(g) ** 2, axis=(1, 2, 3)) / (S * R * self.n_basis[self.serv])
                beta = prior[:, None] / (prior[:, None] + var)
                g = beta[:, :, None, None] * (g + np.sqrt(var / 2.0)[:, :, None, None] * (e[..., 0] + 1j * e[..., 1]))
                noise = noise + beta * var
            c1, c2 = self.cand1, self.cand2
            if fb.feedback_class == "B2":
                use_own = t_m >= fb.delay_ms  # long-term report from subframe 0 is in force
                if use_own:
                    c1, c2 = self.own1, self.own2
            m1 = np.sum(np.abs(np.einsum("usrl,unl->usnr", g, c1)) ** 2, axis=-1)
            i1 = np.argmax(m1, axis=-1)
            w1 = np.take_along_axis(np.broadcast_to(c1[:, None], (U, S) + c1.shape[1:]),
                                    i1[:, :, None, None], axis=2)[:, :, 0, :, None]
            m2 = np.sum(np.abs(np.einsum("usrl,unlk->usnrk", g, c2)) ** 2, axis=(-1, -2))
            i2 = np.argmax(m2, axis=-1)
            w2 = np.take_along_axis(np.broadcast_to(c2[:, None], (U, S) + c2.shape[1:]),
                                    i2[:, :, None, None, None], axis=2)[:, :, 0]
            idx = i1
            rate = _quantize
        a1 = g @ w1
        r1 = noise[..., None, None] * eye + a1 @ herm(a1)
        e1 = rate(mmse_sinr(a1, r1), self.cap)  # (U, S, 1)
        if allow2:
            a2 = (g @ w2) / np.sqrt(2.0)
            r2 = noise[..., None, None] * eye + a2 @ herm(a2)
            e2 = rate(mmse_sinr(a2, r2), self.cap)
            rank = np.where(e2.sum(axis=(1, 2)) > e1.sum(axis=(1, 2)), 2, 1)
        else:
            e2 = np.zeros((U, S, 2))
            rank = np.ones(U, dtype=int)
        two = rank == 2
        cdi = np.where(two[:, None, None, None], w2, np.concatenate([w1, np.zeros_like(w1)], axis=-1))
        eff = np.where(two[:, None, None], e2, np.concatenate([e1, np.zeros_like(e1)], axis=-1))
        if not self.ideal:
            idx = np.where(two[:, None], i2, i1)
        gamma = 2.0 ** eff - 1.0
        return _Report(rank, cdi, eff, gamma, idx)

    def _rows(self, rep: _Report, ues, sbs):
        """Channel rows ``(n, 2, L)`` the eNB uses for precoding/link adaptation."""
        if self.ideal:
            g = self.G_serv[ues, sbs] / np.sqrt(1.0 + self.i_est[ues, sbs])[:, None, None]
            if g.shape[1] < 2:
                g = np.concatenate([g, np.zeros_like(g)], axis=1)
            return g
        cdi = rep.cdi[ues, sbs]  # (n, L, 2)
        amp = np.sqrt(rep.gamma[ues, sbs] * rep.rank[ues][:, None])  # (n, 2)
        gram = self.gram[self.serv[ues]]
        return amp[:, :, None] * (herm(cdi) @ gram)

    # ------------------------------------------------------------ main loop
    def run(self) -> SimMetrics:
        cfg, sp, fb, tr = self.cfg, self.cfg.sim, self.cfg.feedback, self.cfg.traffic
        U, C, S, R = self.n_ues, self.n_cells, sp.n_subbands, sp.n_rx
        T = sp.n_subframes
        L = self.l_max
        full = tr.kind == "full_buffer"
        cap = self.cap
        lin_rate = _shannon if self.ideal else _quantize
        record = sp.record_traces

        # reports: (measured, applied) instants
        if self.ideal:
            schedule = [(0, 0)]
        else:
            schedule = [(t, t + fb.delay_ms) for t in range(0, T, fb.report_period_ms)]
        next_rep = 0
        rep = None

        # traffic
        arrivals = [[] for _ in range(T)]
        if not full:
            rate_ms = tr.arrival_rate / 1000.0
            for c in range(C):
                members = self.slots[c][self.slots[c] >= 0]
                if len(members) == 0:
                    continue
                rng = stream(self.seed, "traffic", c)
                t_arr = 0.0
                while True:
                    t_arr += rng.exponential(1.0 / rate_ms)
                    if t_arr >= T:
                        break
                    arrivals[int(t_arr)].append(int(members[rng.integers(len(members))]))
        pkt_bits = 8.0 * tr.packet_bytes
        backlog = np.full(U, np.inf) if full else np.zeros(U)  # bits not yet in a transport block
        pending = [[] for _ in range(U)]  # FTP packets: [arrival, remaining bits]
        busy = np.zeros(U)
        delivered = np.zeros(U)
        pkt_tput = []
        harq = [[] for _ in range(U)]  # processes: [bits, accumulated, transmissions, ready]
        pf = SchedulingState(U, window=sp.pf_window)
        n_tb = n_drop = 0
        used_slots = mu_slots = 0
        rank_sum = rank_n = 0
        traces = {"ledger": [], "bits": [], "scheduler": [], "feedback": []} if record else {}
        ue_ok = np.zeros(U + 1, dtype=bool)

        for t in range(T):
            for u in arrivals[t]:
                backlog[u] += pkt_bits
                pending[u].append([t, pkt_bits])
            while next_rep < len(schedule) and schedule[next_rep][1] <= t:
                rep = self.measure(schedule[next_rep][0])
                rho2 = self._pair_overlap(rep)
                if record:
                    for u in range(U):
                        traces["feedback"].append((schedule[next_rep][0], int(self.serv[u]), u,
                                                   int(rep.rank[u]), int(rep.index[u, 0]),
                                                   float(rep.eff[u, 0, 0])))
                next_rep += 1
            if not full:
                busy += np.array([len(p) > 0 for p in pending])
            if rep is None:
                continue
            ready = np.array([any(h[3] <= t for h in harq[u]) for u in range(U)])
            room = np.array([len(harq[u]) < _MAX_HARQ_PROCESSES for u in range(U)])
            eligible = ready | ((backlog > 0) & room)
            ue_ok[:U] = eligible

            # --- PF scheduling, vectorized over cells
            rate_su = np.sum(rep.eff, axis=2) * self.n_re[None, :]  # (U, S)
            avg = pf.avg
            slots = self.slots
            valid = slots >= 0
            sl = np.where(valid, slots, U)
            avg_x = np.append(avg, 1.0)
            rate_x = np.concatenate([rate_su, np.zeros((1, S))])
            ok = ue_ok[sl] & valid  # (C, Uc)
            m1 = np.where(ok[:, :, None], rate_x[sl] / avg_x[sl][:, :, None], -np.inf)  # (C, Uc, S)
            j1 = np.argmax(m1, axis=1)  # (C, S)
            best1 = np.take_along_axis(m1, j1[:, None, :], axis=1)[:, 0]
            active = best1 > 0
            u1 = np.take_along_axis(sl, j1, axis=1)  # (C, S)
            j2 = np.full((C, S), -1)
            if sp.max_ues_per_group >= 2 and self.uc > 1:
                gam_x = np.concatenate([rep.gamma, np.zeros((1, S, 2))])
                rk_x = np.append(rep.rank, 1)
                g_all = np.moveaxis(gam_x[sl], 1, 2)  # (C, S, Uc, 2)
                r_all = np.broadcast_to(rk_x[sl][:, None, :], (C, S, self.uc))
                g1 = gam_x[u1, np.arange(S)[None, :]]  # (C, S, 2)
                r1 = rk_x[u1][:, :, None]  # (C, S, 1)
                ov = np.take_along_axis(rho2, j1[:, :, None, None], axis=2)[:, :, 0]  # (C, S, Uc)
                keep = np.clip(1.0 - ov, 0.0, 1.0)
                share1 = r1 / (r1 + r_all)
                share2 = r_all / (r1 + r_all)
                e1 = _quantize(g1[:, :, None, :] * (share1 * keep)[..., None], cap).sum(-1)
                e2 = _quantize(g_all * (share2 * keep)[..., None], cap).sum(-1)
                nre = self.n_re[None, :, None]
                pm = e1 * nre / avg_x[u1][:, :, None] + e2 * nre / np.moveaxis(avg_x[sl][:, :, None], 1, 2)
                cand_ok = np.moveaxis(ok[:, :, None], 1, 2) & (np.arange(self.uc)[None, None, :] != j1[:, :, None])
                cand_ok &= (r1 + r_all) <= sp.max_layers
                pm = np.where(cand_ok, pm, -np.inf)
                jb = np.argmax(pm, axis=2)
                pbest = np.take_along_axis(pm, jb[:, :, None], axis=2)[:, :, 0]
                pair = active & (pbest > best1)
                j2 = np.where(pair, jb, -1)
            u2 = np.where(j2 >= 0, np.take_along_axis(sl, np.maximum(j2, 0), axis=1), -1)

            cs_c, cs_s = np.nonzero(active)
            if len(cs_c) == 0:
                pf.update(np.zeros(U))
                continue
            used_slots += len(cs_c)
            W = np.zeros((C, S, L, 4), dtype=complex)
            owner = np.full((C, S, 4), -1)
            pu1, pu2 = u1[cs_c, cs_s], u2[cs_c, cs_s]
            is_mu = pu2 >= 0
            mu_slots += int(is_mu.sum())
            rk1 = rep.rank[pu1]
            # single-user groups: report CDI
            su = ~is_mu
            if np.any(su):
                c_, s_, uu = cs_c[su], cs_s[su], pu1[su]
                w = rep.cdi[uu, s_]
                r = rep.rank[uu]
                w = w * (np.arange(2)[None, None, :] < r[:, None, None]) / np.sqrt(r)[:, None, None]
                W[c_, s_, :, :2] = w
                owner[c_, s_, 0] = uu
                owner[c_, s_, 1] = np.where(r == 2, uu, -1)
            if np.any(is_mu):
                c_, s_, ua, ub = cs_c[is_mu], cs_s[is_mu], pu1[is_mu], pu2[is_mu]
                wa, wb = self._slnr_pairs(rep, c_, s_, ua, ub)
                ra, rb = rep.rank[ua], rep.rank[ub]
                nl = (ra + rb)[:, None, None]
                wa = wa / np.sqrt(nl)
                wb = wb / np.sqrt(nl)
                two = (ra == 2)[:, None, None]
                cols = np.where(two, np.concatenate([wa, wb], axis=2),
                                np.concatenate([wa[:, :, :1], wb, np.zeros_like(wa[:, :, :1])], axis=2))
                cols = cols * (np.arange(4)[None, None, :] < (ra + rb)[:, None, None])
                W[c_, s_] = cols
                own = np.where(two[:, :, 0], np.stack([ua, ua, ub, ub], axis=1),
                               np.stack([ua, ub, ub, np.full_like(ua, -1)], axis=1))
                owner[c_, s_] = np.where(np.arange(4)[None, :] < (ra + rb)[:, None], own, -1)

            # --- per (UE, subband) receptions
            rx_u = np.concatenate([pu1, pu2[is_mu]])
            rx_s = np.concatenate([cs_s, cs_s[is_mu]])
            rx_c = np.concatenate([cs_c, cs_c[is_mu]])
            lay = owner[rx_c, rx_s]  # (n, 4)
            mine = lay == rx_u[:, None]
            order = np.argsort(~mine, axis=1, kind="stable")[:, :2]
            own_mask = np.take_along_axis(mine, order, axis=1)  # (n, 2)
            # link adaptation from the eNB's channel knowledge
            rows = self._rows(rep, rx_u, rx_s)  # (n, 2, L)
            y_hat = rows @ W[rx_c, rx_s]  # (n, 2, 4)
            r_hat = np.eye(2) + y_hat @ herm(y_hat)
            a_hat = np.take_along_axis(y_hat, order[:, None, :], axis=2)
            pred = mmse_sinr(a_hat, r_hat)
            mcs = np.where(own_mask, lin_rate(pred, cap), 0.0)  # (n, 2)
            # actual reception
            y = np.empty((len(rx_u), C, R, 4), dtype=complex)
            for s_ in np.unique(rx_s):
                pick = np.flatnonzero(rx_s == s_)
                g = self.G[s_][:, rx_u[pick]].reshape(C, -1, L)  # (C, n R, L)
                y[pick] = np.moveaxis((g @ W[:, s_]).reshape(C, len(pick), R, 4), 0, 1)
            if sp.single_cell:
                y = y * (np.arange(C)[None, :] == rx_c[:, None])[:, :, None, None]
            yf = np.moveaxis(y, 1, 2).reshape(len(rx_u), R, C * 4)
            r_tot = np.eye(R) + yf @ herm(yf)
            a = np.take_along_axis(y[np.arange(len(rx_u)), rx_c], order[:, None, :], axis=2)  # (n, R, 2)
            a = a * own_mask[:, None, :]
            if sp.ideal_channel_estimation:
                sinr = mmse_sinr(a, r_tot)
            else:
                inpn = (np.real(np.trace(r_tot, axis1=1, axis2=2)) - np.sum(np.abs(a) ** 2, axis=(1, 2))) / R
                var = inpn / (sp.dmrs_re * self.rb[rx_s])
                rng = stream(self.seed, "dmrs", t)
                e = rng.standard_normal((len(rx_u), R, 2, 2))
                a_est = a + np.sqrt(var / 2.0)[:, None, None] * (e[..., 0] + 1j * e[..., 1]) * own_mask[:, None, :]
                sinr = mmse_sinr(a, r_tot, a_est)
            sinr = np.where(own_mask, sinr, 0.0)
            cap_bits = np.sum(_shannon(sinr, cap), axis=1) * self.n_re[rx_s]
            tb_bits = np.sum(mcs, axis=1) * self.n_re[rx_s]
            if record:
                own_pw = np.sum(np.abs(a) ** 2, axis=(1, 2))
                serv_pw = np.sum(np.abs(y[np.arange(len(rx_u)), rx_c]) ** 2, axis=(1, 2))
                tot_pw = np.sum(np.abs(y) ** 2, axis=(1, 2, 3))
                trace = np.real(np.trace(r_tot, axis1=1, axis2=2))
                for i in range(len(rx_u)):
                    traces["ledger"].append((t, int(rx_u[i]), int(rx_s[i]), trace[i], own_pw[i],
                                             serv_pw[i] - own_pw[i], tot_pw[i] - serv_pw[i], float(R)))
                for k in range(len(cs_c)):
                    m = (int(pu1[k]),) if pu2[k] < 0 else (int(pu1[k]), int(pu2[k]))
                    rk = tuple(int(rep.rank[x]) for x in m)
                    traces["scheduler"].append((t, int(cs_c[k]), int(cs_s[k]), m, rk))
            rank_sum += int(np.sum(own_mask))
            rank_n += len(rx_u)

            # --- HARQ per UE
            cap_ue = np.bincount(rx_u, weights=cap_bits, minlength=U)
            tb_ue = np.bincount(rx_u, weights=tb_bits, minlength=U)
            served = np.zeros(U)
            got = np.zeros(U)
            for u in np.unique(rx_u):
                procs = harq[u]
                ready_p = [h for h in procs if h[3] <= t]
                if ready_p:
                    h = min(ready_p, key=lambda x: x[3])
                else:
                    bits = min(tb_ue[u], backlog[u])
                    if bits <= 0:
                        continue
                    backlog[u] -= bits
                    h = [bits, 0.0, 0, t]
                    procs.append(h)
                    n_tb += 1
                h[1] += cap_ue[u]
                h[2] += 1
                served[u] += h[0]
                if h[1] >= h[0] * (1 - 1e-12):
                    procs.remove(h)
                    got[u] += h[0]
                elif h[2] > sp.harq_max_retx:
                    procs.remove(h)
                    n_drop += 1
                    if not full:
                        backlog[u] += h[0]
                else:
                    h[3] = t + sp.harq_delay_ms
            pf.update(served)
            delivered += got
            if record:
                traces["bits"].append((t, got.sum()))
            if not full:
                for u in np.flatnonzero(got):
                    left = got[u]
                    q = pending[u]
                    while q and left > 0:
                        take = min(left, q[0][1])
                        q[0][1] -= take
                        left -= take
                        if q[0][1] <= 1e-6:
                            arr = q.pop(0)[0]
                            pkt_tput.append(pkt_bits / ((t + 1 - arr) * 1e-3))

        bw = cfg.scenario.bandwidth_hz
        dur = T * 1e-3
        if full:
            busy = np.full(U, float(T))
        with np.errstate(invalid="ignore", divide="ignore"):
            ue_tput = np.where(busy > 0, delivered / (busy * 1e-3), np.nan)
        have = ue_tput[~np.isnan(ue_tput)]
        cells_with_ues = max(int(np.sum(np.any(self.slots >= 0, axis=1))), 1)
        cell_se = delivered.sum() / (dur * bw * cells_with_ues)
        ue_se = have / bw
        return SimMetrics(
            seed=self.seed,
            cell_avg_se=float(cell_se),
            edge_se=float(np.percentile(ue_se, 5)) if len(have) else 0.0,
            mean_user_tput_mbps=float(have.mean() / 1e6) if len(have) else 0.0,
            edge_user_tput_mbps=float(np.percentile(have, 5) / 1e6) if len(have) else 0.0,
            utilization=used_slots / (cells_with_ues * S * T),
            mu_fraction=mu_slots / max(used_slots, 1),
            mean_rank=rank_sum / max(rank_n, 1),
            harq_drop_rate=n_drop / max(n_tb, 1),
            packets_completed=len(pkt_tput),
            ue_throughput_bps=ue_tput,
            packet_throughput_bps=np.array(pkt_tput),
            traces=traces,
        )

    def _pair_overlap(self, rep: _Report):
        """``rho2[c, s, i, j]``: squared subspace overlap of the CDIs of slots i and j."""
        sl = np.where(self.slots >= 0, self.slots, 0)
        C, uc = sl.shape
        cdi = np.moveaxis(rep.cdi[sl], 2, 1)  # (C, S, Uc, L, 2)
        S, L = cdi.shape[1], cdi.shape[3]
        q = np.moveaxis(cdi, 3, 2).reshape(C, S, L, uc * 2)  # columns ordered (slot, layer)
        gq = (self.gram @ q.transpose(0, 2, 1, 3).reshape(C, L, -1)).reshape(C, L, S, -1).transpose(0, 2, 1, 3)
        cross = np.abs(herm(q) @ gq) ** 2  # (C, S, Uc*2, Uc*2)
        cross = cross.reshape(C, S, uc, 2, uc, 2).sum(axis=(3, 5))
        rk = rep.rank[sl]
        denom = np.minimum(rk[:, :, None], rk[:, None, :])[:, None]
        return cross / denom

    def _slnr_pairs(self, rep, cells, sbs, ua, ub):
        """SLNR precoders for two-UE groups, solved in the span of the members' channels."""
        ra, rb = self._rows(rep, ua, sbs), self._rows(rep, ub, sbs)  # (n, 2, L)
        gram = self.gram[cells]
        if self.ideal:
            span = np.concatenate([herm(ra), herm(rb)], axis=2)  # (n, L, 4)
        else:
            span = np.concatenate([rep.cdi[ua, sbs], rep.cdi[ub, sbs]], axis=2)
        ge = herm(span) @ gram @ span  # (n, 4, 4)
        # rows act on basis coordinates (the Gram factor is already inside the CDI rows)
        ya, yb = ra @ span, rb @ span
        aa, ab = herm(ya) @ ya, herm(yb) @ yb
        ridge = 1e-9 * (np.real(np.trace(ge, axis1=1, axis2=2)) + np.real(np.trace(aa + ab, axis1=1, axis2=2)))
        eye = ridge[:, None, None] * np.eye(4)
        xa = generalized_top(aa, ge + ab + eye, 2)
        xb = generalized_top(ab, ge + aa + eye, 2)
        out = []
        for x in (xa, xb):
            w = span @ x  # (n, L, 2)
            nrm = np.sqrt(np.real(np.einsum("nlk,nlm,nmk->nk", w.conj(), gram, w)))
            out.append(w / np.maximum(nrm, 1e-300)[:, None, :])
        return out


def run_drop(config, seed: int, ues: UeDrop | None = None) -> SimMetrics:
    """Simulate one drop of ``config`` and return its metrics.

    Parameters
    ----------
    config : SimConfig, dict or str
        A dict or JSON path is validated with ``load_config`` first.
    seed : int
        Drop seed; every random stream is derived from it.
    ues : UeDrop, optional
        Explicit UE placement, e.g. a single UE for link-level checks.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if not isinstance(config, SimConfig):
        config = load_config(config)
    return DropSimulator(config, seed, ues).run()
