"""CSI acquisition: codebooks, PMI / beam selection, CQI and overhead accounting.

Channel *directions* passed to the selection functions are column vectors
``h_bar`` (the conjugate of the physical channel row), so the selection
metric is ``|h_bar^H w|^2`` and a codeword selects itself.  Matrices with
one column per receive antenna are accepted as well; their metric is the
Frobenius norm ``||H_bar^H w||^2``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .array import direction_cosines, steering_vector

__all__ = [
    "Codebook", "BeamSet", "FeedbackReport", "PilotBudget", "CqiReport",
    "CO_PHASES", "build_dft_codebook", "dual_pol_codebook", "kronecker_codebook",
    "steering_codebook", "select_pmi", "select_beam", "select_co_phase",
    "compute_cqi", "cqi_index", "cqi_efficiency", "cqi_table", "feedback_bits",
    "pilot_overhead_fraction", "pilot_budget", "vertical_beam_set",
    "LongTermReport", "long_term_pmi", "adaptive_feedback_step", "make_report",
    "write_feedback_csv",
]

CO_PHASES = np.array([1.0, 1j, -1.0, -1j])
CQI_LEVELS = 16
# b/s/Hz of CQI 0-14 (LTE 4-bit table, QPSK to 64QAM)
LTE_CQI_EFFICIENCY = np.array([0.0, 0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
                               2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152])
DEFAULT_SE_CAP = 6.0
CRS_RES_PER_RB = 16
RES_PER_RB = 168


@dataclass(frozen=True, eq=False)
class Codebook:
    """Set of unit-norm precoders, one per row of ``codewords``."""

    codewords: np.ndarray  # (count, N_P)
    structure: str = "flat"
    shape: tuple | None = None  # (|V|, |H|) for Kronecker codebooks

    def __post_init__(self):
        cw = np.atleast_2d(np.asarray(self.codewords, dtype=complex))
        if cw.shape[0] == 0:
            raise ValueError("empty codebook")
        norms = np.linalg.norm(cw, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("codewords must be unit-norm")
        object.__setattr__(self, "codewords", cw)

    def __len__(self):
        return self.codewords.shape[0]

    @property
    def n_ports(self) -> int:
        return self.codewords.shape[1]

    @property
    def bits(self) -> int:
        return math.ceil(math.log2(len(self))) if len(self) > 1 else 0

    def split_index(self, i: int) -> tuple[int, int]:
        """``(vertical, horizontal)`` component indices of a Kronecker codeword."""
        if self.shape is None:
            raise ValueError("not a Kronecker codebook")
        return divmod(int(i), self.shape[1])


def build_dft_codebook(n_ports: int, oversampling: int = 1) -> Codebook:
    """``n_ports * oversampling`` oversampled DFT beams, unit norm."""
    if n_ports < 1 or oversampling < 1:
        raise ValueError("n_ports and oversampling must be >= 1")
    n = np.arange(n_ports)
    k = np.arange(n_ports * oversampling)
    cw = np.exp(2j * np.pi * np.outer(k, n) / (n_ports * oversampling)) / np.sqrt(n_ports)
    return Codebook(cw)


def dual_pol_codebook(beams: Codebook, co_phases=CO_PHASES) -> Codebook:
    """Rank-1 dual-polarized codewords ``[b; c b] / sqrt(2)``.

    Index ``i`` maps to beam ``i // len(co_phases)`` and co-phase
    ``i % len(co_phases)``.
    """
    co = np.asarray(co_phases, dtype=complex).ravel()
    cw = [np.concatenate([b, c * b]) / np.sqrt(2.0) for b in beams.codewords for c in co]
    return Codebook(np.array(cw))


def kronecker_codebook(vertical: Codebook, horizontal: Codebook) -> Codebook:
    """Composite codebook ``W_V (x) W_H``; index ``iv * |H| + ih``."""
    v, h = vertical.codewords, horizontal.codewords
    cw = np.einsum("ia,jb->ijab", v, h).reshape(len(v) * len(h), -1)
    return Codebook(cw, "kronecker", (len(v), len(h)))


def steering_codebook(n: int, spacing: float, dir_cosines) -> Codebook:
    """Unit-norm steering vectors of an ``n``-element ULA towards each cosine."""
    cw = [steering_vector(float(c), spacing, n).entries / np.sqrt(n) for c in np.ravel(dir_cosines)]
    return Codebook(np.array(cw))


def _metric(direction, vectors):
    """``||H_bar^H w||^2 / ||H_bar||_F^2`` for every row ``w`` of ``vectors``."""
    hb = np.asarray(direction, dtype=complex)
    if hb.ndim == 1:
        hb = hb[:, None]
    nrm = np.linalg.norm(hb)
    if nrm == 0.0:
        raise ValueError("zero channel")
    proj = vectors.conj() @ hb  # (count, n_rx): conj(w)^T h_bar = conj(h_bar^H w)
    return np.sum(np.abs(proj) ** 2, axis=1) / nrm ** 2


def _argmax_lowest(values, rtol=1e-12):
    best = values.max()
    return int(np.flatnonzero(values >= best - rtol * abs(best))[0])


def select_pmi(channel_direction, codebook: Codebook) -> tuple[int, float]:
    """Preferred codeword ``argmax_i ||h_bar^H W_U^i||^2``.

    The channel is normalized first, so the returned gain lies in [0, 1].
    Ties (within 1e-12 relative) resolve to the lowest index.
    """
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    g = _metric(channel_direction, codebook.codewords)
    i = _argmax_lowest(g)
    return i, float(g[i])


@dataclass(frozen=True, eq=False)
class BeamSet:
    """Beamformed CSI-RS weights ``v_j`` (rows), normalized to unit norm."""

    beams: np.ndarray
    directions: tuple = ()

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.beams, dtype=complex))
        nrm = np.linalg.norm(b, axis=1, keepdims=True)
        if np.any(nrm == 0):
            raise ValueError("zero beam weight")
        object.__setattr__(self, "beams", b / nrm)

    @property
    def n_b(self) -> int:
        return self.beams.shape[0]

    @property
    def bits(self) -> int:
        return math.ceil(math.log2(self.n_b)) if self.n_b > 1 else 0


def select_beam(channel_direction, beam_set: BeamSet) -> tuple[int, float]:
    """Best beam ``argmax_j |h_bar^H v_j|^2`` and its normalized power."""
    g = _metric(channel_direction, beam_set.beams)
    j = _argmax_lowest(g)
    return j, float(g[j])


def select_co_phase(dual_pol_channel, beam) -> complex:
    """QPSK co-phase ``c`` for the rank-1 precoder ``[v; c v]``.

    ``dual_pol_channel`` is a direction of length ``2 len(v)`` (or a matrix
    with one column per receive antenna), first polarization block on top.
    Maximizes ``||h_bar_1^H v + c h_bar_2^H v||^2``; lowest index on ties.
    """
    hb = np.asarray(dual_pol_channel, dtype=complex)
    if hb.ndim == 1:
        hb = hb[:, None]
    v = np.asarray(beam, dtype=complex).ravel()
    n = len(v)
    if hb.shape[0] != 2 * n:
        raise ValueError(f"channel length {hb.shape[0]} != 2 x beam length {n}")
    if not np.any(hb):
        raise ValueError("zero channel")
    a = hb[:n].conj().T @ v
    b = hb[n:].conj().T @ v
    vals = np.array([np.sum(np.abs(a + c * b) ** 2) for c in CO_PHASES])
    return complex(CO_PHASES[_argmax_lowest(vals)])


@dataclass(frozen=True)
class CqiReport:
    index: int
    efficiency: float  # min(log2(1 + SINR), cap)
    quantized_efficiency: float


def cqi_table(se_cap: float = DEFAULT_SE_CAP) -> np.ndarray:
    """Efficiency of each of the 16 CQI indices.

    Index 0 is out of range (0 b/s/Hz), indices 1-14 follow the LTE
    transport-format ladder and index 15 carries the cap.  Entries above the
    cap are clipped to it.
    """
    return np.minimum(np.append(LTE_CQI_EFFICIENCY, se_cap), se_cap)


def cqi_index(efficiency, se_cap: float = DEFAULT_SE_CAP):
    """4-bit CQI index: highest table entry not exceeding ``efficiency``."""
    table = cqi_table(se_cap)
    eff = np.clip(np.asarray(efficiency, dtype=float), 0.0, se_cap)
    return np.searchsorted(table, eff * (1 + 1e-12), side="right") - 1


def cqi_efficiency(index, se_cap: float = DEFAULT_SE_CAP):
    return cqi_table(se_cap)[np.asarray(index)]


def compute_cqi(post_precoding_sinr_db: float, se_cap: float = DEFAULT_SE_CAP) -> CqiReport:
    """Spectral efficiency ``min(log2(1 + SINR), cap)`` and its 4-bit CQI.

    See :func:`cqi_table` for the 4-bit quantizer; the highest index
    carries exactly the cap.
    """
    if np.isnan(post_precoding_sinr_db):
        raise ValueError("SINR must not be NaN")
    with np.errstate(over="ignore"):
        sinr = 10.0 ** (post_precoding_sinr_db / 10.0)
    eff = min(float(np.log2(1.0 + sinr)), se_cap)
    idx = int(cqi_index(eff, se_cap))
    return CqiReport(idx, eff, float(cqi_efficiency(idx, se_cap)))


def feedback_bits(feedback_class: str, n_t: int, n_b: int = 1, snr_db: float = 10.0, rank: int = 1) -> int:
    """Uplink bits needed by one CSI report.

    Class A follows the limited-feedback scaling ``ceil((N_T - 1) SNR_dB / 3)``
    that keeps the quantization loss bounded.  Class B sends a beam index,
    ``ceil(log2 N_B)`` bits, plus a 2-bit co-phase at rank 2.
    """
    if n_t < 1 or n_b < 1:
        raise ValueError("n_t and n_b must be >= 1")
    if feedback_class == "A":
        bits = math.ceil(Fraction(n_t - 1) * Fraction(snr_db) / 3)
        return max(int(bits), 0)
    if feedback_class == "B":
        bits = math.ceil(math.log2(n_b)) if n_b > 1 else 0
        return bits + (2 if rank == 2 else 0)
    raise ValueError(f"unknown feedback class {feedback_class!r}")


def pilot_overhead_fraction(scheme: str, n_resources: int, fixed_rs_res: int = CRS_RES_PER_RB,
                            res_per_rb: int = RES_PER_RB) -> float:
    """Share of REs taken by reference signals: ``(n + fixed) / 168``, clamped to [0, 1).

    ``n_resources`` is N_T for non-precoded CSI-RS and N_B for beamformed
    CSI-RS; ``fixed_rs_res`` is the CRS footprint (2 ports by default).
    """
    if scheme not in ("NonPrecoded", "Beamformed"):
        raise ValueError(f"unknown pilot scheme {scheme!r}")
    if n_resources < 0:
        raise ValueError("resource count must be non-negative")
    frac = (n_resources + fixed_rs_res) / res_per_rb
    return float(min(max(frac, 0.0), np.nextafter(1.0, 0.0)))


@dataclass(frozen=True)
class PilotBudget:
    scheme: str
    resources: int
    per_pilot_power: float
    overhead_fraction: float


def pilot_budget(scheme: str, n_t: int, n_b: int, total_power: float = 1.0) -> PilotBudget:
    """Resource count and per-pilot power: P / N_T non-precoded, P / N_B beamformed."""
    n = n_t if scheme == "NonPrecoded" else n_b
    return PilotBudget(scheme, n, total_power / n, pilot_overhead_fraction(scheme, n))


@dataclass(frozen=True)
class FeedbackReport:
    rank: int
    index: int
    co_phase: complex = 1.0
    cqi: tuple = ()
    component_bits: dict = field(default_factory=dict)
    age: int = 0
    kind: str = "A"

    def __post_init__(self):
        if self.age < 0:
            raise ValueError("report age must be >= 0")

    @property
    def bit_cost(self) -> int:
        return int(sum(self.component_bits.values()))


def make_report(kind: str, rank: int, index: int, cqi, index_bits: int, co_phase=1.0,
                cqi_bits: int = 4, max_rank: int = 2, age: int = 0) -> FeedbackReport:
    """Assemble a report and its per-field bit widths (RI, PMI/BI, co-phase, CQI)."""
    cqi = tuple(int(c) for c in np.ravel(cqi))
    comp = {
        "ri": math.ceil(math.log2(max_rank)) if max_rank > 1 else 0,
        "pmi" if kind == "A" else "bi": int(index_bits),
        "co_phase": 2 if (kind != "A" and rank == 2) else 0,
        "cqi": cqi_bits * len(cqi),
    }
    return FeedbackReport(rank, int(index), complex(co_phase), cqi, comp, age, kind)


def vertical_beam_set(m: int, dv: float, elevations_deg, n: int = 1, dh: float = 0.5,
                      azimuth_deg: float = 0.0) -> BeamSet:
    """Beams ``kron(vertical steering(el_j), horizontal steering(az))`` per polarization."""
    beams = []
    for el in np.ravel(elevations_deg):
        u, w = direction_cosines(azimuth_deg, el)
        v = steering_vector(float(w), dv, m).entries
        h = steering_vector(float(u), dh, n).entries
        beams.append(np.kron(v, h))
    dirs = tuple((float(azimuth_deg), float(e)) for e in np.ravel(elevations_deg))
    return BeamSet(np.array(beams), dirs)


@dataclass(frozen=True)
class LongTermReport:
    index: int
    elevation_deg: float
    azimuth_deg: float


def long_term_pmi(channels, m: int, n: int, dv: float, dh: float,
                  elevations_deg, azimuths_deg) -> LongTermReport:
    """Wideband PMI over a steering-grid Kronecker codebook.

    ``channels`` stacks single-polarization channel rows ``(..., m * n)``
    (subbands, receive antennas and polarizations flattened into the leading
    axes).  Selects the codeword maximizing the summed ``||H w||^2``.
    """
    el = np.ravel(elevations_deg)
    az = np.ravel(azimuths_deg)
    book_v = np.array([steering_vector(float(np.sin(np.deg2rad(e))), dv, m).entries for e in el])
    rows = np.asarray(channels, dtype=complex).reshape(-1, m * n)
    best, best_val = 0, -np.inf
    # the horizontal cosine depends on elevation, so the grid is not a plain Kronecker product
    for iv, e in enumerate(el):
        u, _ = direction_cosines(az, e)
        book_h = np.exp(-2j * np.pi * np.outer(u, np.arange(n)) * dh)
        cw = np.einsum("a,jb->jab", book_v[iv], book_h).reshape(len(az), -1) / np.sqrt(m * n)
        vals = np.sum(np.abs(rows @ cw.T) ** 2, axis=0)
        j = int(np.argmax(vals))
        if vals[j] > best_val * (1 + 1e-12):
            best, best_val = iv * len(az) + j, vals[j]
    iv, ih = divmod(best, len(az))
    return LongTermReport(best, float(el[iv]), float(az[ih]))


def adaptive_feedback_step(long_term: LongTermReport | None, state: BeamSet | None, channel_direction,
                           m: int, dv: float, default_elevations_deg, span_deg: float = 8.0,
                           n: int = 1, dh: float = 0.5, sinr_db: float | None = None):
    """One scheme-II update: re-center the vertical beam grid, then report (BI, CQI).

    Parameters
    ----------
    long_term : LongTermReport or None
        Latest long-term PMI.  ``None`` falls back to the uniform grid
        ``default_elevations_deg`` (scheme I behaviour).
    state : BeamSet or None
        Current grid; kept when it already matches the target.
    channel_direction : array_like
        Short-term channel direction on the beam's elements.
    span_deg : float
        Angular width covered by the re-centered grid.
    sinr_db : float, optional
        Post-beamforming SINR used for the CQI (defaults to the beam gain
        expressed in dB).

    Returns
    -------
    (BeamSet, FeedbackReport)
    """
    n_beams = len(np.ravel(default_elevations_deg))
    if long_term is None:
        elevations = np.ravel(default_elevations_deg).astype(float)
        az = 0.0
    else:
        step = span_deg / n_beams
        elevations = long_term.elevation_deg + (np.arange(n_beams) - (n_beams - 1) / 2.0) * step
        az = long_term.azimuth_deg
    target = vertical_beam_set(m, dv, elevations, n=n, dh=dh, azimuth_deg=az)
    if state is not None and state.beams.shape == target.beams.shape and np.allclose(state.beams, target.beams):
        target = state
    j, g = select_beam(channel_direction, target)
    if sinr_db is None:
        sinr_db = 10.0 * np.log10(max(g, 1e-12))
    cqi = compute_cqi(sinr_db)
    report = make_report("B", 1, j, [cqi.index], target.bits)
    return target, report


def write_feedback_csv(path, rows) -> None:
    """Feedback trace ``subframe,cell,ue,class,rank,index,co_phase,cqi,bits``."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subframe", "cell", "ue", "class", "rank", "index", "co_phase", "cqi", "bits"])
        for sf, cell, ue, rep in rows:
            cp = complex(rep.co_phase)
            w.writerow([sf, cell, ue, rep.kind, rep.rank, rep.index,
                        f"{cp.real:g}{cp.imag:+g}j", " ".join(str(c) for c in rep.cqi), rep.bit_cost])
