"""Monte Carlo detection: arrival groups -> time-tagged detector events.

Detection-time pairs are drawn from the exact joint law: (t1, t2) from
p_cross + p_same (a balanced mixture of the two envelope products),
then opposite ports with the conditional probability
p_cross / (p_cross + p_same) evaluated at the drawn times.  Detector
jitter and timing quantization are applied afterwards.

Event logs are deterministic functions of (config, seed, n_trials) and
do not depend on the internal chunking of the run.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .grid import MHZ_PER_NS, SIGMA_FROM_FWHM, WavePacket
from .interference import JointDensity
from .phase import PhaseProfile
from .source import SourceConfig, photon_block
from .streams import FieldStreams

log = logging.getLogger(__name__)

PORT_C, PORT_D = 0, 1
ORIGIN_PHOTON, ORIGIN_DARK = 0, 1
PORT_NAMES = {PORT_C: "C", PORT_D: "D"}
ORIGIN_NAMES = {ORIGIN_PHOTON: "photon", ORIGIN_DARK: "dark"}

EVENT_CSV_HEADER = "trial,port,timestamp_ns,origin"

MODE_INTERFEROMETER = "interferometer"   # PBS routing + pairing at the NPBS
MODE_HBT = "hbt"                         # raw stream split onto two detectors

_U_LO, _U_HI = 1e-16, 1.0 - 1e-16


@dataclass
class DetectionEvent:
    """One detector click."""

    timestamp_ns: float
    port: str
    trial: int
    origin: str = "photon"


class EventLog:
    """Column store of detector clicks, ordered by timestamp.

    ``is_extra`` marks detections of multi-atom extra photons; it is a
    diagnostic kept in memory only and is not part of the CSV format.
    """

    def __init__(self, trial, port, timestamp_ns, origin, is_extra=None,
                 n_truncated: int = 0):
        self.trial = np.asarray(trial, dtype=np.int64)
        self.port = np.asarray(port, dtype=np.int8)
        self.timestamp_ns = np.asarray(timestamp_ns, dtype=np.float64)
        self.origin = np.asarray(origin, dtype=np.int8)
        if is_extra is None:
            is_extra = np.zeros(self.trial.size, dtype=bool)
        self.is_extra = np.asarray(is_extra, dtype=bool)
        self.n_truncated = int(n_truncated)

    def __len__(self):
        return self.trial.size

    def sorted(self) -> "EventLog":
        order = np.lexsort((self.origin, self.trial, self.port,
                            self.timestamp_ns))
        return EventLog(self.trial[order], self.port[order],
                        self.timestamp_ns[order], self.origin[order],
                        self.is_extra[order], self.n_truncated)

    @classmethod
    def concatenate(cls, logs: list["EventLog"]) -> "EventLog":
        if not logs:
            return cls([], [], [], [])
        return cls(
            np.concatenate([l.trial for l in logs]),
            np.concatenate([l.port for l in logs]),
            np.concatenate([l.timestamp_ns for l in logs]),
            np.concatenate([l.origin for l in logs]),
            np.concatenate([l.is_extra for l in logs]),
            sum(l.n_truncated for l in logs),
        )

    def to_csv(self, path_or_buf) -> None:
        """Write `trial,port,timestamp_ns,origin` rows."""
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            f = open(path_or_buf, "w", newline="")
            close = True
        else:
            f = path_or_buf
        try:
            w = csv.writer(f)
            w.writerow(EVENT_CSV_HEADER.split(","))
            w.writerows(
                (int(tr), PORT_NAMES[int(p)], repr(float(ts)),
                 "extra" if ex else ORIGIN_NAMES[int(o)])
                for tr, p, ts, o, ex in zip(self.trial, self.port,
                                            self.timestamp_ns, self.origin,
                                            self.is_extra)
            )
        finally:
            if close:
                f.close()

    @classmethod
    def from_csv(cls, path_or_buf) -> "EventLog":
        """Read a log in the documented CSV format.

        Raises:
            ValueError: with a line number for malformed rows.
        """
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            f = open(path_or_buf, "r", newline="")
            close = True
        else:
            f = path_or_buf
        try:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != EVENT_CSV_HEADER.split(","):
                raise ValueError(
                    f"line 1: expected header {EVENT_CSV_HEADER!r}, got {header!r}")
            ports = {"C": PORT_C, "D": PORT_D}
            origins = {"photon": ORIGIN_PHOTON, "extra": ORIGIN_PHOTON,
                       "dark": ORIGIN_DARK}
            trial, port, ts, origin, extra = [], [], [], [], []
            for ln, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    tag = row[3].strip()
                    trial.append(int(row[0]))
                    port.append(ports[row[1].strip()])
                    ts.append(float(row[2]))
                    origin.append(origins[tag])
                    extra.append(tag == "extra")
                except (ValueError, KeyError, IndexError) as exc:
                    raise ValueError(f"line {ln}: malformed event row {row!r}") from exc
            return cls(trial, port, ts, origin, extra)
        finally:
            if close:
                f.close()


def _quantize(t: np.ndarray, resolution_ns: float) -> np.ndarray:
    if resolution_ns <= 0:
        return t
    return np.round(t / resolution_ns) * resolution_ns


def sample_single_detection(packet: WavePacket, rng: np.random.Generator,
                            timing_resolution_ns: float = 2.0,
                            det_jitter_ns: float = 0.0,
                            trial: int = 0) -> DetectionEvent:
    """Detect a lone photon: time from |amp|^2 (grid cells, uniform within
    a cell), port uniform, then jitter and quantization."""
    g = packet.grid
    w = packet.intensity
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    t = g.times[min(k, g.n_points - 1)] + (rng.random() - 0.5) * g.dt
    if det_jitter_ns > 0:
        t += det_jitter_ns * ndtri(np.clip(rng.random(), _U_LO, _U_HI))
    t = float(_quantize(np.asarray(t), timing_resolution_ns))
    port = PORT_C if rng.random() < 0.5 else PORT_D
    return DetectionEvent(timestamp_ns=t, port=PORT_NAMES[port], trial=trial)


def sample_pair_detections(jd: JointDensity, rng: np.random.Generator,
                           n_pairs: int = 1,
                           timing_resolution_ns: float = 2.0,
                           det_jitter_ns: float = 0.0):
    """Draw detection pairs from a joint density by 2-D inverse CDF.

    Cells are selected proportionally to p_cross + p_same with uniform
    placement inside each cell; ports are opposite with the conditional
    probability of the selected cell.

    Returns:
        (t1, port1, t2, port2) arrays; ports are 0 (C) / 1 (D).

    Raises:
        ValueError: if the density carries no mass.
    """
    tot = jd.p_cross + jd.p_same
    flat = tot.ravel()
    csum = np.cumsum(flat)
    if not csum[-1] > 0:
        raise ValueError("degenerate density: zero total mass")
    csum = csum / csum[-1]
    u = rng.random(n_pairs)
    cells = np.searchsorted(csum, u, side="right")
    cells = np.minimum(cells, flat.size - 1)
    i, j = np.unravel_index(cells, tot.shape)
    g = jd.grid
    t1 = g.times[i] + (rng.random(n_pairs) - 0.5) * g.dt
    t2 = g.times[j] + (rng.random(n_pairs) - 0.5) * g.dt
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(tot[i, j] > 0, jd.p_cross[i, j] / tot[i, j], 0.0)
    opposite = rng.random(n_pairs) < q
    orient = rng.random(n_pairs) < 0.5
    port1 = np.where(orient, PORT_C, PORT_D)
    port2 = np.where(opposite, 1 - port1, port1)
    if det_jitter_ns > 0:
        t1 = t1 + det_jitter_ns * ndtri(np.clip(rng.random(n_pairs), _U_LO, _U_HI))
        t2 = t2 + det_jitter_ns * ndtri(np.clip(rng.random(n_pairs), _U_LO, _U_HI))
    t1 = _quantize(t1, timing_resolution_ns)
    t2 = _quantize(t2, timing_resolution_ns)
    return t1, port1.astype(np.int8), t2, port2.astype(np.int8)


def _pair_amp(t, sigma, detuning_mhz, phi):
    """Gaussian packet amplitude with frequency offset and applied phase."""
    env = (2.0 * np.pi * sigma**2) ** -0.25 * np.exp(-(t**2) / (4.0 * sigma**2))
    return env * np.exp(1j * (2.0 * np.pi * detuning_mhz * MHZ_PER_NS * t + phi))


def pair_conditional_cross(t1, t2, sigma_a, det_a, phi_a1, phi_a2,
                           sigma_b, det_b, phi_b1, phi_b2, overlap):
    """Conditional opposite-port probability at given detection times for
    parametric Gaussian packets (phases supplied per time and photon)."""
    a1 = _pair_amp(t1, sigma_a, det_a, phi_a1)
    a2 = _pair_amp(t2, sigma_a, det_a, phi_a2)
    b1 = _pair_amp(t1, sigma_b, det_b, phi_b1)
    b2 = _pair_amp(t2, sigma_b, det_b, phi_b2)
    fa1, fa2 = np.abs(a1) ** 2, np.abs(a2) ** 2
    fb1, fb2 = np.abs(b1) ** 2, np.abs(b2) ** 2
    s = fa1 * fb2 + fb1 * fa2
    m = (a1 * b2 * np.conj(a2) * np.conj(b1)).real
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(s > 0, (s - 2.0 * np.asarray(overlap) ** 2 * m) / (2.0 * s), 0.0)
    return np.clip(q, 0.0, 1.0)


def run_experiment(cfg: SourceConfig, n_trials: int, seed: int,
                   phase_profile: PhaseProfile | None = None,
                   mode: str = MODE_INTERFEROMETER,
                   chunk_size: int = 1_000_000) -> EventLog:
    """Simulate the full photon stream and return the detector event log.

    In ``interferometer`` mode photons are routed at the PBS, photons
    sharing an arrival slot interfere at the recombining splitter, and
    the modulator phase profile acts on short-path photons.  In ``hbt``
    mode the raw emission stream is split directly onto the two
    detectors (no routing, no interference); this is the configuration
    used for the stream autocorrelation.

    Multi-atom extra photons never interfere (their pair overlap is 0).
    Slots with more than two arrivals are truncated to two with a logged
    warning.
    """
    if mode not in (MODE_INTERFEROMETER, MODE_HBT):
        raise ValueError(f"unknown mode {mode!r}")
    if n_trials < 0:
        raise ValueError("n_trials must be >= 0")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    streams = FieldStreams(seed)
    period = cfg.rep_period_ns
    sigma0 = cfg.fwhm_ns * SIGMA_FROM_FWHM

    parts = []
    n_truncated = 0
    carry = None
    for lo in range(0, n_trials, chunk_size):
        hi = min(lo + chunk_size, n_trials)
        ph = photon_block(cfg, streams, lo, hi)
        if mode == MODE_HBT:
            ph = dict(ph)
            ph["slot"] = ph["trial"]
        if carry is not None:
            ph = {k: np.concatenate([carry[k], ph[k]]) for k in ph}
        if mode == MODE_INTERFEROMETER and hi < n_trials:
            pending = ph["slot"] >= hi
            carry = {k: v[pending] for k, v in ph.items()}
            ph = {k: v[~pending] for k, v in ph.items()}
        else:
            carry = None
        chunk_events, trunc = _detect_chunk(cfg, streams, ph, phase_profile,
                                            sigma0, period, mode)
        n_truncated += trunc
        parts.append(chunk_events)

    darks = _dark_events(cfg, streams, n_trials, period)
    parts.append(darks)
    if n_truncated:
        log.warning("run: truncated %d photon(s) in slots with more than two "
                    "arrivals", n_truncated)
    out = EventLog.concatenate(parts).sorted()
    out.n_truncated = n_truncated
    return out


def _detect_chunk(cfg, streams, ph, profile, sigma0, period, mode):
    """Detections for one chunk of photons (already slot-complete)."""
    slot = ph["slot"]
    n_ph = slot.size
    if n_ph == 0:
        return EventLog([], [], [], []), 0

    # canonical order inside a slot: (slot, trial, index)
    order = np.lexsort((ph["index"], ph["trial"], slot))
    ph = {k: v[order] for k, v in ph.items()}
    slot = ph["slot"]

    new_slot = np.ones(n_ph, dtype=bool)
    new_slot[1:] = slot[1:] != slot[:-1]
    first_idx = np.flatnonzero(new_slot)
    counts = np.diff(np.append(first_idx, n_ph))

    n_truncated = int(np.maximum(counts - 2, 0).sum())
    pair_first = first_idx[counts >= 2]
    single_idx = first_idx[counts == 1]

    sigma = sigma0 * ph["width_scale"]
    u_time = np.clip(ph["time_u"], _U_LO, _U_HI)
    t_local = sigma * ndtri(u_time)
    if cfg.det_jitter_ns > 0:
        t_local = t_local + cfg.det_jitter_ns * ph["detjit_z"]

    events = []

    if mode == MODE_INTERFEROMETER and pair_first.size:
        i1 = pair_first
        i2 = pair_first + 1
        pslot = slot[i1]
        lo_slot = int(slot.min())
        n_slot = int(slot.max()) - lo_slot + 1
        u_swap = streams.read("swap", lo_slot, n_slot)[pslot - lo_slot]
        u_cross = streams.read("cross", lo_slot, n_slot)[pslot - lo_slot]
        u_orient = streams.read("orient", lo_slot, n_slot)[pslot - lo_slot]

        swap = u_swap >= 0.5
        tA = np.where(swap, t_local[i2], t_local[i1])
        tB = np.where(swap, t_local[i1], t_local[i2])
        trialA = np.where(swap, ph["trial"][i2], ph["trial"][i1])
        trialB = np.where(swap, ph["trial"][i1], ph["trial"][i2])
        extraA = np.where(swap, ph["extra"][i2], ph["extra"][i1])
        extraB = np.where(swap, ph["extra"][i1], ph["extra"][i2])

        overlap = np.where(ph["extra"][i1] | ph["extra"][i2], 0.0,
                           cfg.mode_overlap)
        phiA1, phiA2 = _profile_phase(profile, ph["short_path"][i1], tA, tB)
        phiB1, phiB2 = _profile_phase(profile, ph["short_path"][i2], tA, tB)
        q = pair_conditional_cross(
            tA, tB,
            sigma[i1], ph["detuning_mhz"][i1], phiA1, phiA2,
            sigma[i2], ph["detuning_mhz"][i2], phiB1, phiB2, overlap)
        opposite = u_cross < q
        orient = u_orient < 0.5
        portA = np.where(orient, PORT_C, PORT_D).astype(np.int8)
        portB = np.where(opposite, 1 - portA, portA).astype(np.int8)

        tsA = _quantize(pslot * period + tA, cfg.timing_resolution_ns)
        tsB = _quantize(pslot * period + tB, cfg.timing_resolution_ns)
        events.append(EventLog(
            np.concatenate([trialA, trialB]),
            np.concatenate([portA, portB]),
            np.concatenate([tsA, tsB]),
            np.zeros(2 * i1.size, dtype=np.int8),
            np.concatenate([extraA, extraB])))

    if single_idx.size:
        i = single_idx
        ts = _quantize(slot[i] * period + t_local[i], cfg.timing_resolution_ns)
        port = np.where(ph["port_u"][i] < 0.5, PORT_C, PORT_D).astype(np.int8)
        events.append(EventLog(ph["trial"][i], port, ts,
                               np.zeros(i.size, dtype=np.int8),
                               ph["extra"][i]))

    if mode == MODE_HBT and pair_first.size:
        # two photons per trial: both detected independently
        for off in (0, 1):
            i = pair_first + off
            ts = _quantize(slot[i] * period + t_local[i],
                           cfg.timing_resolution_ns)
            port = np.where(ph["port_u"][i] < 0.5, PORT_C, PORT_D).astype(np.int8)
            events.append(EventLog(ph["trial"][i], port, ts,
                                   np.zeros(i.size, dtype=np.int8),
                                   ph["extra"][i]))

    return EventLog.concatenate(events), n_truncated


def _profile_phase(profile, short_mask, t1, t2):
    """Applied modulator phase at the two detection times; photons on the
    delay path see none."""
    if profile is None:
        z = np.zeros_like(t1)
        return z, z
    p1 = np.where(short_mask, profile.phase(t1), 0.0)
    p2 = np.where(short_mask, profile.phase(t2), 0.0)
    return p1, p2


def _dark_events(cfg: SourceConfig, streams: FieldStreams, n_trials: int,
                 period: float) -> EventLog:
    """Homogeneous Poisson dark counts per detector over the run span."""
    duration_ns = (n_trials + 1) * period
    mean = cfg.dark_rate_hz * duration_ns * 1e-9
    g = streams.dark_generator()
    n_c = int(g.poisson(mean))
    n_d = int(g.poisson(mean))
    t = np.concatenate([g.random(n_c), g.random(n_d)]) * duration_ns - 0.5 * period
    t = _quantize(t, cfg.timing_resolution_ns)
    port = np.concatenate([np.full(n_c, PORT_C, dtype=np.int8),
                           np.full(n_d, PORT_D, dtype=np.int8)])
    trial = np.round(t / period).astype(np.int64)  # nearest slot, diagnostics
    return EventLog(trial, port, t, np.ones(n_c + n_d, dtype=np.int8))
