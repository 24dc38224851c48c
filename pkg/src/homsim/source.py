"""Pulsed single-photon stream with imperfections and PBS routing.

One trial per repetition period.  A trial emits zero, one, or (for
multi-atom events) two photons; each photon receives an independent
frequency offset and envelope-width scaling, then is routed at the PBS
into the modulator path ("short") or the one-period delay path
("long").  Photons arriving in the same repetition slot at the
recombining splitter form interfering pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .grid import TimeGrid, WavePacket, apply_detuning, gaussian_envelope
from .streams import FieldStreams

log = logging.getLogger(__name__)

# jittered width scale is clamped here to keep envelopes physical
MIN_WIDTH_SCALE = 0.2

SHORT = "short"   # modulator path
LONG = "long"     # delay-fibre path, one repetition period


@dataclass(frozen=True)
class SourceConfig:
    """Operating point of the photon source and detectors.

    Attributes:
        rep_rate_khz: pulse repetition rate; the delay path equals one
            repetition period by construction
        p_click: per-trial probability of a detected photon
        p_two_photon: per-trial probability of a two-photon (multi-atom)
            emission; must not exceed p_click
        fwhm_ns: nominal intensity FWHM of the packet envelope
        sigma_nu_mhz: std of the Gaussian part of the per-photon
            frequency offset
        gamma_nu_mhz: half-width of an additional Lorentzian (heavy-
            tailed) part of the frequency offset; the offset
            distribution over the emitting sublevels is not known, and
            the Lorentzian component reproduces the observed near-
            exponential contrast decay with detection-time difference
        amp_jitter: relative std of the envelope-width scaling
        dark_rate_hz: dark-count rate per detector
        det_jitter_ns: detector timing-jitter std (beyond quantization)
        timing_resolution_ns: detection-time quantization
        mode_overlap: static mode-overlap factor at the recombining
            splitter, in [0, 1]
    """

    rep_rate_khz: float = 740.0
    p_click: float = 0.07
    p_two_photon: float = 0.0
    fwhm_ns: float = 150.0
    sigma_nu_mhz: float = 0.0
    gamma_nu_mhz: float = 0.0
    amp_jitter: float = 0.0
    dark_rate_hz: float = 0.0
    det_jitter_ns: float = 0.0
    timing_resolution_ns: float = 2.0
    mode_overlap: float = 1.0

    def __post_init__(self):
        if not self.rep_rate_khz > 0:
            raise ValueError("rep_rate_khz must be > 0")
        for name in ("p_click", "p_two_photon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.p_two_photon > self.p_click:
            raise ValueError("p_two_photon cannot exceed p_click")
        if not self.fwhm_ns > 0:
            raise ValueError("fwhm_ns must be > 0")
        for name in ("sigma_nu_mhz", "gamma_nu_mhz", "amp_jitter",
                     "dark_rate_hz", "det_jitter_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.timing_resolution_ns < 0:
            raise ValueError("timing_resolution_ns must be >= 0")
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ValueError("mode_overlap must be in [0, 1]")

    @property
    def rep_period_ns(self) -> float:
        return 1e6 / self.rep_rate_khz


@dataclass
class PhotonInstance:
    """One emitted photon with its shot-to-shot parameters.

    ``index`` is 0 for the primary emission and 1 for the extra photon of
    a multi-atom event (``extra`` mirrors this).  ``path`` is None until
    the photon has been routed.
    """

    trial: int
    index: int
    width_scale: float
    detuning_mhz: float
    path: str | None = None
    extra: bool = False

    @property
    def slot(self) -> int:
        """Arrival slot at the recombining splitter (trial + 1 on the
        delay path)."""
        if self.path is None:
            raise ValueError("photon has not been routed yet")
        return self.trial + (1 if self.path == LONG else 0)

    def build_packet(self, cfg: SourceConfig, grid: TimeGrid) -> WavePacket:
        """Materialize the jittered packet (slot-local time, center 0)."""
        wp = gaussian_envelope(grid, 0.0, cfg.fwhm_ns * self.width_scale)
        if self.detuning_mhz != 0.0:
            wp = apply_detuning(wp, self.detuning_mhz)
        return wp


def _width_scales(cfg: SourceConfig, z: np.ndarray) -> np.ndarray:
    return np.maximum(1.0 + cfg.amp_jitter * z, MIN_WIDTH_SCALE)


# Cauchy quantiles far in the tails are numerically meaningless; photons
# this far detuned are completely distinguishable either way
MAX_DETUNING_MHZ = 1e6


def _detunings(cfg: SourceConfig, z_gauss: np.ndarray,
               u_lorentz: np.ndarray) -> np.ndarray:
    det = cfg.sigma_nu_mhz * z_gauss
    if cfg.gamma_nu_mhz > 0:
        det = det + cfg.gamma_nu_mhz * np.tan(
            np.pi * (np.clip(u_lorentz, 1e-12, 1.0 - 1e-12) - 0.5))
    return np.clip(det, -MAX_DETUNING_MHZ, MAX_DETUNING_MHZ)


def sample_trial(cfg: SourceConfig, streams: FieldStreams,
                 trial: int) -> list[PhotonInstance]:
    """Emission outcome of one trial: zero, one, or two photons.

    Reproducible: depends only on (master seed, trial index).
    """
    u_emit = float(streams.read("emit", trial, 1)[0])
    if u_emit < cfg.p_two_photon:
        n = 2
    elif u_emit < cfg.p_click:
        n = 1
    else:
        return []
    z_nu = streams.normals("detune", trial, 1)[0]
    u_lor = streams.read("detune_lor", trial, 1)[0]
    z_w = streams.normals("width", trial, 1)[0]
    scales = _width_scales(cfg, z_w)
    detunings = _detunings(cfg, z_nu, u_lor)
    return [
        PhotonInstance(trial=trial, index=i, width_scale=float(scales[i]),
                       detuning_mhz=float(detunings[i]), extra=(i == 1))
        for i in range(n)
    ]


def route_pbs(photon: PhotonInstance, streams: FieldStreams) -> PhotonInstance:
    """Assign the photon's path with probability 1/2 each."""
    u = float(streams.read("route", photon.trial, 1)[0, photon.index])
    return replace(photon, path=SHORT if u < 0.5 else LONG)


def assemble_pairs(stream: list[PhotonInstance]) -> list[list[PhotonInstance]]:
    """Group routed photons by arrival slot.

    Photons sharing a slot form an interfering pair; everything else is a
    singleton.  Groups of more than two are truncated to the first two
    with a logged warning (the two-photon interference model does not
    cover them).

    Args:
        stream: photons ordered by (trial, index)
    """
    order = [(p.trial, p.index) for p in stream]
    if order != sorted(order):
        raise ValueError("stream must be ordered by (trial, index)")
    groups: dict[int, list[PhotonInstance]] = {}
    for p in stream:
        groups.setdefault(p.slot, []).append(p)
    out = []
    n_truncated = 0
    for slot in sorted(groups):
        g = groups[slot]
        if len(g) > 2:
            n_truncated += len(g) - 2
            g = g[:2]
        out.append(g)
    if n_truncated:
        log.warning("truncated %d photon(s) in slots with more than two "
                    "arrivals", n_truncated)
    return out


def photon_block(cfg: SourceConfig, streams: FieldStreams, lo: int,
                 hi: int) -> dict[str, np.ndarray]:
    """Vectorized emission + routing for trials [lo, hi).

    Returns parallel arrays sorted by (trial, index):
    trial, index, extra, slot, width_scale, detuning_mhz, time_u, port_u,
    detjit_z.  Field-for-field identical to looping sample_trial and
    route_pbs over the same trials.
    """
    n = hi - lo
    u_emit = streams.read("emit", lo, n)
    two = u_emit < cfg.p_two_photon
    one = (~two) & (u_emit < cfg.p_click)
    counts = np.where(two, 2, np.where(one, 1, 0))
    trials_rel = np.repeat(np.arange(n), counts)
    idx = _index_within(counts)

    z_nu = streams.normals("detune", lo, n)
    u_lor = streams.read("detune_lor", lo, n)
    z_w = streams.normals("width", lo, n)
    u_route = streams.read("route", lo, n)
    u_time = streams.read("time", lo, n)
    u_port = streams.read("port", lo, n)
    z_jit = streams.normals("detjit", lo, n)

    trial = trials_rel + lo
    long_path = u_route[trials_rel, idx] >= 0.5
    return {
        "trial": trial,
        "index": idx,
        "extra": idx == 1,
        "slot": trial + long_path.astype(np.int64),
        "short_path": ~long_path,
        "width_scale": _width_scales(cfg, z_w[trials_rel, idx]),
        "detuning_mhz": _detunings(cfg, z_nu[trials_rel, idx],
                                   u_lor[trials_rel, idx]),
        "time_u": u_time[trials_rel, idx],
        "port_u": u_port[trials_rel, idx],
        "detjit_z": z_jit[trials_rel, idx],
    }


def _index_within(counts: np.ndarray) -> np.ndarray:
    """0, 1, ... within each trial's emitted photons."""
    pos = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(int(counts.sum())) - pos
