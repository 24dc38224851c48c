"""homsim: two-photon interference with phase-shaped single photons.

Simulates a pulsed single-photon stream routed through a modulator/delay
interferometer onto a balanced beam splitter, and reproduces the
coincidence statistics of phase steps, phase sweeps, and quantum beats
from first principles plus a phenomenological imperfection model.
"""

from .grid import (TimeGrid, WavePacket, apply_detuning, apply_phase,
                   gaussian_envelope, inner_product)
from .interference import (JointDensity, conditional_cross_prob,
                           half_pair_region, joint_densities,
                           noninterfering_density, predict_beat_curve,
                           region_rate_ratio)
from .phase import (EomCalibration, PhaseProfile, linear_ramp_profile,
                    phase_from_voltage, sawtooth_profile, step_profile)
from .source import PhotonInstance, SourceConfig, assemble_pairs, route_pbs, sample_trial
from .detection import (DetectionEvent, EventLog, run_experiment,
                        sample_pair_detections, sample_single_detection)
from .coincidence import CoincidenceHistogram, build_pairs, g2_histogram
from .analysis import (HalfClassification, VisibilityFit, beat_overlay,
                       central_suppression, classify_half, fit_visibility,
                       normalized_rates)
from .scenario import Scenario, load_scenario, validate_scenario

__version__ = "0.1.0"
