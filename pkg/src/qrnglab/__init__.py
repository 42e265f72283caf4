"""Desk-scale model of a transceiver-integrated vacuum-noise QRNG.

Simulates the homodyne front end (receiver and modulator-monitor flavors),
decomposes dark/lit variances into quantum and classical parts, sizes and
runs Toeplitz extraction, and checks the output with a full SP800-22
battery.  A QPSK link module covers the transceiver side of the story.
"""

from .entropy import (
    DEFAULT_EPSILON,
    ExtractionPlan,
    VarianceDecomposition,
    extractable_length,
    key_rate,
    min_entropy_per_sample,
    variance_decompose,
)
from .errors import (
    CaptureFormatError,
    ConfigError,
    EmptyMaskError,
    EstimationError,
    InsufficientEntropyError,
    QrngLabError,
)
from .extractor import (
    Bitstream,
    ToeplitzSeed,
    extract_stream,
    seed_new,
    serialize_samples,
    toeplitz_extract,
    toeplitz_extract_naive,
)
from .frontend import (
    AdcConfig,
    FrontendConfig,
    SampleBlock,
    SideChannel,
    SidechannelConfig,
    auto_full_scale,
    clearance_db,
    noise_enbw_hz,
    psd_estimate,
    shot_noise_voltage_psd,
    simulate_block,
    with_calibrated_noise,
)
from .modulator import (
    HarmonicTable,
    ModulatorConfig,
    TdmFrame,
    bias_tone_spectrum,
    settle_mask,
    settle_time_s,
    simulate_tx_frame,
    tdm_schedule,
    valid_fraction,
)
from .pipeline import PROFILES, PipelineConfig, PipelineResult, load_config, run_pipeline
from .qpsk import LinkConfig, ber_measure, ber_theory_qpsk, threshold_search
from .sp800_22 import SuiteParams, SuiteReport, run_suite, summarize

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AdcConfig",
    "Bitstream",
    "CaptureFormatError",
    "ConfigError",
    "DEFAULT_EPSILON",
    "EmptyMaskError",
    "EstimationError",
    "ExtractionPlan",
    "FrontendConfig",
    "HarmonicTable",
    "InsufficientEntropyError",
    "LinkConfig",
    "ModulatorConfig",
    "PROFILES",
    "PipelineConfig",
    "PipelineResult",
    "QrngLabError",
    "SampleBlock",
    "SideChannel",
    "SidechannelConfig",
    "SuiteParams",
    "SuiteReport",
    "TdmFrame",
    "ToeplitzSeed",
    "VarianceDecomposition",
    "auto_full_scale",
    "ber_measure",
    "ber_theory_qpsk",
    "bias_tone_spectrum",
    "clearance_db",
    "extract_stream",
    "extractable_length",
    "key_rate",
    "load_config",
    "min_entropy_per_sample",
    "noise_enbw_hz",
    "psd_estimate",
    "run_pipeline",
    "run_suite",
    "seed_new",
    "serialize_samples",
    "settle_mask",
    "settle_time_s",
    "shot_noise_voltage_psd",
    "simulate_block",
    "simulate_tx_frame",
    "summarize",
    "tdm_schedule",
    "threshold_search",
    "toeplitz_extract",
    "toeplitz_extract_naive",
    "valid_fraction",
    "variance_decompose",
    "with_calibrated_noise",
]
