"""Declarative run configuration and the end-to-end processing pipeline.

A run is described by a plain INI document with a fixed schema; unknown
sections or keys are rejected.  Two builtin profiles reproduce the
published operating points: ``receiver-2020`` (coherent receiver, 40 GSa/s
8-bit digitizer) and ``transmitter-tdm-2020`` (modulator monitor path with
the 10 ms TDM frame).  ``run_pipeline`` chains simulation (or ingestion),
variance decomposition, entropy estimation, extraction planning, Toeplitz
extraction, and the statistical battery on both the raw and the extracted
bits, and writes a reproducibility manifest beside every artifact.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, replace

import numpy as np
import scipy

from . import io as qio
from .entropy import (
    DEFAULT_EPSILON,
    ExtractionPlan,
    VarianceDecomposition,
    min_entropy_per_sample,
    variance_decompose,
)
from .errors import ConfigError
from .extractor import Bitstream, extract_stream, seed_new, serialize_samples
from .frontend import (
    AdcConfig,
    FrontendConfig,
    SampleBlock,
    SideChannel,
    SidechannelConfig,
    auto_full_scale,
    block_from_voltages,
    simulate_block,
    with_calibrated_noise,
)
from .modulator import ModulatorConfig, TdmFrame, simulate_tx_frame, valid_fraction
from .qpsk import LinkConfig
from .sp800_22 import SuiteParams, SuiteReport, report_to_csv, run_suite

__all__ = [
    "PROFILES",
    "PlanParams",
    "PipelineConfig",
    "PipelineResult",
    "load_config",
    "run_pipeline",
    "RAW_SUITE_BITS",
]

# The battery's reference sizes are designed around 1 Mibit sequences, so
# the raw-side health check runs on the leading 1 Mibit of serialized data.
RAW_SUITE_BITS = 1 << 20

PROFILES = {
    "receiver-2020": """
[frontend]
mode = receiver
source_power_dbm = 18.0
responsivity_a_per_w = 0.8
transimpedance_dbohm = 51.5
detector_bandwidth_hz = 14.8e9
optical_path_loss_db = 0.0
electrical_noise_psd_v2_hz = auto
clearance_db = 2.6
cmrr_db = 34.0

[sidechannel]
enabled = false
received_power_dbm = -10.0
symbol_rate_hz = 1e9
pulse_rolloff = 0.2

[adc]
sample_rate_hz = 40e9
bits = 8
full_scale_v = auto
interleave_spur_dbc = -20.0

[plan]
n_samples = 8388608
hmin = 0.125
hmin_convention = per_sample
epsilon_exponent = 64
paper_mode = false

[suite]
alpha = 0.01
pass_floor = 185

[qpsk]
symbol_rate_hz = 10e9
n_pols = 2
freq_offset_hz = 0.0
linewidth_hz = 0.0
cpr_window = 1001
training_len = 64

[run]
seed = 20200916
""",
    "transmitter-tdm-2020": """
[frontend]
mode = transmitter
source_power_dbm = 18.0
responsivity_a_per_w = 0.8
transimpedance_dbohm = 66.0
detector_bandwidth_hz = 150e6
optical_path_loss_db = 0.0
electrical_noise_psd_v2_hz = auto
clearance_db = 2.1
cmrr_db = 34.0

[adc]
sample_rate_hz = 1e9
bits = 8
full_scale_v = auto
interleave_spur_dbc = -inf

[plan]
n_samples = auto
hmin = auto
hmin_convention = per_sample
epsilon_exponent = 64
paper_mode = false

[suite]
alpha = 0.01
pass_floor = 185

[modulator]
v_pi_v = 3.714
bias_qrng_v = 3.714
bias_data_v = 1.857
rf_dc_crosstalk_db = -7.6
bias_shift_v = 1.56
bias_tolerance_vpi = 0.05
dc_lpf_hz = 22e3
native_dc_bw_hz = 700e3

[frame]
period_s = 10e-3
data_duty = 0.7
guard_s = 100e-6
settle_fraction = 0.01
data_symbol_rate_hz = 100e6

[run]
seed = 20210401
""",
}

_SCHEMA = {
    "frontend": {
        "mode",
        "source_power_dbm",
        "responsivity_a_per_w",
        "transimpedance_dbohm",
        "detector_bandwidth_hz",
        "optical_path_loss_db",
        "electrical_noise_psd_v2_hz",
        "clearance_db",
        "cmrr_db",
    },
    "sidechannel": {"enabled", "received_power_dbm", "symbol_rate_hz", "pulse_rolloff"},
    "adc": {"sample_rate_hz", "bits", "full_scale_v", "interleave_spur_dbc"},
    "plan": {"n_samples", "hmin", "hmin_convention", "epsilon_exponent", "paper_mode"},
    "suite": {"alpha", "pass_floor"},
    "modulator": {
        "v_pi_v",
        "bias_qrng_v",
        "bias_data_v",
        "rf_dc_crosstalk_db",
        "bias_shift_v",
        "bias_tolerance_vpi",
        "dc_lpf_hz",
        "native_dc_bw_hz",
    },
    "frame": {"period_s", "data_duty", "guard_s", "settle_fraction", "data_symbol_rate_hz"},
    "qpsk": {
        "symbol_rate_hz",
        "n_pols",
        "freq_offset_hz",
        "linewidth_hz",
        "cpr_window",
        "training_len",
    },
    "run": {"seed"},
}

_REQUIRED_SECTIONS = ("frontend", "adc", "plan", "suite", "run")


@dataclass(frozen=True)
class PlanParams:
    n_samples: int | None  # None: take whatever the source yields
    hmin: float | None  # None: estimate from the dark/lit decomposition
    hmin_convention: str
    epsilon: float
    paper_mode: bool


@dataclass(frozen=True)
class PipelineConfig:
    frontend: FrontendConfig
    side: SidechannelConfig
    adc: AdcConfig
    plan_params: PlanParams
    suite_params: SuiteParams
    suite_pass_floor: int
    modulator: ModulatorConfig | None
    frame: TdmFrame | None
    settle_fraction: float
    data_symbol_rate_hz: float
    qpsk: LinkConfig
    seed: int
    text: str  # canonical rendering, hashed into the manifest

    @property
    def mode(self) -> str:
        return self.frontend.mode

    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _parse_float(section: str, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: not a number: {value!r}") from exc


def _parse_bool(section: str, key: str, value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"[{section}] {key}: not a boolean: {value!r}")


def _parse_cmrr(value: str):
    if ":" not in value:
        return float(value)
    pairs = []
    for item in value.split(","):
        freq_txt, _, db_txt = item.partition(":")
        pairs.append((float(freq_txt), float(db_txt)))
    return tuple(pairs)


def _render(parser: configparser.ConfigParser) -> str:
    lines = []
    for section in sorted(parser.sections()):
        lines.append(f"[{section}]")
        for key in sorted(parser[section]):
            lines.append(f"{key} = {parser[section][key]}")
        lines.append("")
    return "\n".join(lines)


def load_config(
    profile: str | None = None,
    path=None,
    *,
    seed: int | None = None,
    paper_mode: bool | None = None,
) -> PipelineConfig:
    """Build a validated run configuration from a profile and/or a file.

    A file overlays the profile key by key.  ``seed`` and ``paper_mode``
    override the document (they mirror the CLI flags).
    """
    if profile is None and path is None:
        raise ConfigError("need a profile name or a config file")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; have {sorted(PROFILES)}")
        parser.read_string(PROFILES[profile])
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for section in _REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    def get(section: str, key: str, default: str | None = None) -> str:
        if parser.has_option(section, key):
            return parser[section][key].strip()
        if default is None:
            raise ConfigError(f"missing key {key!r} in section [{section}]")
        return default

    fe_sec = parser["frontend"]
    psd_txt = get("frontend", "electrical_noise_psd_v2_hz")
    has_clearance = "clearance_db" in fe_sec
    if psd_txt == "auto" and not has_clearance:
        raise ConfigError("electrical_noise_psd_v2_hz = auto needs clearance_db")
    if psd_txt != "auto" and has_clearance:
        raise ConfigError("give electrical_noise_psd_v2_hz or clearance_db, not both")
    frontend = FrontendConfig(
        mode=get("frontend", "mode"),
        source_power_dbm=_parse_float("frontend", "source_power_dbm", get("frontend", "source_power_dbm")),
        responsivity_a_per_w=_parse_float(
            "frontend", "responsivity_a_per_w", get("frontend", "responsivity_a_per_w")
        ),
        transimpedance_dbohm=_parse_float(
            "frontend", "transimpedance_dbohm", get("frontend", "transimpedance_dbohm")
        ),
        detector_bandwidth_hz=_parse_float(
            "frontend", "detector_bandwidth_hz", get("frontend", "detector_bandwidth_hz")
        ),
        optical_path_loss_db=_parse_float(
            "frontend", "optical_path_loss_db", get("frontend", "optical_path_loss_db", "0")
        ),
        cmrr_db=_parse_cmrr(get("frontend", "cmrr_db", "34.0")),
        electrical_noise_psd=(
            1e-18 if psd_txt == "auto" else _parse_float("frontend", "psd", psd_txt)
        ),
    )
    if psd_txt == "auto":
        clearance = _parse_float("frontend", "clearance_db", get("frontend", "clearance_db"))
        frontend = with_calibrated_noise(frontend, clearance)

    side = SidechannelConfig()
    if parser.has_section("sidechannel"):
        enabled = _parse_bool("sidechannel", "enabled", get("sidechannel", "enabled", "false"))
        if enabled:
            channel = SideChannel(
                received_power_dbm=_parse_float(
                    "sidechannel", "received_power_dbm", get("sidechannel", "received_power_dbm")
                ),
                symbol_rate_hz=_parse_float(
                    "sidechannel", "symbol_rate_hz", get("sidechannel", "symbol_rate_hz")
                ),
                pulse_rolloff=_parse_float(
                    "sidechannel", "pulse_rolloff", get("sidechannel", "pulse_rolloff", "0.2")
                ),
            )
            side = SidechannelConfig(enabled=True, channels=(channel,))

    fs_txt = get("adc", "full_scale_v")
    adc = AdcConfig(
        sample_rate_hz=_parse_float("adc", "sample_rate_hz", get("adc", "sample_rate_hz")),
        bits=int(get("adc", "bits")),
        full_scale_v=(
            auto_full_scale(
                frontend, _parse_float("adc", "sample_rate_hz", get("adc", "sample_rate_hz"))
            )
            if fs_txt == "auto"
            else _parse_float("adc", "full_scale_v", fs_txt)
        ),
        interleave_spur_dbc=_parse_float(
            "adc", "interleave_spur_dbc", get("adc", "interleave_spur_dbc", "-20")
        ),
    )

    n_samples_txt = get("plan", "n_samples")
    hmin_txt = get("plan", "hmin")
    plan_params = PlanParams(
        n_samples=None if n_samples_txt == "auto" else int(n_samples_txt),
        hmin=None if hmin_txt == "auto" else _parse_float("plan", "hmin", hmin_txt),
        hmin_convention=get("plan", "hmin_convention", "per_sample"),
        epsilon=2.0 ** -_parse_float("plan", "epsilon_exponent", get("plan", "epsilon_exponent", "64")),
        paper_mode=_parse_bool("plan", "paper_mode", get("plan", "paper_mode", "false")),
    )
    if plan_params.hmin_convention not in ("per_sample", "per_raw_bit"):
        raise ConfigError("hmin_convention must be per_sample or per_raw_bit")

    suite_params = SuiteParams(alpha=_parse_float("suite", "alpha", get("suite", "alpha", "0.01")))
    pass_floor = int(get("suite", "pass_floor", "185"))
    if not 0 <= pass_floor <= suite_params.instance_count():
        raise ConfigError("pass_floor outside 0..188")

    modulator = None
    frame = None
    settle_fraction = 0.01
    data_symbol_rate_hz = 100e6
    if frontend.mode == "transmitter":
        if not parser.has_section("modulator") or not parser.has_section("frame"):
            raise ConfigError("transmitter mode needs [modulator] and [frame] sections")
        modulator = ModulatorConfig(
            v_pi_v=_parse_float("modulator", "v_pi_v", get("modulator", "v_pi_v")),
            bias_points_qrng_v=(
                _parse_float("modulator", "bias_qrng_v", get("modulator", "bias_qrng_v")),
            )
            * 2,
            bias_points_data_v=(
                _parse_float("modulator", "bias_data_v", get("modulator", "bias_data_v")),
            )
            * 2,
            rf_dc_crosstalk_db=_parse_float(
                "modulator", "rf_dc_crosstalk_db", get("modulator", "rf_dc_crosstalk_db", "-7.6")
            ),
            bias_shift_v=_parse_float(
                "modulator", "bias_shift_v", get("modulator", "bias_shift_v", "1.56")
            ),
            bias_tolerance_vpi=_parse_float(
                "modulator", "bias_tolerance_vpi", get("modulator", "bias_tolerance_vpi", "0.05")
            ),
            dc_lpf_hz=_parse_float("modulator", "dc_lpf_hz", get("modulator", "dc_lpf_hz")),
            native_dc_bw_hz=_parse_float(
                "modulator", "native_dc_bw_hz", get("modulator", "native_dc_bw_hz")
            ),
        )
        frame = TdmFrame(
            period_s=_parse_float("frame", "period_s", get("frame", "period_s")),
            data_duty=_parse_float("frame", "data_duty", get("frame", "data_duty")),
            guard_s=_parse_float("frame", "guard_s", get("frame", "guard_s")),
            sample_rate_hz=adc.sample_rate_hz,
        )
        settle_fraction = _parse_float(
            "frame", "settle_fraction", get("frame", "settle_fraction", "0.01")
        )
        data_symbol_rate_hz = _parse_float(
            "frame", "data_symbol_rate_hz", get("frame", "data_symbol_rate_hz", "100e6")
        )

    qpsk = LinkConfig()
    if parser.has_section("qpsk"):
        qpsk = LinkConfig(
            symbol_rate_hz=_parse_float(
                "qpsk", "symbol_rate_hz", get("qpsk", "symbol_rate_hz", "10e9")
            ),
            n_pols=int(get("qpsk", "n_pols", "1")),
            esn0_db=10.0,
            freq_offset_hz=_parse_float(
                "qpsk", "freq_offset_hz", get("qpsk", "freq_offset_hz", "0")
            ),
            linewidth_hz=_parse_float("qpsk", "linewidth_hz", get("qpsk", "linewidth_hz", "0")),
            cpr_window=int(get("qpsk", "cpr_window", "33")),
            training_len=int(get("qpsk", "training_len", "64")),
        )

    run_seed = int(get("run", "seed"))
    if seed is not None:
        run_seed = int(seed)
    if paper_mode is not None:
        plan_params = replace(plan_params, paper_mode=bool(paper_mode))

    return PipelineConfig(
        frontend=frontend,
        side=side,
        adc=adc,
        plan_params=plan_params,
        suite_params=suite_params,
        suite_pass_floor=pass_floor,
        modulator=modulator,
        frame=frame,
        settle_fraction=settle_fraction,
        data_symbol_rate_hz=data_symbol_rate_hz,
        qpsk=qpsk,
        seed=run_seed,
        text=_render(parser),
    )


def simulate_one(cfg: PipelineConfig, lit: bool) -> SampleBlock:
    """Simulate a single block; dark runs use seed + 1 so the two differ."""
    seed = cfg.seed if lit else cfg.seed + 1
    if cfg.mode == "transmitter":
        if cfg.modulator is None or cfg.frame is None:
            raise ConfigError("transmitter mode needs modulator and frame configs")
        trace = simulate_tx_frame(
            cfg.frontend,
            cfg.modulator,
            cfg.frame,
            lit,
            seed,
            settle_fraction=cfg.settle_fraction,
            data_symbol_rate_hz=cfg.data_symbol_rate_hz,
        )
        return block_from_voltages(
            trace.tia_v[trace.valid],
            cfg.adc,
            lit=lit,
            frontend_tag=cfg.frontend.tag,
            rng_seed_used=seed,
        )
    n = cfg.plan_params.n_samples
    if n is None:
        raise ConfigError("receiver mode needs an explicit [plan] n_samples")
    return simulate_block(cfg.frontend, cfg.side, cfg.adc, n, seed, lit=lit)


def simulate_lit_dark(cfg: PipelineConfig) -> tuple[SampleBlock, SampleBlock]:
    return simulate_one(cfg, True), simulate_one(cfg, False)


@dataclass(frozen=True)
class PipelineResult:
    decomposition: VarianceDecomposition
    hmin_per_sample: float
    plan: ExtractionPlan
    raw_report: SuiteReport
    extracted_report: SuiteReport
    key: Bitstream
    seed_fingerprint: str
    outputs: dict
    suite_pass_floor: int

    @property
    def passed(self) -> bool:
        # Not-applicable instances carry no evidence either way, so the
        # floor bounds the failures among applicable instances: excursions
        # drop out on roughly a third of healthy 1 Mibit runs (J < 500).
        report = self.extracted_report
        return report.n_pass + report.n_na >= self.suite_pass_floor


def build_plan(cfg: PipelineConfig, decomp: VarianceDecomposition, n_samples: int) -> ExtractionPlan:
    """Plan sizing from config or, with hmin = auto, the measured decomposition."""
    params = cfg.plan_params
    if params.n_samples is not None and params.n_samples != n_samples:
        raise ConfigError(
            f"[plan] n_samples = {params.n_samples} but the source yielded {n_samples}"
        )
    if params.hmin is not None:
        hmin = params.hmin
        convention = params.hmin_convention
    else:
        hmin = min_entropy_per_sample(decomp.sigma_quantum_v, cfg.adc, worst_case_offset=True)
        convention = "per_sample"
    return ExtractionPlan.create(
        n_samples=n_samples,
        bits_per_sample_raw=cfg.adc.bits,
        hmin=hmin,
        epsilon=params.epsilon,
        paper_mode=params.paper_mode,
        hmin_convention=convention,
    )


def _entropy_csv(path, decomp: VarianceDecomposition, plan: ExtractionPlan) -> None:
    rows = [
        ("sigma2_total_v2", decomp.sigma2_total_v2),
        ("sigma2_electrical_v2", decomp.sigma2_electrical_v2),
        ("sigma2_quantum_v2", decomp.sigma2_quantum_v2),
        ("clearance_db", decomp.clearance_db),
        ("hmin_per_sample_bits", plan.hmin_per_sample),
        ("n_samples", plan.n_samples),
        ("bits_per_sample_raw", plan.bits_per_sample_raw),
        ("m_out_bits", plan.m_out),
        ("epsilon", plan.epsilon if plan.epsilon is not None else ""),
        ("paper_mode", int(plan.paper_mode)),
    ]
    with open(path, "w") as fh:
        fh.write("quantity,value\n")
        for name, value in rows:
            fh.write(f"{name},{value}\n")


def run_pipeline(cfg: PipelineConfig, out_dir, *, jobs: int = 1) -> PipelineResult:
    """Simulate, decompose, plan, extract, test, and write the report bundle."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lit, dark = simulate_lit_dark(cfg)
    decomp = variance_decompose(dark, lit)
    plan = build_plan(cfg, decomp, len(lit))

    raw = serialize_samples(lit)
    n_raw = min(RAW_SUITE_BITS, (len(raw) // 8) * 8)
    raw_slice = Bitstream(data=raw.data[: n_raw // 8], length=n_raw)
    raw_report = run_suite(raw_slice, cfg.suite_params, jobs=jobs)

    toeplitz = seed_new(plan.n_bits_in, plan.m_out, cfg.seed)
    key = extract_stream([lit], plan, toeplitz)
    extracted_report = run_suite(key, cfg.suite_params, jobs=jobs)

    outputs = {}

    def emit(name: str, writer) -> None:
        path = out / name
        writer(path)
        outputs[name] = str(path)

    emit("capture_lit.vqrn", lambda p: qio.write_capture(p, lit))
    emit("capture_dark.vqrn", lambda p: qio.write_capture(p, dark))
    emit("entropy.csv", lambda p: _entropy_csv(p, decomp, plan))
    emit("suite_raw.csv", lambda p: report_to_csv(raw_report, p))
    emit("suite_extracted.csv", lambda p: report_to_csv(extracted_report, p))
    emit("key.bin", lambda p: qio.write_key(p, key))
    emit("toeplitz_seed.tsee", lambda p: qio.write_seed(p, toeplitz))

    manifest = {
        "config_sha256": cfg.digest(),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "hmin_per_sample_bits": plan.hmin_per_sample,
        "m_out_bits": plan.m_out,
        "paper_mode": plan.paper_mode,
        "seed_fingerprint": toeplitz.fingerprint(),
        "raw_suite_pass": raw_report.n_pass,
        "raw_suite_fail": raw_report.n_fail,
        "extracted_suite_pass": extracted_report.n_pass,
        "extracted_suite_fail": extracted_report.n_fail,
        "suite_pass_floor": cfg.suite_pass_floor,
    }
    if cfg.mode == "transmitter" and cfg.frame is not None and cfg.modulator is not None:
        manifest["valid_fraction"] = valid_fraction(
            cfg.frame, cfg.modulator, cfg.settle_fraction
        )
    for name in sorted(outputs):
        manifest[f"sha256_{name}"] = qio.sha256_file(outputs[name])
    emit("manifest.txt", lambda p: qio.write_manifest(p, manifest))

    return PipelineResult(
        decomposition=decomp,
        hmin_per_sample=plan.hmin_per_sample,
        plan=plan,
        raw_report=raw_report,
        extracted_report=extracted_report,
        key=key,
        seed_fingerprint=toeplitz.fingerprint(),
        outputs=outputs,
        suite_pass_floor=cfg.suite_pass_floor,
    )
