"""Modulator-as-front-end model: MZM transfer, bias tones, TDM frames.

The transmitter shares its modulator between data transmission and vacuum
noise acquisition by time-division multiplexing.  This module carries the
cos^2 power transfer, the bias-tone harmonic diagnostic (even harmonics
dominate at the exact null; the fundamental returns when the RF drive
shifts the bias point), the TDM schedule, the LPF-limited bias transient
with its settle-time arithmetic, the valid-sample mask, and a full-frame
trace simulation with saturating TIA behavior during transients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConfigError, EmptyMaskError
from .frontend import FrontendConfig, noise_enbw_hz, noise_trace_v, shot_noise_voltage_psd
from .qpsk import qpsk_modulate
from .rng import make_rng

__all__ = [
    "ModulatorConfig",
    "TdmFrame",
    "HarmonicTable",
    "TxFrameTrace",
    "mzm_power_transfer",
    "bias_tone_spectrum",
    "tdm_schedule",
    "settle_time_s",
    "settle_mask",
    "valid_fraction",
    "simulate_tx_frame",
    "tx_frame_to_csv",
]

_STREAM_NOISE = 0
_STREAM_DRIVE = 6

# index-grid slack for slot boundaries that land on exact sample ticks
_TICK_EPS = 1e-6


@dataclass(frozen=True)
class ModulatorConfig:
    """Electro-optic and bias-path parameters of one modulator branch."""

    v_pi_v: float = 3.714
    bias_points_qrng_v: tuple[float, ...] = (3.714, 3.714)
    bias_points_data_v: tuple[float, ...] = (1.857, 1.857)
    rf_dc_crosstalk_db: float = -7.6
    bias_shift_v: float = 1.56
    bias_tolerance_vpi: float = 0.05
    dc_lpf_hz: float = 22e3
    native_dc_bw_hz: float = 700e3

    def __post_init__(self) -> None:
        if self.v_pi_v <= 0:
            raise ConfigError("v_pi_v must be positive")
        if not self.bias_points_qrng_v or not self.bias_points_data_v:
            raise ConfigError("bias point lists must be non-empty")
        if len(self.bias_points_qrng_v) != len(self.bias_points_data_v):
            raise ConfigError("bias point lists must have equal length")
        if not 0.0 < self.bias_tolerance_vpi < 0.5:
            raise ConfigError("bias_tolerance_vpi must be in (0, 0.5)")
        if not 0.0 < self.dc_lpf_hz < self.native_dc_bw_hz:
            raise ConfigError("dc_lpf_hz must be positive and below native_dc_bw_hz")

    def bias_within_tolerance(self, v: float, target_v: float) -> bool:
        return abs(v - target_v) <= self.bias_tolerance_vpi * self.v_pi_v


@dataclass(frozen=True)
class TdmFrame:
    period_s: float = 10e-3
    data_duty: float = 0.7
    guard_s: float = 100e-6
    sample_rate_hz: float = 1e9

    def __post_init__(self) -> None:
        if self.period_s <= 0 or self.sample_rate_hz <= 0:
            raise ConfigError("period and sample rate must be positive")
        if not 0.0 < self.data_duty < 1.0:
            raise ConfigError("data_duty must be in (0, 1)")
        if self.guard_s < 0 or 2.0 * self.guard_s >= (1.0 - self.data_duty) * self.period_s:
            raise ConfigError("guard_s too large for the qrng slot")

    @property
    def n_samples(self) -> int:
        return int(round(self.period_s * self.sample_rate_hz))


@dataclass(frozen=True)
class HarmonicTable:
    """Bias-tone lines: (harmonic index, frequency Hz, power dBc)."""

    entries: tuple[tuple[int, float, float], ...]

    def __post_init__(self) -> None:
        indices = [k for k, _, _ in self.entries]
        if len(set(indices)) != len(indices):
            raise ConfigError("harmonic indices must be distinct")
        powers = [p for _, _, p in self.entries]
        if any(p > 0.0 for p in powers) or powers.count(0.0) != 1:
            raise ConfigError("powers must be <= 0 dBc with exactly one 0 dBc line")

    def power_dbc(self, k: int) -> float:
        for idx, _, p in self.entries:
            if idx == k:
                return p
        raise KeyError(k)

    @property
    def dominant(self) -> int:
        for idx, _, p in self.entries:
            if p == 0.0:
                return idx
        raise RuntimeError("unreachable: no 0 dBc entry")


def mzm_power_transfer(v_total_v, v_pi_v: float, p_in_w: float):
    """Interferometric power transfer p_in * cos^2(pi*V/(2*Vpi)).

    Peak at V = 0, null at V = Vpi, periodic in 2*Vpi.
    """
    if v_pi_v <= 0:
        raise ConfigError("v_pi_v must be positive")
    if p_in_w < 0:
        raise ConfigError("p_in_w must be >= 0")
    return p_in_w * np.cos(np.pi * np.asarray(v_total_v, dtype=np.float64) / (2.0 * v_pi_v)) ** 2


def bias_tone_spectrum(
    cfg: ModulatorConfig,
    tone_amp_v: float,
    f_t_hz: float,
    rf_on: bool,
    *,
    samples_per_period: int = 256,
    n_periods: int = 16,
) -> HarmonicTable:
    """Harmonic content of the monitor signal under a small bias dither.

    Evaluates the transfer at the exact null with a sinusoidal dither over
    an integer number of periods and reports the first five harmonics in
    dBc relative to the strongest.  With the RF drive off the even
    harmonics dominate (cos^2 is extremal at the null); the RF-induced
    bias shift restores the fundamental.
    """
    if f_t_hz <= 0:
        raise ConfigError("f_t_hz must be positive")
    if not 0.0 < tone_amp_v <= 0.1 * cfg.v_pi_v:
        raise ConfigError("tone amplitude outside the small-signal range (0, 0.1*v_pi]")
    n_total = samples_per_period * n_periods
    t = np.arange(n_total) / (samples_per_period * f_t_hz)
    bias = cfg.v_pi_v + (cfg.bias_shift_v if rf_on else 0.0)
    v = bias + tone_amp_v * np.sin(2.0 * np.pi * f_t_hz * t)
    power = mzm_power_transfer(v, cfg.v_pi_v, 1.0)
    spectrum = np.fft.rfft(power) / n_total
    line_power = []
    for k in range(1, 6):
        amp = spectrum[k * n_periods]
        line_power.append(2.0 * float(np.abs(amp)) ** 2)
    strongest = max(line_power)
    entries = tuple(
        (k, k * f_t_hz, 10.0 * math.log10(p / strongest) if p > 0 else -math.inf)
        for k, p in zip(range(1, 6), line_power)
    )
    return HarmonicTable(entries=entries)


def tdm_schedule(frame: TdmFrame) -> tuple[tuple[str, float, float], ...]:
    """Two contiguous slots per period: data then qrng."""
    boundary = frame.data_duty * frame.period_s
    return (("data", 0.0, boundary), ("qrng", boundary, frame.period_s))


def settle_time_s(cfg: ModulatorConfig, settle_fraction: float = 0.01) -> float:
    """First-order settling: tau*ln(1/fraction) with tau = 1/(2*pi*f_lpf)."""
    if not 0.0 < settle_fraction < 1.0:
        raise ConfigError("settle_fraction must be in (0, 1)")
    tau = 1.0 / (2.0 * math.pi * cfg.dc_lpf_hz)
    return tau * math.log(1.0 / settle_fraction)


def _valid_window_s(
    frame: TdmFrame, cfg: ModulatorConfig, settle_fraction: float
) -> tuple[float, float]:
    start = frame.data_duty * frame.period_s + settle_time_s(cfg, settle_fraction)
    end = frame.period_s - frame.guard_s
    if start >= end:
        raise EmptyMaskError("settle time plus guard consume the whole qrng slot")
    return start, end


def settle_mask(
    frame: TdmFrame, cfg: ModulatorConfig, settle_fraction: float = 0.01
) -> np.ndarray:
    """Per-sample validity over one period; true only inside the qrng slot.

    Samples count as valid from t_settle after the slot boundary until
    guard_s before the period end.
    """
    start_s, end_s = _valid_window_s(frame, cfg, settle_fraction)
    fs = frame.sample_rate_hz
    idx = np.arange(frame.n_samples)
    mask = (idx >= start_s * fs - _TICK_EPS) & (idx < end_s * fs - _TICK_EPS)
    if not mask.any():
        raise EmptyMaskError("no sample falls inside the valid window")
    return mask


def valid_fraction(
    frame: TdmFrame, cfg: ModulatorConfig, settle_fraction: float = 0.01
) -> float:
    """Fraction of the period yielding valid samples (key-rate duty input)."""
    start_s, end_s = _valid_window_s(frame, cfg, settle_fraction)
    return (end_s - start_s) / frame.period_s


@dataclass(frozen=True, eq=False)
class TxFrameTrace:
    monitor_w: np.ndarray
    tia_v: np.ndarray
    valid: np.ndarray
    sample_rate_hz: float

    def __post_init__(self) -> None:
        if not (self.monitor_w.size == self.tia_v.size == self.valid.size):
            raise ConfigError("trace arrays must have equal length")


def simulate_tx_frame(
    frontend: FrontendConfig,
    cfg: ModulatorConfig,
    frame: TdmFrame,
    lit: bool,
    rng_seed: int,
    *,
    settle_fraction: float = 0.01,
    data_symbol_rate_hz: float = 100e6,
) -> TxFrameTrace:
    """One TDM period: monitor power, TIA voltage, and the validity mask.

    The bias square wave (data set <-> qrng set) is low-passed by the bias
    line; inside the qrng slot the TIA output is pinned at its clip level
    until the residual imbalance decays below settle_fraction.  The data
    slot carries the QPSK drive; without the optical seed only its RF-to-DC
    crosstalk replica remains, and the qrng window reduces to the
    electrical noise floor.  The filter starts from the settled qrng bias,
    so concatenated periods are continuous in the bias state.
    """
    if frontend.mode != "transmitter":
        raise ConfigError("simulate_tx_frame requires a transmitter front end")
    fs = frame.sample_rate_hz
    n = frame.n_samples
    sps_f = fs / data_symbol_rate_hz
    sps = int(round(sps_f))
    if sps < 1 or abs(sps_f - sps) > 1e-9:
        raise ConfigError("data symbol rate must divide the frame sample rate")

    idx = np.arange(n)
    boundary_i = frame.data_duty * frame.period_s * fs
    in_data = idx < boundary_i - _TICK_EPS
    in_qrng = ~in_data

    # bias trajectory through the single-pole bias-line filter
    v_data = cfg.bias_points_data_v[0]
    v_qrng = cfg.bias_points_qrng_v[0]
    applied = np.where(in_data, v_data, v_qrng)
    tau = 1.0 / (2.0 * math.pi * cfg.dc_lpf_hz)
    alpha = math.exp(-1.0 / (fs * tau))
    filtered, _ = signal.lfilter([1.0 - alpha], [1.0, -alpha], applied, zi=[alpha * v_qrng])
    v_eff = filtered + cfg.bias_shift_v * in_data

    # QPSK drive, rectangular hold at the desk-scale symbol rate
    n_sym = -(-n // sps)
    drive_bits = make_rng(rng_seed, _STREAM_DRIVE).integers(0, 2, size=2 * n_sym, dtype=np.uint8)
    m = np.repeat(qpsk_modulate(drive_bits).real * math.sqrt(2.0), sps)[:n]

    s_total = shot_noise_voltage_psd(frontend) + frontend.electrical_noise_psd
    sigma_lit = math.sqrt(s_total * noise_enbw_hz(frontend, fs))
    clip_v = 10.0 * sigma_lit
    drive_amp = 0.5 * clip_v
    crosstalk = 10.0 ** (cfg.rf_dc_crosstalk_db / 20.0)

    if lit:
        v_drive = 0.3 * cfg.v_pi_v * m * in_data
        monitor = mzm_power_transfer(v_eff + v_drive, cfg.v_pi_v, frontend.delivered_power_w)
        data_wave = drive_amp * m * in_data
    else:
        monitor = np.zeros(n)
        data_wave = crosstalk * drive_amp * m * in_data

    noise = noise_trace_v(frontend, n, fs, make_rng(rng_seed, _STREAM_NOISE), lit=lit)
    tia = noise + data_wave

    t_settle = settle_time_s(cfg, settle_fraction)
    sat_end_i = (frame.data_duty * frame.period_s + t_settle) * fs
    saturated = in_qrng & (idx < sat_end_i - _TICK_EPS)
    tia[saturated] = clip_v
    np.clip(tia, -clip_v, clip_v, out=tia)

    valid = settle_mask(frame, cfg, settle_fraction)
    return TxFrameTrace(monitor_w=monitor, tia_v=tia, valid=valid, sample_rate_hz=fs)


def tx_frame_to_csv(trace: TxFrameTrace, path) -> None:
    times = np.arange(trace.monitor_w.size) / trace.sample_rate_hz
    with open(path, "w") as fh:
        fh.write("time_s,monitor_w,tia_v,valid\n")
        for t, mon, tia, ok in zip(times, trace.monitor_w, trace.tia_v, trace.valid):
            fh.write(f"{t:.9e},{mon:.6e},{tia:.6e},{int(ok)}\n")
