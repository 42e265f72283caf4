"""Homodyne front-end model and block simulator.

Modeled chain: the local oscillator / optical seed produces shot noise at a
pair of balanced photodiodes, a transimpedance stage converts it to volts,
the combined quantum + electrical noise is shaped by the detector response
(second-order Butterworth magnitude), residual side-channel intensity leaks
in below the common-mode rejection, an interleave spur sits at fs/4, and a
mid-tread ADC quantizes the result.

Spectral densities are one-sided throughout (V^2/Hz at the TIA output).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, signal

from .errors import ConfigError
from .rng import make_rng

ELEMENTARY_CHARGE_C = 1.602176634e-19

# Draw order inside simulate_block; fixed so a seed reproduces a block even
# when individual stages are toggled off (disabled stages still consume no
# draws, so toggling *does* change later streams -- hence per-stage labels).
_STREAM_NOISE = 0
_STREAM_SIDE = 1
_STREAM_SPUR = 2


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(p_w / 1e-3)


def db_to_ratio(db: float) -> float:
    """dB -> linear power ratio."""
    return 10.0 ** (db / 10.0)


def ratio_to_db(ratio: float) -> float:
    return 10.0 * math.log10(ratio)


@dataclass(frozen=True)
class FrontendConfig:
    """Optical receiver or monitor-photodiode front end.

    Parameters
    ----------
    mode:
        "receiver" (coherent intradyne) or "transmitter" (modulator monitor
        photodiodes).  Purely descriptive; the noise model is shared.
    source_power_dbm:
        Continuous-wave power of the optical seed at its source.
    responsivity_a_per_w:
        Photodiode responsivity.
    transimpedance_dbohm:
        TIA gain, 20*log10(ohms).
    detector_bandwidth_hz:
        3 dB point of the opto-electronic response.
    optical_path_loss_db:
        Total loss from the source to the photodiode pair.
    cmrr_db:
        Common-mode rejection of the balanced pair.  Either a scalar or a
        table of (frequency_hz, cmrr_db) points, interpolated linearly and
        clamped at the ends.
    electrical_noise_psd:
        One-sided electrical noise floor at the TIA output, V^2/Hz.  See
        :func:`calibrate_electrical_noise`.
    """

    mode: str
    source_power_dbm: float
    responsivity_a_per_w: float
    transimpedance_dbohm: float
    detector_bandwidth_hz: float
    optical_path_loss_db: float
    cmrr_db: float | tuple[tuple[float, float], ...]
    electrical_noise_psd: float

    def __post_init__(self) -> None:
        if self.mode not in ("receiver", "transmitter"):
            raise ConfigError(f"unknown front-end mode {self.mode!r}")
        if not math.isfinite(self.source_power_dbm):
            raise ConfigError("source_power_dbm must be finite")
        if not 0.0 < self.responsivity_a_per_w <= 2.0:
            raise ConfigError("responsivity_a_per_w must be in (0, 2]")
        if self.detector_bandwidth_hz <= 0:
            raise ConfigError("detector_bandwidth_hz must be positive")
        if self.optical_path_loss_db < 0:
            raise ConfigError("optical_path_loss_db must be >= 0")
        if self.electrical_noise_psd <= 0:
            raise ConfigError("electrical_noise_psd must be positive")
        if not isinstance(self.cmrr_db, (int, float)):
            table = tuple((float(f), float(v)) for f, v in self.cmrr_db)
            if not table:
                raise ConfigError("cmrr_db table must be non-empty")
            freqs = [f for f, _ in table]
            if sorted(freqs) != freqs or len(set(freqs)) != len(freqs):
                raise ConfigError("cmrr_db table frequencies must be strictly increasing")
            if any(v < 0 for _, v in table):
                raise ConfigError("cmrr_db must be >= 0")
            object.__setattr__(self, "cmrr_db", table)
        elif self.cmrr_db < 0:
            raise ConfigError("cmrr_db must be >= 0")

    @property
    def source_power_w(self) -> float:
        return dbm_to_watts(self.source_power_dbm)

    @property
    def delivered_power_w(self) -> float:
        """Optical power reaching the photodiode pair."""
        return self.source_power_w / db_to_ratio(self.optical_path_loss_db)

    @property
    def transimpedance_ohm(self) -> float:
        return 10.0 ** (self.transimpedance_dbohm / 20.0)

    def cmrr_at(self, freq_hz: float) -> float:
        """CMRR in dB at ``freq_hz``; table entries interpolate linearly."""
        if isinstance(self.cmrr_db, (int, float)):
            return float(self.cmrr_db)
        freqs = np.array([f for f, _ in self.cmrr_db])
        vals = np.array([v for _, v in self.cmrr_db])
        return float(np.interp(freq_hz, freqs, vals))

    @property
    def tag(self) -> str:
        """Short stable identifier of this configuration."""
        digest = hashlib.sha256(repr(self).encode()).hexdigest()
        return f"{self.mode}-{digest[:10]}"


@dataclass(frozen=True)
class SideChannel:
    """One co-propagating modulated channel leaking into the detector."""

    received_power_dbm: float
    symbol_rate_hz: float
    pulse_rolloff: float = 0.2

    def __post_init__(self) -> None:
        if self.symbol_rate_hz <= 0:
            raise ConfigError("symbol_rate_hz must be positive")
        if not 0.0 < self.pulse_rolloff <= 1.0:
            raise ConfigError("pulse_rolloff must be in (0, 1]")


@dataclass(frozen=True)
class SidechannelConfig:
    enabled: bool = False
    channels: tuple[SideChannel, ...] = ()

    def __post_init__(self) -> None:
        if self.enabled and not self.channels:
            raise ConfigError("sidechannel enabled but no channels given")


@dataclass(frozen=True)
class AdcConfig:
    """Mid-tread quantizer with a signed code range.

    ``full_scale_v`` is the peak-to-peak input range, so the LSB is
    full_scale_v / 2**bits and codes span [-2**(bits-1), 2**(bits-1) - 1].
    """

    sample_rate_hz: float
    bits: int
    full_scale_v: float
    interleave_spur_dbc: float = -20.0

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if not 4 <= self.bits <= 16:
            raise ConfigError("bits must be in [4, 16]")
        if self.full_scale_v <= 0:
            raise ConfigError("full_scale_v must be positive")
        if self.interleave_spur_dbc > 0:
            raise ConfigError("interleave_spur_dbc must be <= 0 (or -inf to disable)")

    @property
    def lsb_v(self) -> float:
        return self.full_scale_v / (1 << self.bits)

    @property
    def code_min(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def code_max(self) -> int:
        return (1 << (self.bits - 1)) - 1


@dataclass(frozen=True, eq=False)
class SampleBlock:
    """One contiguous quantized acquisition."""

    samples: np.ndarray
    adc: AdcConfig
    frontend_tag: str
    lit: bool
    rng_seed_used: int | None
    clip_warning: bool = False

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.int16)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigError("samples must be a non-empty 1-d array")
        if arr.min() < self.adc.code_min or arr.max() > self.adc.code_max:
            raise ConfigError("sample codes exceed the ADC range")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return int(self.samples.size)

    def volts(self) -> np.ndarray:
        """De-quantized samples in volts."""
        return self.samples.astype(np.float64) * self.adc.lsb_v


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    freqs_hz: np.ndarray
    psd_v2_per_hz: np.ndarray
    segment_len: int
    n_segments: int

    def __post_init__(self) -> None:
        for name in ("freqs_hz", "psd_v2_per_hz"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def df_hz(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def total_power(self) -> float:
        """Integrated power, V^2 (trapezoid-free bin sum)."""
        return float(np.sum(self.psd_v2_per_hz) * self.df_hz)


def shot_noise_current_psd(optical_power_w: float, responsivity_a_per_w: float) -> float:
    """One-sided shot-noise PSD 2*q*R*P of the detected photocurrent, A^2/Hz."""
    if optical_power_w < 0:
        raise ValueError("optical power must be >= 0")
    if responsivity_a_per_w <= 0:
        raise ValueError("responsivity must be positive")
    return 2.0 * ELEMENTARY_CHARGE_C * responsivity_a_per_w * optical_power_w


def shot_noise_voltage_psd(frontend: FrontendConfig) -> float:
    """In-band quantum noise PSD at the TIA output, V^2/Hz, before roll-off."""
    s_i = shot_noise_current_psd(frontend.delivered_power_w, frontend.responsivity_a_per_w)
    return s_i * frontend.transimpedance_ohm**2


def detector_response_sq(freq_hz, f3db_hz: float):
    """|H(f)|^2 of the second-order Butterworth detector response."""
    return 1.0 / (1.0 + (np.asarray(freq_hz, dtype=np.float64) / f3db_hz) ** 4)


def clearance_ratio_db(s_quantum: float, s_electrical: float) -> float:
    """10*log10((S_q + S_e) / S_e); 0 dB when the source is off."""
    if s_electrical <= 0:
        raise ValueError("electrical PSD must be positive")
    if s_quantum < 0:
        raise ValueError("quantum PSD must be >= 0")
    return 10.0 * math.log10((s_quantum + s_electrical) / s_electrical)


def clearance_db(frontend: FrontendConfig, freq_hz):
    """Quantum-to-electrical clearance at ``freq_hz`` (scalar or array).

    The quantum PSD rolls off with the detector response; the electrical
    floor at the TIA output is taken flat.  Monotonically non-increasing
    in frequency.
    """
    s_q0 = shot_noise_voltage_psd(frontend)
    s_q = s_q0 * detector_response_sq(freq_hz, frontend.detector_bandwidth_hz)
    out = 10.0 * np.log10((s_q + frontend.electrical_noise_psd) / frontend.electrical_noise_psd)
    if np.ndim(freq_hz) == 0:
        return float(out)
    return out


def calibrate_electrical_noise(target_clearance_db: float, frontend: FrontendConfig) -> float:
    """Electrical noise PSD giving the requested low-frequency clearance.

    Inverts clearance = 10*log10((S_q + S_e)/S_e) for S_e, with S_q the
    flat in-band shot-noise PSD at the TIA output.
    """
    if target_clearance_db <= 0:
        raise ConfigError("target clearance must be positive")
    s_q = shot_noise_voltage_psd(frontend)
    return s_q / (db_to_ratio(target_clearance_db) - 1.0)


def with_calibrated_noise(frontend: FrontendConfig, target_clearance_db: float) -> FrontendConfig:
    """Copy of ``frontend`` with the electrical floor set for the target clearance."""
    s_e = calibrate_electrical_noise(target_clearance_db, frontend)
    return replace(frontend, electrical_noise_psd=s_e)


def noise_enbw_hz(frontend: FrontendConfig, sample_rate_hz: float) -> float:
    """Equivalent noise bandwidth of the simulated band, Hz.

    Integral of |H(f)|^2 from 0 to Nyquist; every white noise source in
    :func:`simulate_block` passes through H, so its variance is PSD * ENBW.
    """
    f0 = frontend.detector_bandwidth_hz
    upper = sample_rate_hz / 2.0
    val, _ = integrate.quad(lambda f: 1.0 / (1.0 + (f / f0) ** 4), 0.0, upper, limit=200)
    return float(val)


def auto_full_scale(frontend: FrontendConfig, sample_rate_hz: float) -> float:
    """Default ADC range: 16x the RMS of the lit signal (+-8 sigma)."""
    s_total = shot_noise_voltage_psd(frontend) + frontend.electrical_noise_psd
    rms = math.sqrt(s_total * noise_enbw_hz(frontend, sample_rate_hz))
    return 16.0 * rms


def quantize(value_v: float, adc: AdcConfig) -> int:
    """Mid-tread quantization of a single voltage to a signed code.

    round(value / LSB), ties to even, clamped to the code range.
    """
    code = int(np.rint(value_v / adc.lsb_v))
    return max(adc.code_min, min(adc.code_max, code))


def _quantize_array(values_v: np.ndarray, adc: AdcConfig) -> tuple[np.ndarray, float]:
    codes = np.rint(values_v / adc.lsb_v)
    clipped = (codes < adc.code_min) | (codes > adc.code_max)
    clip_fraction = float(np.mean(clipped))
    codes = np.clip(codes, adc.code_min, adc.code_max)
    return codes.astype(np.int16), clip_fraction


def _shape_by_detector(x: np.ndarray, sample_rate_hz: float, f3db_hz: float) -> np.ndarray:
    """Apply the |H(f)| magnitude response in the frequency domain."""
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, d=1.0 / sample_rate_hz)
    spec *= np.sqrt(detector_response_sq(freqs, f3db_hz))
    return np.fft.irfft(spec, n=x.size)


def noise_trace_v(
    frontend: FrontendConfig,
    n_samples: int,
    sample_rate_hz: float,
    rng: np.random.Generator,
    *,
    lit: bool = True,
) -> np.ndarray:
    """Detector-shaped noise voltage trace (electrical only when unlit)."""
    s_q = shot_noise_voltage_psd(frontend) if lit else 0.0
    s_e = frontend.electrical_noise_psd
    sigma_white = math.sqrt((s_q + s_e) * sample_rate_hz / 2.0)
    white = rng.standard_normal(n_samples) * sigma_white
    return _shape_by_detector(white, sample_rate_hz, frontend.detector_bandwidth_hz)


def _raised_cosine_taps(sps: int, rolloff: float, span_symbols: int = 8) -> np.ndarray:
    """Raised-cosine impulse response, unit peak, sampled at sps per symbol."""
    t = np.arange(-span_symbols * sps, span_symbols * sps + 1, dtype=np.float64) / sps
    taps = np.sinc(t) * np.cos(np.pi * rolloff * t)
    denom = 1.0 - (2.0 * rolloff * t) ** 2
    singular = np.isclose(denom, 0.0)
    taps[~singular] /= denom[~singular]
    # limit value at t = +-1/(2*rolloff)
    taps[singular] = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * rolloff))
    return taps


def _sidechannel_voltage(
    channel: SideChannel,
    frontend: FrontendConfig,
    sample_rate_hz: float,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Mean-removed leakage voltage of one modulated neighbor channel.

    QPSK symbols are pulse-shaped with a raised cosine, the optical
    intensity is the squared envelope scaled to the received average power,
    and the resulting photovoltage is attenuated by the CMRR evaluated at
    the channel symbol rate.
    """
    sps_f = sample_rate_hz / channel.symbol_rate_hz
    sps = int(round(sps_f))
    if sps < 1 or abs(sps_f - sps) > 1e-9:
        raise ConfigError("side-channel symbol rate must divide the sample rate")
    span = 8
    n_sym = -(-n_samples // sps) + 4 * span
    phases = rng.integers(0, 4, size=n_sym)
    symbols = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * phases))
    train = np.zeros(n_sym * sps, dtype=np.complex128)
    train[::sps] = symbols
    taps = _raised_cosine_taps(sps, channel.pulse_rolloff, span)
    envelope = signal.fftconvolve(train, taps, mode="same")
    envelope = envelope[span * sps : span * sps + n_samples]
    p_avg = np.mean(np.abs(envelope) ** 2)
    scale = dbm_to_watts(channel.received_power_dbm) / p_avg
    intensity_w = np.abs(envelope) ** 2 * scale
    intensity_w -= np.mean(intensity_w)
    volts = intensity_w * frontend.responsivity_a_per_w * frontend.transimpedance_ohm
    cmrr = frontend.cmrr_at(channel.symbol_rate_hz)
    return volts * 10.0 ** (-cmrr / 20.0)


def simulate_block(
    frontend: FrontendConfig,
    side: SidechannelConfig,
    adc: AdcConfig,
    n_samples: int,
    rng_seed: int,
    *,
    lit: bool = True,
) -> SampleBlock:
    """Simulate one quantized acquisition block.

    Chain: white quantum noise (zero when unlit) plus white electrical
    noise, both shaped by the detector response, plus side-channel leakage
    (also detected, hence shaped), plus the interleave spur at fs/4, then
    mid-tread quantization.  A clip warning is raised on the block when
    more than 1% of pre-quantization samples fall outside the code range.
    """
    if n_samples < 2:
        raise ConfigError("n_samples must be >= 2")
    fs = adc.sample_rate_hz
    s_q = shot_noise_voltage_psd(frontend) if lit else 0.0
    s_e = frontend.electrical_noise_psd

    rng_noise = make_rng(rng_seed, _STREAM_NOISE)
    analog = noise_trace_v(frontend, n_samples, fs, rng_noise, lit=lit)

    if side.enabled:
        rng_side = make_rng(rng_seed, _STREAM_SIDE)
        leak = np.zeros(n_samples)
        for channel in side.channels:
            leak += _sidechannel_voltage(channel, frontend, fs, n_samples, rng_side)
        analog += _shape_by_detector(leak, fs, frontend.detector_bandwidth_hz)

    if math.isfinite(adc.interleave_spur_dbc):
        # spur power referenced to the total shaped noise power
        noise_power = (s_q + s_e) * noise_enbw_hz(frontend, fs)
        amp = math.sqrt(2.0 * noise_power * db_to_ratio(adc.interleave_spur_dbc))
        phase = make_rng(rng_seed, _STREAM_SPUR).uniform(0.0, 2.0 * np.pi)
        analog += amp * np.cos(np.pi / 2.0 * np.arange(n_samples) + phase)

    codes, clip_fraction = _quantize_array(analog, adc)
    return SampleBlock(
        samples=codes,
        adc=adc,
        frontend_tag=frontend.tag,
        lit=lit,
        rng_seed_used=int(rng_seed),
        clip_warning=clip_fraction > 0.01,
    )


def block_from_voltages(
    values_v: np.ndarray,
    adc: AdcConfig,
    *,
    lit: bool,
    frontend_tag: str = "ingested",
    rng_seed_used: int | None = None,
) -> SampleBlock:
    """Quantize an analog voltage trace into a block (used for TDM frames)."""
    values_v = np.asarray(values_v, dtype=np.float64)
    codes, clip_fraction = _quantize_array(values_v, adc)
    return SampleBlock(
        samples=codes,
        adc=adc,
        frontend_tag=frontend_tag,
        lit=lit,
        rng_seed_used=rng_seed_used,
        clip_warning=clip_fraction > 0.01,
    )


def psd_estimate(block: SampleBlock, segment_len: int = 4096) -> PsdEstimate:
    """Welch PSD of a block: Hann window, 50% overlap, one-sided density."""
    n = len(block)
    if segment_len < 16 or segment_len & (segment_len - 1):
        raise ConfigError("segment_len must be a power of two >= 16")
    if segment_len > n:
        raise ConfigError("segment_len exceeds the block length")
    freqs, psd = signal.welch(
        block.volts(),
        fs=block.adc.sample_rate_hz,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend="constant",
        scaling="density",
    )
    hop = segment_len - segment_len // 2
    n_segments = (n - segment_len // 2) // hop
    return PsdEstimate(
        freqs_hz=freqs,
        psd_v2_per_hz=psd,
        segment_len=segment_len,
        n_segments=int(n_segments),
    )


def variance_v2(block: SampleBlock) -> float:
    """Unbiased sample variance of the de-quantized block, V^2."""
    return float(np.var(block.volts(), ddof=1))
