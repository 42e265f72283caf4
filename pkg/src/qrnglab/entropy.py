"""Entropy accounting: variance split, quantized min-entropy, output sizing.

The security story is the usual one for sampled vacuum noise: estimate the
quantum share of the measured variance, lower-bound the min-entropy of one
quantized sample from a Gaussian of that width, and size the extractor
output with the leftover hash lemma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, EstimationError, InsufficientEntropyError
from .frontend import AdcConfig, SampleBlock, ratio_to_db, variance_v2

DEFAULT_EPSILON = 2.0**-64

# Offset grid used for the worst-case min-entropy search: 64 points across
# one LSB, plus the mean pushed to the full-scale edge (saturation bin).
WORST_CASE_GRID = 64


@dataclass(frozen=True)
class VarianceDecomposition:
    """Dark/lit variance split with the implied clearance."""

    sigma2_total_v2: float
    sigma2_electrical_v2: float
    sigma2_quantum_v2: float
    clearance_db: float

    @property
    def sigma_quantum_v(self) -> float:
        return math.sqrt(self.sigma2_quantum_v2)


def variance_decompose(dark: SampleBlock, lit: SampleBlock) -> VarianceDecomposition:
    """Decompose the lit variance into quantum + electrical parts.

    Requires matched configurations, correct lit flags, and at least 2^16
    samples per block.  Raises EstimationError when the lit variance does
    not exceed the dark variance.
    """
    if dark.lit or not lit.lit:
        raise ConfigError("need one dark (lit=False) and one lit (lit=True) block")
    if dark.frontend_tag != lit.frontend_tag or dark.adc != lit.adc:
        raise ConfigError("blocks come from different configurations")
    if len(dark) < (1 << 16) or len(lit) < (1 << 16):
        raise ConfigError("variance decomposition needs >= 2^16 samples per block")
    sigma2_e = variance_v2(dark)
    sigma2_t = variance_v2(lit)
    sigma2_q = sigma2_t - sigma2_e
    if sigma2_q <= 0:
        raise EstimationError("lit variance does not exceed the dark variance")
    return VarianceDecomposition(
        sigma2_total_v2=sigma2_t,
        sigma2_electrical_v2=sigma2_e,
        sigma2_quantum_v2=sigma2_q,
        clearance_db=ratio_to_db(sigma2_t / sigma2_e),
    )


def quantizer_bin_probabilities(
    sigma_v: float, adc: AdcConfig, mean_v: float = 0.0
) -> np.ndarray:
    """Probability of each ADC code for a Gaussian input.

    Interior code k covers ((k-0.5)*LSB, (k+0.5)*LSB]; the end codes absorb
    the tails, so the probabilities sum to 1 for any mean and width.
    """
    if sigma_v <= 0:
        raise ConfigError("sigma_v must be positive")
    lsb = adc.lsb_v
    codes = np.arange(adc.code_min, adc.code_max + 1, dtype=np.float64)
    upper = (codes + 0.5) * lsb
    lower = (codes - 0.5) * lsb
    upper[-1] = np.inf
    lower[0] = -np.inf
    cdf_hi = special.ndtr((upper - mean_v) / sigma_v)
    cdf_lo = special.ndtr((lower - mean_v) / sigma_v)
    return cdf_hi - cdf_lo


def min_entropy_from_probs(probs: np.ndarray) -> float:
    """Min-entropy in bits of an explicit outcome distribution."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size == 0 or np.any(probs < 0):
        raise ConfigError("probabilities must be non-negative and non-empty")
    total = probs.sum()
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ConfigError("probabilities must sum to 1")
    return float(-np.log2(probs.max()))


def min_entropy_per_sample(
    sigma_quantum_v: float, adc: AdcConfig, *, worst_case_offset: bool = False
) -> float:
    """Min-entropy in bits of one quantized Gaussian sample.

    With ``worst_case_offset`` the mean is swept over a 64-point grid
    spanning one LSB plus the full-scale edge, and the minimum entropy over
    the sweep is returned (the edge case puts all tail mass into one
    saturated code).
    """
    if not worst_case_offset:
        return min_entropy_from_probs(quantizer_bin_probabilities(sigma_quantum_v, adc))
    offsets = list(np.linspace(0.0, adc.lsb_v, WORST_CASE_GRID))
    offsets.append(adc.full_scale_v / 2.0)
    worst = math.inf
    for mu in offsets:
        h = min_entropy_from_probs(quantizer_bin_probabilities(sigma_quantum_v, adc, mu))
        worst = min(worst, h)
    return worst


def extractable_length(
    n_samples: int,
    hmin_per_sample: float,
    *,
    epsilon: float | None = None,
    paper_mode: bool = False,
) -> int:
    """Output length of the extractor for a block of ``n_samples``.

    Secure mode applies the leftover hash lemma penalty 2*log2(1/epsilon);
    paper-replication mode omits the deduction and just floors n*hmin.
    """
    if n_samples <= 0:
        raise ConfigError("n_samples must be positive")
    if hmin_per_sample <= 0:
        raise InsufficientEntropyError("hmin_per_sample must be positive")
    if paper_mode:
        m = math.floor(n_samples * hmin_per_sample)
    else:
        eps = DEFAULT_EPSILON if epsilon is None else epsilon
        if not 0.0 < eps < 1.0:
            raise ConfigError("epsilon must be in (0, 1)")
        m = math.floor(n_samples * hmin_per_sample - 2.0 * math.log2(1.0 / eps))
    if m <= 0:
        raise InsufficientEntropyError(
            f"no extractable bits: n={n_samples}, hmin={hmin_per_sample}"
        )
    return m


def key_rate(
    sample_rate_hz: float, hmin_per_sample: float, key_len_bits: int, duty: float
) -> float:
    """Steady-state key generation rate in keys/s."""
    if sample_rate_hz <= 0 or hmin_per_sample <= 0:
        raise ConfigError("sample rate and hmin must be positive")
    if key_len_bits <= 0:
        raise ConfigError("key_len_bits must be positive")
    if not 0.0 < duty <= 1.0:
        raise ConfigError("duty must be in (0, 1]")
    return duty * sample_rate_hz * hmin_per_sample / key_len_bits


@dataclass(frozen=True)
class ExtractionPlan:
    """Frozen sizing of one extraction pass.

    ``hmin_per_sample`` is the canonical plan convention.  Some published
    throughput figures are instead quoted per raw *bit*; build the plan
    with ``hmin_convention="per_raw_bit"`` to scale by the sample width.
    The two conventions differ by a factor of ``bits_per_sample_raw`` and
    are not interchangeable, so the plan records the per-sample value only.
    """

    n_samples: int
    bits_per_sample_raw: int
    hmin_per_sample: float
    epsilon: float | None
    m_out: int
    paper_mode: bool

    def __post_init__(self) -> None:
        if self.n_samples <= 0 or self.bits_per_sample_raw <= 0:
            raise ConfigError("plan sizes must be positive")
        if self.hmin_per_sample <= 0:
            raise ConfigError("hmin_per_sample must be positive")
        bound = extractable_length(
            self.n_samples,
            self.hmin_per_sample,
            epsilon=self.epsilon,
            paper_mode=self.paper_mode,
        )
        if self.m_out > bound or self.m_out <= 0:
            raise ConfigError(f"m_out={self.m_out} exceeds the entropy bound {bound}")

    @property
    def n_bits_in(self) -> int:
        return self.n_samples * self.bits_per_sample_raw

    @classmethod
    def create(
        cls,
        n_samples: int,
        bits_per_sample_raw: int,
        hmin: float,
        *,
        epsilon: float | None = None,
        paper_mode: bool = False,
        hmin_convention: str = "per_sample",
    ) -> "ExtractionPlan":
        if hmin_convention == "per_sample":
            h = hmin
        elif hmin_convention == "per_raw_bit":
            h = hmin * bits_per_sample_raw
        else:
            raise ConfigError(f"unknown hmin convention {hmin_convention!r}")
        m = extractable_length(n_samples, h, epsilon=epsilon, paper_mode=paper_mode)
        return cls(
            n_samples=n_samples,
            bits_per_sample_raw=bits_per_sample_raw,
            hmin_per_sample=h,
            epsilon=None if paper_mode else (DEFAULT_EPSILON if epsilon is None else epsilon),
            m_out=m,
            paper_mode=paper_mode,
        )
