"""Toeplitz randomness extraction over GF(2).

Matrix convention: for input length n and output length m, the seed holds
n + m - 1 bits and T[i][j] = seed[n - 1 + i - j], so row i reads the seed
slice seed[n-1+i], seed[n-2+i], ..., seed[i] left to right.  Output bit i
is the GF(2) inner product of row i with the input.

Two implementations are kept deliberately separate: a transparent O(n*m)
reference with explicit bit loops, and a fast path that evaluates the same
product as an integer convolution via FFTs and reduces mod 2.  The fast
path verifies that its rounded convolution is exactly integral, so both
paths are bit-exact by construction, and the tests enforce it.

Bit packing everywhere is little-endian within bytes: bit 0 of byte 0 is
the first bit of the stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError
from .frontend import SampleBlock
from .rng import make_rng

# Inputs at or below this length go through a single convolution; longer
# ones are chunked to bound FFT memory.
_CHUNK_BITS = 1 << 21


@dataclass(frozen=True, eq=False)
class Bitstream:
    """Packed bit string; bit i lives at byte i//8, bit position i%8."""

    data: bytes
    length: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ConfigError("length must be >= 0")
        if len(self.data) != (self.length + 7) // 8:
            raise ConfigError("packed byte count does not match the bit length")
        if self.length % 8:
            # padding bits above the last valid bit must be zero
            last = self.data[-1]
            if last >> (self.length % 8):
                raise ConfigError("padding bits must be zero")

    def __len__(self) -> int:
        return self.length

    @classmethod
    def from_bits(cls, bits) -> "Bitstream":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ConfigError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ConfigError("bits must be 0/1")
        packed = np.packbits(arr, bitorder="little")
        return cls(data=packed.tobytes(), length=int(arr.size))

    def to_bits(self) -> np.ndarray:
        raw = np.frombuffer(self.data, dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little", count=self.length)

    def concat(self, other: "Bitstream") -> "Bitstream":
        if self.length % 8 == 0:
            return Bitstream(data=self.data + other.data, length=self.length + other.length)
        return Bitstream.from_bits(np.concatenate([self.to_bits(), other.to_bits()]))


@dataclass(frozen=True, eq=False)
class ToeplitzSeed:
    """Seed bits defining one n -> m Toeplitz matrix."""

    bits: np.ndarray
    n: int
    m: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < self.m:
            raise ConfigError("need n >= m >= 1")
        arr = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size != self.n + self.m - 1:
            raise ConfigError("seed must hold exactly n + m - 1 bits")
        if arr.size and arr.max() > 1:
            raise ConfigError("seed bits must be 0/1")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def fingerprint(self) -> str:
        import hashlib

        packed = np.packbits(self.bits, bitorder="little").tobytes()
        return hashlib.sha256(packed).hexdigest()


def seed_new(n: int, m: int, rng_seed: int) -> ToeplitzSeed:
    """Draw a fresh seed of n + m - 1 bits from the package generator."""
    if m < 1 or n < m:
        raise ConfigError("need n >= m >= 1")
    rng = make_rng(rng_seed, 3)  # stream label 3: extractor seeds
    bits = rng.integers(0, 2, size=n + m - 1, dtype=np.uint8)
    return ToeplitzSeed(bits=bits, n=n, m=m)


def toeplitz_extract_naive(seed: ToeplitzSeed, stream: Bitstream) -> Bitstream:
    """Reference extractor: explicit row-by-row GF(2) inner products."""
    x = stream.to_bits()
    if x.size != seed.n:
        raise ConfigError(f"input holds {x.size} bits, seed expects {seed.n}")
    s = seed.bits
    n, m = seed.n, seed.m
    out = np.zeros(m, dtype=np.uint8)
    for i in range(m):
        acc = 0
        for j in range(n):
            acc ^= int(s[n - 1 + i - j]) & int(x[j])
        out[i] = acc
    return Bitstream.from_bits(out)


def _gf2_convolve_segment(s_seg: np.ndarray, x_seg: np.ndarray) -> np.ndarray:
    """Integer linear convolution of two 0/1 arrays, reduced mod 2.

    Uses real FFTs; the rounded result is checked to be exactly integral,
    which holds comfortably for segment sums below 2**52.
    """
    full = s_seg.size + x_seg.size - 1
    nfft = sfft.next_fast_len(full, real=True)
    spec = sfft.rfft(s_seg.astype(np.float64), nfft) * sfft.rfft(
        x_seg.astype(np.float64), nfft
    )
    conv = sfft.irfft(spec, nfft)[:full]
    rounded = np.rint(conv)
    if np.max(np.abs(conv - rounded)) > 0.25:
        raise ArithmeticError("FFT convolution lost integer precision")
    return rounded.astype(np.int64) & 1


def toeplitz_extract(seed: ToeplitzSeed, stream: Bitstream) -> Bitstream:
    """Fast extractor; bit-exact with :func:`toeplitz_extract_naive`.

    Output bit i equals conv(seed, input)[n-1+i] mod 2, so the whole
    product is one linear convolution.  Long inputs are split into chunks
    of ``_CHUNK_BITS`` and the per-chunk convolutions are XOR-accumulated:
    chunk c of the input pairs with the seed slice starting at
    n - (c+1)*B, which contains every diagonal the chunk touches.
    """
    x = stream.to_bits()
    n, m = seed.n, seed.m
    if x.size != n:
        raise ConfigError(f"input holds {x.size} bits, seed expects {n}")
    s = seed.bits
    if n <= _CHUNK_BITS:
        conv = _gf2_convolve_segment(s, x)
        out = conv[n - 1 : n - 1 + m]
        return Bitstream.from_bits(out.astype(np.uint8))

    out = np.zeros(m, dtype=np.uint8)
    b = _CHUNK_BITS
    for start in range(0, n, b):
        stop = min(start + b, n)
        width = stop - start
        # seed indices n-1+i-j for j in [start, stop), i in [0, m)
        lo = n - stop
        hi = n - 1 - start + m
        conv = _gf2_convolve_segment(s[lo:hi], x[start:stop])
        out ^= conv[width - 1 : width - 1 + m].astype(np.uint8)
    return Bitstream.from_bits(out)


def serialize_samples(block: SampleBlock) -> Bitstream:
    """Serialize a block to bits: two's-complement sample bytes, LSB first.

    8-bit-or-narrower samples emit one byte each; wider samples emit two
    little-endian bytes.  Bit order within each byte is little-endian, so
    bit 0 of the stream is the LSB of the first sample.
    """
    if block.adc.bits <= 8:
        raw = block.samples.astype(np.int8).view(np.uint8)
    else:
        raw = block.samples.astype("<i2").view(np.uint8)
    bits = np.unpackbits(raw, bitorder="little")
    return Bitstream(data=np.packbits(bits, bitorder="little").tobytes(), length=int(bits.size))


def extract_stream(blocks, plan, seed: ToeplitzSeed) -> Bitstream:
    """Extract each block with the same seed and concatenate the outputs.

    The seed dimensions must match the plan (strong extractor: seed reuse
    across blocks is part of the design).  Any block whose serialized
    length differs from the plan input length is rejected.
    """
    expected_n = plan.n_samples * plan.bits_per_sample_raw
    if seed.n != expected_n or seed.m != plan.m_out:
        raise ConfigError(
            f"seed is {seed.n}->{seed.m}, plan needs {expected_n}->{plan.m_out}"
        )
    out = Bitstream(data=b"", length=0)
    for block in blocks:
        if block.adc.bits != plan.bits_per_sample_raw:
            raise ConfigError("block sample width differs from the plan")
        if len(block) != plan.n_samples:
            raise ConfigError(
                f"block holds {len(block)} samples, plan expects {plan.n_samples}"
            )
        raw = serialize_samples(block)
        out = out.concat(toeplitz_extract(seed, raw))
    return out


def monobit_z(stream: Bitstream) -> float:
    """Normal test statistic of the ones count; |z| < 4 is a sane stream."""
    bits = stream.to_bits()
    if bits.size == 0:
        raise ConfigError("empty stream")
    ones = int(bits.sum())
    return (2.0 * ones - bits.size) / math.sqrt(bits.size)
