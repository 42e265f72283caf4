"""Binary file formats: raw captures, extractor seeds, key material.

Capture layout (32-byte header, little-endian throughout):
magic "VQRN", u16 version, u8 bits, u8 flags (bit0 = lit), f64 sample
rate, u64 sample count, 8 reserved bytes; then the samples as signed
8-bit values (bits <= 8) or little-endian int16 (bits 9..16).

Seed layout: magic "TSEE", u32 version, u64 n, u64 m, then the n+m-1
seed bits packed little-endian within bytes, zero-padded to a byte edge.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CaptureFormatError, ConfigError
from .extractor import Bitstream, ToeplitzSeed
from .frontend import AdcConfig, SampleBlock

__all__ = [
    "CAPTURE_MAGIC",
    "CAPTURE_VERSION",
    "SEED_MAGIC",
    "SEED_VERSION",
    "CaptureMeta",
    "write_capture",
    "read_capture",
    "block_from_capture",
    "write_seed",
    "read_seed",
    "write_key",
    "write_manifest",
    "sha256_file",
]

CAPTURE_MAGIC = b"VQRN"
CAPTURE_VERSION = 1
_CAPTURE_HEADER = struct.Struct("<4sHBBdQ8s")

SEED_MAGIC = b"TSEE"
SEED_VERSION = 1
_SEED_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class CaptureMeta:
    bits: int
    lit: bool
    sample_rate_hz: float
    n_samples: int


def _sample_width(bits: int) -> int:
    return 1 if bits <= 8 else 2


def write_capture(path, block: SampleBlock) -> None:
    bits = block.adc.bits
    header = _CAPTURE_HEADER.pack(
        CAPTURE_MAGIC,
        CAPTURE_VERSION,
        bits,
        1 if block.lit else 0,
        block.adc.sample_rate_hz,
        len(block),
        b"\x00" * 8,
    )
    if _sample_width(bits) == 1:
        payload = block.samples.astype("<i1").tobytes()
    else:
        payload = block.samples.astype("<i2").tobytes()
    Path(path).write_bytes(header + payload)


def read_capture(path) -> tuple[np.ndarray, CaptureMeta]:
    """Parse and validate a capture; returns (int16 codes, metadata)."""
    raw = Path(path).read_bytes()
    if len(raw) < _CAPTURE_HEADER.size:
        raise CaptureFormatError("capture shorter than its header")
    magic, version, bits, flags, rate, n_samples, _ = _CAPTURE_HEADER.unpack_from(raw)
    if magic != CAPTURE_MAGIC:
        raise CaptureFormatError(f"bad magic {magic!r}")
    if version != CAPTURE_VERSION:
        raise CaptureFormatError(f"unsupported capture version {version}")
    if not 4 <= bits <= 16:
        raise CaptureFormatError(f"sample width {bits} outside 4..16 bits")
    if not (rate > 0 and np.isfinite(rate)):
        raise CaptureFormatError("sample rate must be positive and finite")
    width = _sample_width(bits)
    expected = _CAPTURE_HEADER.size + n_samples * width
    if len(raw) < expected:
        raise CaptureFormatError(
            f"truncated payload: {len(raw)} bytes, header promises {expected}"
        )
    if len(raw) > expected:
        raise CaptureFormatError("trailing bytes after the payload")
    body = raw[_CAPTURE_HEADER.size :]
    dtype = "<i1" if width == 1 else "<i2"
    codes = np.frombuffer(body, dtype=dtype).astype(np.int16)
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if codes.size and (codes.min() < lo or codes.max() > hi):
        raise CaptureFormatError(f"sample codes exceed the {bits}-bit range")
    return codes, CaptureMeta(
        bits=bits, lit=bool(flags & 1), sample_rate_hz=rate, n_samples=int(n_samples)
    )


def block_from_capture(
    codes: np.ndarray, meta: CaptureMeta, adc: AdcConfig, frontend_tag: str = "ingested"
) -> SampleBlock:
    """Bind parsed codes to an ADC description, cross-checking the header."""
    if adc.bits != meta.bits:
        raise ConfigError(f"ADC width {adc.bits} != capture width {meta.bits}")
    if abs(adc.sample_rate_hz - meta.sample_rate_hz) > 1e-6 * meta.sample_rate_hz:
        raise ConfigError("ADC sample rate differs from the capture header")
    return SampleBlock(
        samples=codes,
        adc=adc,
        frontend_tag=frontend_tag,
        lit=meta.lit,
        rng_seed_used=None,
    )


def write_seed(path, seed: ToeplitzSeed) -> None:
    header = _SEED_HEADER.pack(SEED_MAGIC, SEED_VERSION, seed.n, seed.m)
    packed = np.packbits(seed.bits, bitorder="little").tobytes()
    Path(path).write_bytes(header + packed)


def read_seed(path) -> ToeplitzSeed:
    raw = Path(path).read_bytes()
    if len(raw) < _SEED_HEADER.size:
        raise CaptureFormatError("seed file shorter than its header")
    magic, version, n, m = _SEED_HEADER.unpack_from(raw)
    if magic != SEED_MAGIC:
        raise CaptureFormatError(f"bad seed magic {magic!r}")
    if version != SEED_VERSION:
        raise CaptureFormatError(f"unsupported seed version {version}")
    if m < 1 or n < m:
        raise CaptureFormatError("seed header requires n >= m >= 1")
    n_bits = n + m - 1
    expected = _SEED_HEADER.size + (n_bits + 7) // 8
    if len(raw) != expected:
        raise CaptureFormatError("seed payload length does not match the header")
    packed = np.frombuffer(raw[_SEED_HEADER.size :], dtype=np.uint8)
    bits = np.unpackbits(packed, bitorder="little")
    if bits[n_bits:].any():
        raise CaptureFormatError("nonzero padding bits in the seed file")
    return ToeplitzSeed(bits=bits[:n_bits].copy(), n=int(n), m=int(m))


def write_key(path, key: Bitstream) -> None:
    Path(path).write_bytes(key.data)


def write_manifest(path, entries: dict) -> None:
    lines = [f"{k}: {entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
