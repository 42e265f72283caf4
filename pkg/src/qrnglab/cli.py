"""Command-line front door.

Thin wrappers over the library modules: simulate or ingest captures,
estimate entropy, plan and run extraction, run the statistical battery,
run QPSK link experiments, and emit CSV report data.  Exit codes are
stable so scripts can branch on failure class:

    0  success
    1  other package error (estimation failures and the like)
    2  configuration error (bad schema, bad flag combination)
    3  capture or seed file format error
    4  insufficient entropy for the requested extraction
    5  statistical suite below the configured pass floor
    6  TDM validity mask is empty

Artifact-writing commands drop a ``<name>.manifest.txt`` beside each
output with the config digest, seed, and library versions.
"""

from __future__ import annotations

import functools
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from . import io as qio
from .entropy import key_rate, variance_decompose
from .errors import (
    CaptureFormatError,
    ConfigError,
    EmptyMaskError,
    InsufficientEntropyError,
    QrngLabError,
)
from .extractor import Bitstream, extract_stream, seed_new, serialize_samples
from .frontend import AdcConfig, psd_estimate
from .modulator import settle_time_s, simulate_tx_frame, tx_frame_to_csv, valid_fraction
from .pipeline import (
    PROFILES,
    build_plan,
    load_config,
    run_pipeline,
    simulate_lit_dark,
    simulate_one,
    _entropy_csv,
)
from .qpsk import ber_curve_to_csv, ber_measure, ber_theory_qpsk, esn0_from_ebn0_db, threshold_search
from .sp800_22 import SuiteParams, report_to_csv, run_suite, summarize

_EXIT_BY_TYPE = (
    (ConfigError, 2),
    (CaptureFormatError, 3),
    (InsufficientEntropyError, 4),
    (EmptyMaskError, 6),
)
EXIT_SUITE_FLOOR = 5


def _exit_code(exc: QrngLabError) -> int:
    for etype, code in _EXIT_BY_TYPE:
        if isinstance(exc, etype):
            return code
    return 1


def _wrap(fn):
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except QrngLabError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(_exit_code(exc))

    return inner


def _config_options(fn):
    fn = click.option("--jobs", type=int, default=1, show_default=True, help="suite workers")(fn)
    fn = click.option("--paper-mode", is_flag=True, help="omit the leftover-hash deduction")(fn)
    fn = click.option("--seed", type=int, default=None, help="override the run seed")(fn)
    fn = click.option(
        "--profile",
        type=click.Choice(sorted(PROFILES)),
        default=None,
        help="builtin operating point",
    )(fn)
    fn = click.option("--config", "config_path", type=click.Path(), default=None)(fn)
    return fn


def _load(config_path, profile, seed, paper_mode):
    if config_path is None and profile is None:
        profile = "receiver-2020"
    return load_config(
        profile, config_path, seed=seed, paper_mode=True if paper_mode else None
    )


def _sibling_manifest(out_path, cfg, extra: dict) -> None:
    entries = {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
    }
    if cfg is not None:
        entries["config_sha256"] = cfg.digest()
        entries["seed"] = cfg.seed
    entries.update(extra)
    qio.write_manifest(str(out_path) + ".manifest.txt", entries)


def _read_block(path, adc: AdcConfig | None = None):
    codes, meta = qio.read_capture(path)
    if adc is None:
        adc = AdcConfig(
            sample_rate_hz=meta.sample_rate_hz,
            bits=meta.bits,
            full_scale_v=1.0,
            interleave_spur_dbc=-np.inf,
        )
    return qio.block_from_capture(codes, meta, adc)


@click.group()
@click.version_option(__version__, prog_name="qrnglab")
def main() -> None:
    """Vacuum-noise QRNG simulation and post-processing lab."""


@main.command()
@_config_options
@click.option("--dark", is_flag=True, help="simulate with the signal path blocked")
@click.option("--out", "out_path", type=click.Path(), required=True, help="capture file")
@_wrap
def simulate(config_path, profile, seed, paper_mode, jobs, dark, out_path) -> None:
    """Simulate one capture and write it to --out."""
    cfg = _load(config_path, profile, seed, paper_mode)
    block = simulate_one(cfg, lit=not dark)
    qio.write_capture(out_path, block)
    digest = qio.sha256_file(out_path)
    _sibling_manifest(out_path, cfg, {"sha256": digest, "lit": int(not dark)})
    click.echo(f"wrote {out_path}: {len(block)} samples, {cfg.adc.bits} bit, lit={int(not dark)}")
    click.echo(f"sha256 {digest}")


@main.command()
@click.argument("capture", type=click.Path(exists=True))
@_wrap
def ingest(capture) -> None:
    """Parse and validate a capture file, printing its header and stats."""
    codes, meta = qio.read_capture(capture)
    click.echo(f"bits: {meta.bits}")
    click.echo(f"lit: {int(meta.lit)}")
    click.echo(f"sample_rate_hz: {meta.sample_rate_hz:.6e}")
    click.echo(f"n_samples: {meta.n_samples}")
    click.echo(f"code_mean: {float(np.mean(codes)):.4f}")
    click.echo(f"code_std: {float(np.std(codes, ddof=1)):.4f}")
    click.echo("ok")


@main.command()
@_config_options
@click.option("--capture", "capture_path", type=click.Path(exists=True), default=None)
@click.option("--segment", type=int, default=4096, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True, help="CSV file")
@_wrap
def psd(config_path, profile, seed, paper_mode, jobs, capture_path, segment, out_path) -> None:
    """Welch PSD of a capture (or of a freshly simulated lit block)."""
    cfg = _load(config_path, profile, seed, paper_mode)
    if capture_path is not None:
        block = _read_block(capture_path, cfg.adc)
    else:
        block = simulate_one(cfg, lit=True)
    est = psd_estimate(block, segment_len=segment)
    with open(out_path, "w") as fh:
        fh.write("freq_hz,psd_v2_per_hz\n")
        for f, p in zip(est.freqs_hz, est.psd_v2_per_hz):
            fh.write(f"{f:.6e},{p:.8e}\n")
    _sibling_manifest(out_path, cfg, {"sha256": qio.sha256_file(out_path)})
    click.echo(f"wrote {out_path}: {est.freqs_hz.size} bins from {est.n_segments} segments")


@main.command()
@_config_options
@click.option("--lit", "lit_path", type=click.Path(exists=True), default=None)
@click.option("--dark", "dark_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="optional CSV")
@_wrap
def entropy(config_path, profile, seed, paper_mode, jobs, lit_path, dark_path, out_path) -> None:
    """Dark/lit variance decomposition, min-entropy, and plan sizing."""
    cfg = _load(config_path, profile, seed, paper_mode)
    if (lit_path is None) != (dark_path is None):
        raise ConfigError("give both --lit and --dark captures, or neither")
    if lit_path is not None:
        lit = _read_block(lit_path, cfg.adc)
        dark = _read_block(dark_path, cfg.adc)
    else:
        lit, dark = simulate_lit_dark(cfg)
    decomp = variance_decompose(dark, lit)
    plan = build_plan(cfg, decomp, len(lit))
    click.echo(f"sigma2_total_v2: {decomp.sigma2_total_v2:.6e}")
    click.echo(f"sigma2_quantum_v2: {decomp.sigma2_quantum_v2:.6e}")
    click.echo(f"clearance_db: {decomp.clearance_db:.4f}")
    click.echo(f"hmin_per_sample_bits: {plan.hmin_per_sample:.6f}")
    click.echo(f"m_out_bits: {plan.m_out}")
    if out_path is not None:
        _entropy_csv(out_path, decomp, plan)
        _sibling_manifest(out_path, cfg, {"sha256": qio.sha256_file(out_path)})
        click.echo(f"wrote {out_path}")


@main.command()
@_config_options
@click.option("--lit", "lit_path", type=click.Path(exists=True), default=None)
@click.option("--dark", "dark_path", type=click.Path(exists=True), default=None)
@click.option("--seed-file", type=click.Path(exists=True), default=None)
@click.option("--seed-out", type=click.Path(), default=None, help="write the generated seed")
@click.option("--out", "out_path", type=click.Path(), required=True, help="key file")
@_wrap
def extract(
    config_path, profile, seed, paper_mode, jobs, lit_path, dark_path, seed_file, seed_out, out_path
) -> None:
    """Toeplitz-extract a key from a lit capture (or a simulated block)."""
    cfg = _load(config_path, profile, seed, paper_mode)
    if lit_path is not None:
        lit = _read_block(lit_path, cfg.adc)
        if cfg.plan_params.hmin is None:
            if dark_path is None:
                raise ConfigError("hmin = auto needs a --dark capture next to --lit")
            dark = _read_block(dark_path, cfg.adc)
        else:
            dark = None
    else:
        lit, dark = simulate_lit_dark(cfg)
    decomp = variance_decompose(dark, lit) if dark is not None else None
    plan = build_plan(cfg, decomp, len(lit)) if decomp is not None else build_plan(cfg, None, len(lit))
    if seed_file is not None:
        toeplitz = qio.read_seed(seed_file)
        if toeplitz.n != plan.n_bits_in or toeplitz.m != plan.m_out:
            raise ConfigError(
                f"seed file is {toeplitz.n}x{toeplitz.m}, plan needs "
                f"{plan.n_bits_in}x{plan.m_out}"
            )
    else:
        toeplitz = seed_new(plan.n_bits_in, plan.m_out, cfg.seed)
        if seed_out is not None:
            qio.write_seed(seed_out, toeplitz)
            click.echo(f"wrote {seed_out}")
    key = extract_stream([lit], plan, toeplitz)
    qio.write_key(out_path, key)
    digest = qio.sha256_file(out_path)
    _sibling_manifest(
        out_path,
        cfg,
        {"sha256": digest, "m_out_bits": plan.m_out, "seed_fingerprint": toeplitz.fingerprint()},
    )
    click.echo(f"wrote {out_path}: {key.length} bits")
    click.echo(f"sha256 {digest}")


@main.command()
@click.argument("source", type=click.Path(exists=True))
@click.option("--bits", type=int, default=None, help="limit to the first N bits (multiple of 8)")
@click.option("--alpha", type=float, default=0.01, show_default=True)
@click.option("--pass-floor", type=int, default=0, show_default=True, help="0 disables")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="per-instance CSV")
@_wrap
def suite(source, bits, alpha, pass_floor, jobs, out_path) -> None:
    """Run the statistical battery on a capture (.vqrn) or raw binary file."""
    if str(source).endswith(".vqrn"):
        stream = serialize_samples(_read_block(source))
    else:
        data = Path(source).read_bytes()
        stream = Bitstream(data=data, length=8 * len(data))
    if bits is not None:
        if bits % 8 or bits <= 0:
            raise ConfigError("--bits must be a positive multiple of 8")
        if bits > stream.length:
            raise ConfigError(f"--bits {bits} exceeds the {stream.length} available")
        stream = Bitstream(data=stream.data[: bits // 8], length=bits)
    report = run_suite(stream, SuiteParams(alpha=alpha), jobs=jobs)
    n_pass, n_fail, n_na, failed = summarize(report)
    click.echo(f"n_bits: {report.n_bits}")
    click.echo(f"pass/fail/na: {n_pass}/{n_fail}/{n_na} of {len(report.results)}")
    for name in failed:
        click.echo(f"fail: {name}")
    if out_path is not None:
        report_to_csv(report, out_path)
        click.echo(f"wrote {out_path}")
    if pass_floor and n_pass + n_na < pass_floor:
        click.echo(f"below pass floor {pass_floor}", err=True)
        raise SystemExit(EXIT_SUITE_FLOOR)


@main.command("qpsk-ber")
@_config_options
@click.option("--ebn0", "ebn0_db", type=float, multiple=True, default=(4.0, 6.0, 8.0), show_default=True)
@click.option("--n-bits", type=int, default=1_000_000, show_default=True)
@click.option("--threshold", "threshold_target", type=float, default=None, help="invert BER(Eb/N0)")
@click.option("--out", "out_path", type=click.Path(), default=None, help="BER curve CSV")
@_wrap
def qpsk_ber(
    config_path, profile, seed, paper_mode, jobs, ebn0_db, n_bits, threshold_target, out_path
) -> None:
    """Measure QPSK BER across Eb/N0 points; optionally invert a target BER."""
    cfg = _load(config_path, profile, seed, paper_mode)
    base = cfg.qpsk
    reports = []
    for point in ebn0_db:
        link = replace(base, esn0_db=esn0_from_ebn0_db(point))
        report = ber_measure(link, n_bits, cfg.seed)
        reports.append(report)
        click.echo(
            f"ebn0 {point:.2f} dB: ber {report.ber:.4e} "
            f"(theory {ber_theory_qpsk(point):.4e}, {report.n_errors} errors)"
        )
    if out_path is not None:
        ber_curve_to_csv(reports, out_path)
        _sibling_manifest(out_path, cfg, {"sha256": qio.sha256_file(out_path)})
        click.echo(f"wrote {out_path}")
    if threshold_target is not None:
        found = threshold_search(threshold_target, n_bits=n_bits, rng_seed=cfg.seed, base=base)
        click.echo(f"threshold for ber {threshold_target:.3e}: {found:.3f} dB Eb/N0")


@main.command("tdm-trace")
@_config_options
@click.option("--dark", is_flag=True)
@click.option("--decimate", type=int, default=100, show_default=True, help="keep every Nth sample")
@click.option("--out", "out_path", type=click.Path(), required=True, help="trace CSV")
@_wrap
def tdm_trace(config_path, profile, seed, paper_mode, jobs, dark, decimate, out_path) -> None:
    """Simulate one TDM frame and dump the monitor/TIA trace as plot data."""
    cfg = _load(config_path, profile, seed, paper_mode)
    if cfg.mode != "transmitter":
        raise ConfigError("tdm-trace needs a transmitter-mode config")
    if decimate < 1:
        raise ConfigError("--decimate must be >= 1")
    trace = simulate_tx_frame(
        cfg.frontend,
        cfg.modulator,
        cfg.frame,
        not dark,
        cfg.seed if not dark else cfg.seed + 1,
        settle_fraction=cfg.settle_fraction,
        data_symbol_rate_hz=cfg.data_symbol_rate_hz,
    )
    thinned = replace(
        trace,
        monitor_w=trace.monitor_w[::decimate],
        tia_v=trace.tia_v[::decimate],
        valid=trace.valid[::decimate],
        sample_rate_hz=trace.sample_rate_hz / decimate,
    )
    tx_frame_to_csv(thinned, out_path)
    _sibling_manifest(out_path, cfg, {"sha256": qio.sha256_file(out_path)})
    click.echo(f"settle_time_us: {settle_time_s(cfg.modulator, cfg.settle_fraction) * 1e6:.3f}")
    click.echo(f"valid_fraction: {valid_fraction(cfg.frame, cfg.modulator, cfg.settle_fraction):.6f}")
    click.echo(f"valid_samples: {int(np.count_nonzero(trace.valid))}")
    click.echo(f"wrote {out_path}: {thinned.monitor_w.size} rows (decimate {decimate})")


@main.command()
@click.option("--sample-rate", type=float, default=40e9, show_default=True, help="Sa/s")
@click.option("--hmin", type=float, default=0.125, show_default=True, help="bits/sample")
@click.option("--key-bits", type=int, default=256, show_default=True)
@click.option("--duty", type=float, default=1.0, show_default=True)
@_wrap
def keyrate(sample_rate, hmin, key_bits, duty) -> None:
    """Steady-state key rate for a sampling rate and per-sample entropy."""
    rate = key_rate(sample_rate, hmin, key_bits, duty)
    click.echo(f"key_rate: {rate:.6e} keys/s")
    click.echo(f"rounded: {rate:.1e} keys/s")


@main.command()
@_config_options
@click.option("--out", "out_dir", type=click.Path(), required=True, help="report directory")
@_wrap
def pipeline(config_path, profile, seed, paper_mode, jobs, out_dir) -> None:
    """Full chain: simulate, decompose, plan, extract, test, report."""
    cfg = _load(config_path, profile, seed, paper_mode)
    result = run_pipeline(cfg, out_dir, jobs=jobs)
    click.echo(f"clearance_db: {result.decomposition.clearance_db:.4f}")
    click.echo(f"hmin_per_sample_bits: {result.hmin_per_sample:.6f}")
    click.echo(f"key_bits: {result.key.length}")
    raw_pass, raw_fail, raw_na, _ = summarize(result.raw_report)
    ext_pass, ext_fail, ext_na, ext_failed = summarize(result.extracted_report)
    total = len(result.raw_report.results)
    click.echo(f"raw suite: {raw_pass}/{total} pass, {raw_fail} fail, {raw_na} na")
    click.echo(f"extracted suite: {ext_pass}/{total} pass, {ext_fail} fail, {ext_na} na")
    for name in ext_failed:
        click.echo(f"extracted fail: {name}")
    for name in sorted(result.outputs):
        click.echo(f"wrote {result.outputs[name]}")
    if not result.passed:
        click.echo(
            f"extracted suite below pass floor {result.suite_pass_floor}", err=True
        )
        raise SystemExit(EXIT_SUITE_FLOOR)
    click.echo("ok")


if __name__ == "__main__":
    main()
