"""Command-line interface.

Subcommands: synth (features -> WAV), bench (RTF measurement), flops
(analytic complexity model), fb-check (filter bank roundtrip), attn-demo
(attention mechanisms on synthetic states), gen-weights (random test
weights) and backend-bench (NumPy vs compiled kernels).

Exit codes: 0 success, 2 usage/validation errors, 1 internal errors or
failed checks.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import attention, filterbank, kernels, perf, weights_io
from .errors import MmlpcError, ValidationError
from .features import parse_feature_file
from .vocoder import FRAME_SIZE, SAMPLE_RATE, synthesize
from .wavio import write_wav

_HEAT = " .:-=+*#%@"


def _default_bank(n_bands):
    return filterbank.design_prototype(n_bands, 16 * n_bands)


def cmd_synth(args) -> int:
    path = Path(args.features)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MmlpcError(f"{path}: cannot read feature file: {exc}") from exc
    try:
        frames = parse_feature_file(data)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if not frames:
        raise MmlpcError(f"{path}: feature file is empty")
    w = weights_io.load_weights(args.weights)
    mode = args.mode or w.mode
    fb = _default_bank(w.n_b) if mode == "mmt" else None
    audio = synthesize(frames, w, mode, fb=fb, temperature=args.temperature, seed=args.seed)
    n = write_wav(audio, args.out)
    print(f"wrote {args.out}: {n} samples ({n / SAMPLE_RATE:.3f} s, mode={mode})")
    return 0


def cmd_bench(args) -> int:
    if args.backend != "auto":
        kernels.use(args.backend)
    w = weights_io.load_weights(args.weights)
    modes = ("baseline", "mmt") if args.mode == "both" else (args.mode,)
    models = {}
    for mode in modes:
        if mode == w.mode:
            models[mode] = w
        elif w.mode == "mmt" and mode == "baseline":
            # Structure-preserving counterpart: same layer sizes, so the
            # speedup comparison is apples to apples from one file.
            models[mode] = weights_io.baseline_counterpart(w)
        else:
            raise MmlpcError(
                f"weights file is {w.mode!r} mode; cannot bench {mode!r} from it"
            )
    fb = _default_bank(w.n_b) if "mmt" in modes else None
    reports = {}
    for mode in modes:
        reports[mode] = perf.rtf_bench(models[mode], mode, frames=args.frames, fb=fb, seed=args.seed)
    if args.machine:
        print(f"backend: {kernels.backend_name()}")
        for mode, rep in reports.items():
            for key in ("wall_seconds", "audio_seconds", "rtf", "forward_steps", "steps_per_second"):
                print(f"{mode}.{key}: {getattr(rep, key)!r}")
    else:
        print(f"kernel backend: {kernels.backend_name()}")
        for rep in reports.values():
            print()
            for line in rep.lines():
                print(f"  {line}")
    if args.mode == "both":
        ratio = reports["baseline"].rtf / reports["mmt"].rtf
        steps_ratio = reports["baseline"].forward_steps / reports["mmt"].forward_steps
        if args.machine:
            print(f"speedup: {ratio!r}")
            print(f"step_ratio: {steps_ratio!r}")
        else:
            print()
            print(f"  speedup: {ratio:.2f}x (rtf {reports['baseline'].rtf:.4f} -> {reports['mmt'].rtf:.4f})")
            print(f"  forward-step ratio: {steps_ratio:.1f}x")
    return 0


def cmd_flops(args) -> int:
    configured = perf.ComplexityParams(
        density=args.d, g_a=args.ga, g_b=args.gb, q=args.q,
        n_b=args.bands, n_t=args.timespan, f_s=args.fs,
    )
    single = perf.ComplexityParams(
        density=args.d, g_a=args.ga, g_b=args.gb, q=args.q, n_b=1, n_t=1, f_s=args.fs,
    )
    c_single = perf.flops_model(single)
    c_conf = perf.flops_model(configured)
    ratio = c_single / c_conf
    if args.machine:
        print(f"gflops_baseline: {c_single!r}")
        print(f"gflops_configured: {c_conf!r}")
        print(f"ratio: {ratio!r}")
        print(f"reported_baseline_gflops: {perf.REPORTED_GFLOPS_BASELINE!r}")
        print(f"reported_mmt_gflops: {perf.REPORTED_GFLOPS_MMT!r}")
    else:
        print("sample-rate network complexity model (2 FLOPs per multiply-accumulate):")
        print(f"  single-band single-time (1x1): {c_single:.6f} GFLOPS")
        print(f"  configured ({args.bands}x{args.timespan}):           {c_conf:.6f} GFLOPS")
        print(f"  reduction ratio:               {ratio:.3f}x")
        print(
            f"  reported reference figures:    {perf.REPORTED_GFLOPS_BASELINE} GFLOPS (single) / "
            f"{perf.REPORTED_GFLOPS_MMT} GFLOPS (multi-band multi-time)"
        )
        print("  (the closed-form model evaluates below the reported figures; see README)")
    return 0


def cmd_fb_check(args) -> int:
    fb = filterbank.design_prototype(args.bands, args.taps)
    rng = np.random.Generator(np.random.Philox(1234))
    length = 4096
    if args.signal == "impulse":
        x = np.zeros(length)
        x[length // 2] = 1.0
    elif args.signal == "noise":
        x = rng.standard_normal(length)
    else:
        t = np.arange(length) / SAMPLE_RATE
        x = np.sin(2.0 * np.pi * args.freq * t)
    rec = filterbank.synthesis(filterbank.analysis(x, fb), fb)
    snr = filterbank.reconstruction_snr(x, rec, fb.group_delay)
    shown = "exact (+inf)" if snr == float("inf") else f"{snr:.2f} dB"
    print(f"bands={args.bands} taps={args.taps} signal={args.signal}")
    print(f"roundtrip SNR: {shown}")
    print(f"group delay:   {fb.group_delay} samples")
    ok = snr >= 60.0
    print("PASS (>= 60 dB)" if ok else "FAIL (< 60 dB)")
    return 0 if ok else 1


def _heat_row(row, vmax):
    scale = (len(_HEAT) - 1) / vmax if vmax > 0 else 0.0
    return "".join(_HEAT[min(len(_HEAT) - 1, int(v * scale))] for v in row)


def cmd_attn_demo(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    enc_len, dec_len = args.enc_len, args.dec_len
    if enc_len < 2 or dec_len < 1:
        raise MmlpcError("enc-len must be >= 2 and dec-len >= 1")
    rows = []
    checks = []

    if args.mechanism == "lsa":
        params = attention.random_lsa_params(rng)
        keys = rng.normal(0, 0.5, (enc_len, 24))
        cum = np.zeros(enc_len)
        for _ in range(dec_len):
            row = attention.lsa_score(rng.normal(0, 0.5, 24), keys, cum, params)
            cum += row
            rows.append(row)
    elif args.mechanism == "forward":
        state = attention.ForwardAttnState.initial(enc_len)
        positions = [state.expected_position()]
        for t in range(dec_len):
            peak = t * (enc_len - 1) / max(1, dec_len - 1)
            energies = -((np.arange(enc_len) - peak) ** 2) / 8.0 + 0.3 * rng.standard_normal(enc_len)
            state = attention.forward_attention_step(state, _softmax(energies))
            positions.append(state.expected_position())
            rows.append(state.alpha)
        diffs = np.diff(positions)
        checks.append(("nondecreasing expected position", bool(np.all(diffs >= -1e-9))))
    else:
        state = attention.GmmAttnState.initial(3)
        means = [state.means.copy()]
        for _ in range(dec_len):
            state, row = attention.gmm_attention_step(
                state, rng.normal(0, 1, 3), rng.normal(0, 1, 3), rng.normal(0, 1, 3), enc_len
            )
            means.append(state.means.copy())
            rows.append(row)
        increasing = all(np.all(b > a) for a, b in zip(means, means[1:]))
        checks.append(("strictly increasing component means", increasing))

    matrix = np.stack(rows)
    sums_ok = bool(np.all(np.abs(matrix.sum(axis=1) - 1.0) <= 1e-6))
    checks.insert(0, ("alignment rows sum to 1", sums_ok))
    vmax = float(matrix.max())
    print(f"{args.mechanism} alignment, {dec_len} decoder steps x {enc_len} encoder steps:")
    for t, row in enumerate(matrix):
        print(f"  {t:3d} |{_heat_row(row, vmax)}| sum={row.sum():.3f}")
    failed = False
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}: {name}")
        failed |= not ok
    return 1 if failed else 0


def cmd_gen_weights(args) -> int:
    data = weights_io.gen_random_weights(args.seed, args.mode, g_a=args.ga, g_b=args.gb, n_b=args.bands)
    Path(args.out).write_bytes(data)
    print(f"wrote {args.out}: {len(data)} bytes ({args.mode} mode, seed {args.seed})")
    return 0


def cmd_backend_bench(args) -> int:
    previous = kernels.backend_name()
    available = kernels.available_backends()
    if len(available) < 2:
        print(f"only the {available[0]!r} backend is available (compiled kernels not built)")
    rng = np.random.Generator(np.random.Philox(7))
    m = rng.standard_normal((384, 384))
    x = rng.standard_normal(384)
    w = weights_io.build_random_model(7, "mmt")
    sx = w.gru_a.w_update
    gb = rng.standard_normal(16)
    contribs = [rng.standard_normal(16) for _ in range(6)]
    idx = rng.integers(0, 256, size=len(w.roles)).astype(np.int32)
    logits = rng.standard_normal(256)

    def timeit(fn, reps):
        fn()  # warm-up
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        return (time.perf_counter() - t0) / reps * 1e6

    cases = [
        ("gemv_dense 384x384", lambda k: k.gemv_dense(m, x), 200),
        ("block_sparse_gemv 10%", lambda k: k.block_sparse_gemv(
            sx.row_blocks, sx.block_cols, sx.values, x, sx.rows), 500),
        ("embed_sum 24 roles", lambda k: k.embed_sum(w.emb_stack, idx), 500),
        ("dual_fc_multi 8 heads", lambda k: k.dual_fc_multi(*w.fc_stacks, gb), 500),
        ("gru_gates 16", lambda k: k.gru_gates(*contribs, gb, gb, gb, gb), 500),
        ("sample_from_logits", lambda k: k.sample_from_logits(logits, 1.0, 0.5), 500),
    ]
    print(f"per-call kernel timings (microseconds), backends: {', '.join(available)}")
    header = f"  {'kernel':28s}" + "".join(f"{b:>12s}" for b in available)
    print(header)
    for name, fn, reps in cases:
        cells = []
        for b in available:
            k = kernels.get(b)
            cells.append(f"{timeit(lambda: fn(k), reps):12.2f}")
        print(f"  {name:28s}" + "".join(cells))

    print()
    print(f"synthesis RTF ({args.frames} frames per mode):")
    fb = _default_bank(w.n_b)
    wb = weights_io.baseline_counterpart(w)
    for b in available:
        kernels.use(b)
        rep_base = perf.rtf_bench(wb, "baseline", frames=args.frames, seed=7, runs=1)
        rep_mmt = perf.rtf_bench(w, "mmt", frames=args.frames, fb=fb, seed=7, runs=1)
        print(
            f"  {b:>4s}: baseline rtf={rep_base.rtf:.4f}  mmt rtf={rep_mmt.rtf:.4f}  "
            f"speedup={rep_base.rtf / rep_mmt.rtf:.2f}x"
        )
    kernels.use(previous)
    return 0


def _softmax(v):
    e = np.exp(v - np.max(v))
    return e / e.sum()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmlpc",
        description="Multi-band multi-time LPC vocoder inference engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a WAV from a .f32feat feature file")
    p.add_argument("--weights", required=True, help="MMLP weights file")
    p.add_argument("--features", required=True, help="raw float32 feature file (20 per frame)")
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--mode", choices=["baseline", "mmt"], default=None,
                   help="synthesis mode (default: the weights file's mode)")
    p.add_argument("--seed", type=int, default=42, help="sampling RNG seed")
    p.add_argument("--temperature", type=float, default=1.0, help="sampling temperature")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="measure real-time factor")
    p.add_argument("--weights", required=True, help="MMLP weights file")
    p.add_argument("--frames", type=int, default=1000, help="synthetic frames per run")
    p.add_argument("--mode", choices=["baseline", "mmt", "both"], default="both")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--backend", choices=["auto", "py", "ext"], default="auto",
                   help="kernel backend to benchmark")
    p.add_argument("--machine", action="store_true", help="key: value output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("flops", help="evaluate the analytic complexity model")
    p.add_argument("--d", type=float, default=0.1, help="GRU-A density")
    p.add_argument("--ga", type=int, default=384, help="GRU-A size")
    p.add_argument("--gb", type=int, default=16, help="GRU-B size")
    p.add_argument("--q", type=int, default=256, help="output alphabet size")
    p.add_argument("--bands", type=int, default=4, help="subband count")
    p.add_argument("--timespan", type=int, default=2, help="adjacent times per pass")
    p.add_argument("--fs", type=int, default=16000, help="sample rate in Hz")
    p.add_argument("--machine", action="store_true", help="key: value output")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("fb-check", help="filter bank roundtrip check")
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--taps", type=int, default=64)
    p.add_argument("--signal", choices=["impulse", "noise", "sine"], default="noise")
    p.add_argument("--freq", type=float, default=1000.0, help="sine frequency in Hz")
    p.set_defaults(func=cmd_fb_check)

    p = sub.add_parser("attn-demo", help="run an attention mechanism on synthetic states")
    p.add_argument("--mechanism", choices=["lsa", "forward", "gmm"], required=True)
    p.add_argument("--enc-len", type=int, default=10)
    p.add_argument("--dec-len", type=int, default=30)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_attn_demo)

    p = sub.add_parser("gen-weights", help="generate random test weights")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["baseline", "mmt"], default="mmt")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ga", type=int, default=384)
    p.add_argument("--gb", type=int, default=16)
    p.add_argument("--bands", type=int, default=4)
    p.set_defaults(func=cmd_gen_weights)

    p = sub.add_parser("backend-bench", help="compare NumPy and compiled kernel backends")
    p.add_argument("--frames", type=int, default=200, help="frames per synthesis timing run")
    p.set_defaults(func=cmd_backend_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MmlpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
