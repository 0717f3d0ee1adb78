"""Frame-rate network and the two autoregressive sample loops.

The baseline loop emits one full-band sample per network forward pass
(160 passes per 10 ms frame at 16 kHz).  The multi-band multi-time loop
emits two adjacent samples in each of N critically-sampled subbands per
pass, cutting the pass count by 2N (20 passes per frame for N=4): the
shared GRU stack feeds 2N independent dual-FC heads, excitations are
sampled per head, and each subband sample is rebuilt as
``s = decode(e) + p`` with ``p`` the order-16 linear prediction over that
band's sample queue.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Protocol, Sequence

import numpy as np

from . import filterbank, kernels
from .errors import ParameterError, StateError, ValidationError
from .features import (
    LPC_ORDER,
    FeatureFrame,
    LpcCoeffs,
    cepstrum_to_spectrum,
    levinson_durbin,
    mulaw_decode,
    mulaw_encode,
    spectrum_to_autocorrelation,
    subband_lpc,
)
from .neuralops import (
    ALPHABET,
    BlockSparseMatrix,
    DualFcParams,
    GruParams,
)

FRAME_SIZE = 160           # samples per 10 ms frame at 16 kHz
SAMPLE_RATE = 16000
COND_DIM = 128
FEAT_DIM = 20

MODE_BASELINE = "baseline"
MODE_MMT = "mmt"

BASELINE_ROLES = ("e_tm1", "s_tm1", "p_t")
BAND_ROLES = ("e_tm1", "e_tm2", "s_tm1", "s_tm2", "p_tm1", "p_t")


def role_order(mode: str, n_bands: int) -> tuple[str, ...]:
    """Canonical embedding-role ordering for a model configuration."""
    if mode == MODE_BASELINE:
        return BASELINE_ROLES
    return tuple(f"band{b}/{sig}" for b in range(n_bands) for sig in BAND_ROLES)


@dataclass(frozen=True)
class FrnParams:
    """Frame-rate network: two width-3 convolutions (with a residual around
    the second), then two dense tanh layers producing the condition vector."""

    conv1_w: np.ndarray    # (channels, FEAT_DIM, 3)
    conv1_b: np.ndarray
    conv2_w: np.ndarray    # (channels, channels, 3)
    conv2_b: np.ndarray
    fc1_w: np.ndarray      # (cond_dim, channels)
    fc1_b: np.ndarray
    fc2_w: np.ndarray      # (cond_dim, cond_dim)
    fc2_b: np.ndarray

    def __post_init__(self):
        for name in ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        ch = self.conv1_w.shape[0]
        if self.conv1_w.shape != (ch, FEAT_DIM, 3):
            raise ValidationError(f"conv1_w must be (channels, {FEAT_DIM}, 3), got {self.conv1_w.shape}")
        if self.conv2_w.shape != (ch, ch, 3):
            raise ValidationError(f"conv2_w must be (channels, channels, 3), got {self.conv2_w.shape}")
        cond = self.fc1_w.shape[0]
        if self.fc1_w.shape != (cond, ch) or self.fc2_w.shape != (cond, cond):
            raise ValidationError("FRN dense layer shapes inconsistent")
        for w, b in ((self.conv1_w, self.conv1_b), (self.conv2_w, self.conv2_b),
                     (self.fc1_w, self.fc1_b), (self.fc2_w, self.fc2_b)):
            if b.shape != (w.shape[0],):
                raise ValidationError("FRN bias length does not match layer output")

    @property
    def channels(self) -> int:
        return self.conv1_w.shape[0]

    @property
    def cond_dim(self) -> int:
        return self.fc1_w.shape[0]


@dataclass(frozen=True)
class ModelWeights:
    """Immutable weight container for one synthesis mode."""

    mode: str
    g_a: int
    g_b: int
    n_b: int
    n_t: int
    frn: FrnParams
    embeddings: dict            # role -> (256, 3 * g_a)
    cond_to_a: np.ndarray       # (3 * g_a, cond_dim)
    gru_a: GruParams
    w_ab: np.ndarray            # (3 * g_b, g_a)
    cond_to_b: np.ndarray       # (3 * g_b, cond_dim)
    gru_b: GruParams
    dual_fcs: tuple             # DualFcParams, one per head

    def __post_init__(self):
        if self.mode not in (MODE_BASELINE, MODE_MMT):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_BASELINE:
            if self.n_b != 1 or self.n_t != 1:
                raise ValidationError("baseline mode requires n_b = n_t = 1")
        else:
            if self.n_b < 2 or self.n_t != 2:
                raise ValidationError("mmt mode requires n_b >= 2 subbands and a time span of 2")
        if self.g_a % 16 != 0 or self.g_a <= 0 or self.g_b <= 0:
            raise ValidationError(f"bad GRU sizes g_a={self.g_a}, g_b={self.g_b}")
        heads = self.n_b * self.n_t
        if len(self.dual_fcs) != heads:
            raise ValidationError(f"expected {heads} dual-FC heads, got {len(self.dual_fcs)}")
        for fc in self.dual_fcs:
            if fc.in_dim != self.g_b:
                raise ValidationError("dual-FC input dim does not match g_b")
        if self.gru_a.size != self.g_a or self.gru_b.size != self.g_b:
            raise ValidationError("GRU parameter sizes inconsistent with header dims")
        roles = role_order(self.mode, self.n_b)
        if set(self.embeddings) != set(roles):
            raise ValidationError("embedding tables do not cover the model's input roles")
        width = 3 * self.g_a
        emb = {}
        for role in roles:
            t = np.ascontiguousarray(self.embeddings[role], dtype=np.float64)
            if t.shape != (ALPHABET, width):
                raise ValidationError(f"table {role!r} must be ({ALPHABET}, {width}), got {t.shape}")
            emb[role] = t
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "cond_to_a", np.ascontiguousarray(self.cond_to_a, dtype=np.float64))
        object.__setattr__(self, "cond_to_b", np.ascontiguousarray(self.cond_to_b, dtype=np.float64))
        object.__setattr__(self, "w_ab", np.ascontiguousarray(self.w_ab, dtype=np.float64))
        cond = self.frn.cond_dim
        if self.cond_to_a.shape != (width, cond):
            raise ValidationError(f"cond_to_a must be ({width}, {cond}), got {self.cond_to_a.shape}")
        if self.w_ab.shape != (3 * self.g_b, self.g_a):
            raise ValidationError(f"w_ab must be ({3 * self.g_b}, {self.g_a}), got {self.w_ab.shape}")
        if self.cond_to_b.shape != (3 * self.g_b, cond):
            raise ValidationError(f"cond_to_b must be ({3 * self.g_b}, {cond}), got {self.cond_to_b.shape}")

    @cached_property
    def roles(self) -> tuple[str, ...]:
        return role_order(self.mode, self.n_b)

    @cached_property
    def emb_stack(self) -> np.ndarray:
        """All role tables stacked in canonical order, (roles, 256, 3*g_a)."""
        return np.ascontiguousarray(np.stack([self.embeddings[r] for r in self.roles]))

    @cached_property
    def fc_stacks(self) -> tuple:
        """Head parameters stacked for the fused multi-head kernel."""
        w1 = np.ascontiguousarray(np.stack([fc.w1 for fc in self.dual_fcs]))
        w2 = np.ascontiguousarray(np.stack([fc.w2 for fc in self.dual_fcs]))
        a1 = np.ascontiguousarray(np.stack([fc.scale1 for fc in self.dual_fcs]))
        a2 = np.ascontiguousarray(np.stack([fc.scale2 for fc in self.dual_fcs]))
        b = np.ascontiguousarray(np.stack([fc.bias for fc in self.dual_fcs]))
        return w1, w2, a1, a2, b

    @property
    def steps_per_frame(self) -> int:
        return FRAME_SIZE // (self.n_b * self.n_t)


@dataclass
class StreamState:
    """Mutable per-synthesis state; owned by exactly one stream at a time."""

    gru_a: np.ndarray
    gru_b: np.ndarray
    lpc_queues: np.ndarray     # (n_bands, 16), newest sample last
    e_hist: np.ndarray         # (n_bands, 2) mu-law indices, newest first
    s_hist: np.ndarray         # (n_bands, 2) samples, newest first
    p_last: np.ndarray         # (n_bands,) previous prediction
    frame_index: int = 0
    step_in_frame: int = 0
    samples_per_band: int = 0

    @classmethod
    def initial(cls, w: ModelWeights) -> "StreamState":
        from .features import MULAW_ZERO

        return cls(
            gru_a=np.zeros(w.g_a),
            gru_b=np.zeros(w.g_b),
            lpc_queues=np.zeros((w.n_b, LPC_ORDER)),
            e_hist=np.full((w.n_b, 2), MULAW_ZERO, dtype=np.int64),
            s_hist=np.zeros((w.n_b, 2)),
            p_last=np.zeros(w.n_b),
        )


@dataclass(frozen=True)
class StepRecord:
    """Per-step internals exposed to instrumentation probes."""

    frame_index: int
    step_in_frame: int
    excitations: np.ndarray    # (n_times, n_bands) mu-law indices
    predictions: np.ndarray    # (n_times, n_bands)
    samples: np.ndarray        # (n_times, n_bands)


class SynthesisProbe(Protocol):
    def on_step(self, record: StepRecord) -> None: ...


class StepCounter:
    """Probe that only counts forward passes."""

    def __init__(self):
        self.steps = 0

    def on_step(self, record: StepRecord) -> None:
        self.steps += 1


class StepRecorder(StepCounter):
    """Probe that keeps every step record (tests and debugging)."""

    def __init__(self):
        super().__init__()
        self.records: list[StepRecord] = []

    def on_step(self, record: StepRecord) -> None:
        super().on_step(record)
        self.records.append(record)


def condition_contributions(w: ModelWeights, cond) -> tuple[np.ndarray, np.ndarray]:
    """Project one condition vector onto the GRU-A and GRU-B gate inputs.

    Constant within a frame; callers looping over steps should compute it
    once per frame and pass it to the step functions.
    """
    cond = np.ascontiguousarray(cond, dtype=np.float64)
    k = kernels.active()
    return k.gemv_dense(w.cond_to_a, cond), k.gemv_dense(w.cond_to_b, cond)


def _recurrent(kern, wm, h):
    if isinstance(wm, BlockSparseMatrix):
        return kern.block_sparse_gemv(wm.row_blocks, wm.block_cols, wm.values, h, wm.rows)
    return kern.gemv_dense(wm, h)


def _gru(kern, p: GruParams, contrib, h):
    g = p.size
    return kern.gru_gates(
        contrib[:g], contrib[g : 2 * g], contrib[2 * g :],
        _recurrent(kern, p.w_update, h),
        _recurrent(kern, p.w_reset, h),
        _recurrent(kern, p.w_cand, h),
        p.b_update, p.b_reset, p.b_cand, h,
    )


def _sample_heads(kern, logits, temperature, rng):
    n = logits.shape[0]
    out = np.empty(n, dtype=np.int64)
    if temperature < 1e-6:
        for h in range(n):
            out[h] = kern.argmax_band_zero(logits[h])
    else:
        for h in range(n):
            out[h] = kern.sample_from_logits(logits[h], temperature, rng.random())
    return out


def _push(queue, sample):
    queue[:-1] = queue[1:]
    queue[-1] = sample


def _check_state(state: StreamState, w: ModelWeights):
    if state is None:
        raise StateError("stream state is not initialized; use StreamState.initial()")
    if state.lpc_queues.shape != (w.n_b, LPC_ORDER) or state.gru_a.shape != (w.g_a,):
        raise StateError("stream state does not match the model configuration")


def _lpc_matrix(lpc, n_bands) -> np.ndarray:
    if isinstance(lpc, np.ndarray) and lpc.shape == (n_bands, LPC_ORDER):
        return np.ascontiguousarray(lpc, dtype=np.float64)
    rows = [c.coeffs if isinstance(c, LpcCoeffs) else np.asarray(c, dtype=np.float64) for c in lpc]
    mat = np.ascontiguousarray(np.stack(rows))
    if mat.shape != (n_bands, LPC_ORDER):
        raise ParameterError(f"need LPC coefficients for {n_bands} band(s), got shape {mat.shape}")
    return mat


def srn_step_mmt(
    state: StreamState,
    cond,
    w: ModelWeights,
    lpc,
    temperature: float,
    rng,
    probe: Optional[SynthesisProbe] = None,
    cond_contrib=None,
) -> np.ndarray:
    """One multi-band multi-time forward pass.

    Emits samples for two adjacent times in every subband, returned as a
    (2, n_bands) array, and advances the state by two subband steps.
    """
    if w.mode != MODE_MMT:
        raise ParameterError("srn_step_mmt requires mmt-mode weights")
    _check_state(state, w)
    kern = kernels.active()
    n_b = w.n_b
    lpc = _lpc_matrix(lpc, n_b)
    if cond_contrib is None:
        cond_contrib = condition_contributions(w, cond)
    ca, cb = cond_contrib

    queues = state.lpc_queues
    p_t = np.empty(n_b)
    idx = np.empty(6 * n_b, dtype=np.int32)
    for b in range(n_b):
        p_t[b] = kern.lpc_predict(queues[b], lpc[b])
        j = 6 * b
        idx[j] = state.e_hist[b, 0]
        idx[j + 1] = state.e_hist[b, 1]
        idx[j + 2] = mulaw_encode(state.s_hist[b, 0])
        idx[j + 3] = mulaw_encode(state.s_hist[b, 1])
        idx[j + 4] = mulaw_encode(state.p_last[b])
        idx[j + 5] = mulaw_encode(p_t[b])

    ia = kern.embed_sum(w.emb_stack, idx) + ca
    state.gru_a = _gru(kern, w.gru_a, ia, state.gru_a)
    ib = kern.gemv_dense(w.w_ab, state.gru_a) + cb
    state.gru_b = _gru(kern, w.gru_b, ib, state.gru_b)

    logits = kern.dual_fc_multi(*w.fc_stacks, state.gru_b)
    exc = _sample_heads(kern, logits, temperature, rng)
    e_t, e_tp1 = exc[:n_b], exc[n_b:]

    s_t = np.empty(n_b)
    s_tp1 = np.empty(n_b)
    p_tp1 = np.empty(n_b)
    for b in range(n_b):
        s_t[b] = mulaw_decode(int(e_t[b])) + p_t[b]
        _push(queues[b], s_t[b])
        p_tp1[b] = kern.lpc_predict(queues[b], lpc[b])
        s_tp1[b] = mulaw_decode(int(e_tp1[b])) + p_tp1[b]
        _push(queues[b], s_tp1[b])
        state.e_hist[b, 0] = e_tp1[b]
        state.e_hist[b, 1] = e_t[b]
        state.s_hist[b, 0] = s_tp1[b]
        state.s_hist[b, 1] = s_t[b]
        state.p_last[b] = p_tp1[b]

    state.step_in_frame += 1
    state.samples_per_band += 2
    if probe is not None:
        probe.on_step(
            StepRecord(
                frame_index=state.frame_index,
                step_in_frame=state.step_in_frame - 1,
                excitations=np.stack([e_t.copy(), e_tp1.copy()]),
                predictions=np.stack([p_t.copy(), p_tp1.copy()]),
                samples=np.stack([s_t.copy(), s_tp1.copy()]),
            )
        )
    return np.stack([s_t, s_tp1])


def srn_step_baseline(
    state: StreamState,
    cond,
    w: ModelWeights,
    lpc,
    temperature: float,
    rng,
    probe: Optional[SynthesisProbe] = None,
    cond_contrib=None,
) -> float:
    """One single-band single-time forward pass; emits one sample."""
    if w.mode != MODE_BASELINE:
        raise ParameterError("srn_step_baseline requires baseline-mode weights")
    _check_state(state, w)
    kern = kernels.active()
    lpc = _lpc_matrix(lpc, 1)
    if cond_contrib is None:
        cond_contrib = condition_contributions(w, cond)
    ca, cb = cond_contrib

    queue = state.lpc_queues[0]
    p_t = kern.lpc_predict(queue, lpc[0])
    idx = np.array(
        [state.e_hist[0, 0], mulaw_encode(state.s_hist[0, 0]), mulaw_encode(p_t)],
        dtype=np.int32,
    )

    ia = kern.embed_sum(w.emb_stack, idx) + ca
    state.gru_a = _gru(kern, w.gru_a, ia, state.gru_a)
    ib = kern.gemv_dense(w.w_ab, state.gru_a) + cb
    state.gru_b = _gru(kern, w.gru_b, ib, state.gru_b)

    logits = kern.dual_fc_multi(*w.fc_stacks, state.gru_b)
    e_t = int(_sample_heads(kern, logits, temperature, rng)[0])
    s_t = mulaw_decode(e_t) + p_t
    _push(queue, s_t)
    state.e_hist[0, 0] = e_t
    state.s_hist[0, 0] = s_t
    state.p_last[0] = p_t

    state.step_in_frame += 1
    state.samples_per_band += 1
    if probe is not None:
        probe.on_step(
            StepRecord(
                frame_index=state.frame_index,
                step_in_frame=state.step_in_frame - 1,
                excitations=np.array([[e_t]]),
                predictions=np.array([[p_t]]),
                samples=np.array([[s_t]]),
            )
        )
    return float(s_t)


def frn_forward(frames: Sequence[FeatureFrame], w: ModelWeights) -> np.ndarray:
    """Condition vectors for a frame sequence, one row per frame.

    Each convolution replication-pads its own input by one frame, so a
    frame's condition vector depends on at most two neighbors per side.
    """
    if len(frames) == 0:
        raise ParameterError("at least one feature frame is required")
    x = np.stack([f.as_vector() for f in frames])
    p = w.frn
    c1 = np.tanh(_conv3(x, p.conv1_w) + p.conv1_b)
    c2 = np.tanh(_conv3(c1, p.conv2_w) + p.conv2_b) + c1
    h = np.tanh(c2 @ p.fc1_w.T + p.fc1_b)
    return np.tanh(h @ p.fc2_w.T + p.fc2_b)


def _conv3(x, w):
    # x: (T, in), w: (out, in, 3); replication padding by one frame
    xp = np.vstack([x[:1], x, x[-1:]])
    return xp[:-2] @ w[:, :, 0].T + xp[1:-1] @ w[:, :, 1].T + xp[2:] @ w[:, :, 2].T


def lpc_predict(queue, coeffs) -> float:
    """p = sum_k a_k * s_{t-k} over a 16-deep queue (newest sample last)."""
    q = np.ascontiguousarray(queue, dtype=np.float64)
    c = coeffs.coeffs if isinstance(coeffs, LpcCoeffs) else np.ascontiguousarray(coeffs, dtype=np.float64)
    if q.shape != (LPC_ORDER,) or c.shape != (LPC_ORDER,):
        raise ParameterError(f"queue and coefficients must both have length {LPC_ORDER}")
    return float(kernels.active().lpc_predict(q, c))


def fullband_lpc(frame: FeatureFrame) -> LpcCoeffs:
    """Order-16 full-band LPC from one conditioning frame."""
    return levinson_durbin(spectrum_to_autocorrelation(cepstrum_to_spectrum(frame)))


def synthesize(
    frames: Sequence[FeatureFrame],
    w: ModelWeights,
    mode: str,
    fb: Optional[filterbank.PrototypeFilterBank] = None,
    temperature: float = 1.0,
    seed: int = 42,
    probe: Optional[SynthesisProbe] = None,
) -> np.ndarray:
    """Synthesize 16 kHz audio from conditioning frames.

    Output always has exactly 160 * len(frames) samples.  In mmt mode the
    per-band streams pass through the synthesis filter bank and the
    leading half group delay is trimmed.  Fixed (weights, frames, seed,
    temperature) give bit-identical output.
    """
    if mode not in (MODE_BASELINE, MODE_MMT):
        raise ParameterError(f"unknown synthesis mode {mode!r}")
    if w.mode != mode:
        raise ParameterError(f"weights were built for mode {w.mode!r}, not {mode!r}")
    if len(frames) == 0:
        raise ParameterError("at least one feature frame is required")
    rng = np.random.Generator(np.random.Philox(seed))
    conds = frn_forward(frames, w)
    state = StreamState.initial(w)
    total = FRAME_SIZE * len(frames)

    if mode == MODE_BASELINE:
        out = np.empty(total)
        pos = 0
        for fi, frame in enumerate(frames):
            lpc = fullband_lpc(frame).coeffs[None, :]
            contrib = condition_contributions(w, conds[fi])
            state.frame_index = fi
            state.step_in_frame = 0
            for _ in range(FRAME_SIZE):
                out[pos] = srn_step_baseline(
                    state, conds[fi], w, lpc, temperature, rng, probe, contrib
                )
                pos += 1
        return out

    if fb is None:
        raise ParameterError("mmt synthesis requires a designed filter bank")
    if fb.bands != w.n_b:
        raise ParameterError(f"filter bank has {fb.bands} bands but weights expect {w.n_b}")
    steps = w.steps_per_frame
    per_band = total // w.n_b
    streams = np.empty((w.n_b, per_band))
    for fi, frame in enumerate(frames):
        lpc = np.stack([subband_lpc(frame, b, bands=w.n_b).coeffs for b in range(w.n_b)])
        contrib = condition_contributions(w, conds[fi])
        state.frame_index = fi
        state.step_in_frame = 0
        base = fi * steps * w.n_t
        for s in range(steps):
            pair = srn_step_mmt(state, conds[fi], w, lpc, temperature, rng, probe, contrib)
            streams[:, base + w.n_t * s] = pair[0]
            streams[:, base + w.n_t * s + 1] = pair[1]
    rec = filterbank.synthesis(filterbank.SubbandSignals(streams), fb)
    trim = fb.group_delay // 2
    out = np.zeros(total)
    avail = min(total, rec.size - trim)
    out[:avail] = rec[trim : trim + avail]
    return out
