"""Forward-pass attention math at toy scale.

Three alignment mechanisms over synthetic encoder/decoder states:
location-sensitive scoring, the monotonic forward-attention recursion,
and Gaussian-mixture location attention, plus the guidance and composite
L1 losses that couple a basic alignment to two guiding alignments.
Everything here is a pure function; no training machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateAlignmentError,
    NumericError,
    ParameterError,
    ValidationError,
)

LOC_FILTERS = 32
LOC_KERNEL = 31
SIMPLEX_TOL = 1e-6


def validate_alignment(matrix, name="alignment") -> np.ndarray:
    """Check a (T_dec, L_enc) matrix of nonnegative rows each summing to 1."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be nonnegative and finite")
    sums = a.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise ValidationError(f"{name} row {worst} sums to {sums[worst]}, expected 1")
    return a


@dataclass(frozen=True)
class LsaParams:
    """Location-sensitive scoring parameters.

    Energies are v . tanh(W q + V k_i + U loc_i + b) where loc is a width-31
    convolution of the cumulative alignment with 32 filters.
    """

    w_query: np.ndarray     # (d_attn, d_query)
    v_key: np.ndarray       # (d_attn, d_key)
    u_loc: np.ndarray       # (d_attn, LOC_FILTERS)
    bias: np.ndarray        # (d_attn,)
    score: np.ndarray       # (d_attn,)
    conv: np.ndarray        # (LOC_FILTERS, LOC_KERNEL)

    def __post_init__(self):
        d = self.w_query.shape[0]
        if self.v_key.shape[0] != d or self.u_loc.shape != (d, LOC_FILTERS):
            raise ValidationError("LSA parameter shapes inconsistent")
        if self.bias.shape != (d,) or self.score.shape != (d,):
            raise ValidationError("LSA bias/score vectors must match attention dim")
        if self.conv.shape != (LOC_FILTERS, LOC_KERNEL):
            raise ValidationError(f"conv filters must be ({LOC_FILTERS}, {LOC_KERNEL})")


def random_lsa_params(rng, d_attn=16, d_query=24, d_key=24, scale=0.5) -> LsaParams:
    """Small random parameters for demos and tests."""
    return LsaParams(
        w_query=rng.normal(0, scale, (d_attn, d_query)),
        v_key=rng.normal(0, scale, (d_attn, d_key)),
        u_loc=rng.normal(0, scale, (d_attn, LOC_FILTERS)),
        bias=rng.normal(0, scale, d_attn),
        score=rng.normal(0, scale, d_attn),
        conv=rng.normal(0, scale, (LOC_FILTERS, LOC_KERNEL)),
    )


def location_features(cum_align, conv) -> np.ndarray:
    """Same-padded 1-D convolution of the cumulative alignment, (L, filters)."""
    cum = np.asarray(cum_align, dtype=np.float64)
    half = LOC_KERNEL // 2
    padded = np.concatenate([np.zeros(half), cum, np.zeros(half)])
    windows = np.lib.stride_tricks.sliding_window_view(padded, LOC_KERNEL)
    return windows @ conv.T


def lsa_score(query, keys, cum_align, params: LsaParams) -> np.ndarray:
    """One location-sensitive alignment row (softmax over encoder steps)."""
    query = np.asarray(query, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64)
    cum = np.asarray(cum_align, dtype=np.float64)
    if keys.ndim != 2 or cum.shape != (keys.shape[0],):
        raise ParameterError("keys must be (L_enc, d_key) with cum_align of length L_enc")
    if np.any(cum < 0):
        raise ParameterError("cumulative alignment must be nonnegative")
    if query.shape != (params.w_query.shape[1],) or keys.shape[1] != params.v_key.shape[1]:
        raise ParameterError("query/key dimensions do not match parameters")
    loc = location_features(cum, params.conv)
    pre = params.w_query @ query + params.bias
    energies = np.tanh(pre + keys @ params.v_key.T + loc @ params.u_loc.T) @ params.score
    return _softmax(energies)


@dataclass(frozen=True)
class ForwardAttnState:
    """Alignment distribution over encoder positions (on the simplex)."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64)
        if a.ndim != 1 or np.any(a < 0) or abs(a.sum() - 1.0) > SIMPLEX_TOL:
            raise ValidationError("alpha must be a nonnegative vector summing to 1")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def initial(cls, enc_len: int) -> "ForwardAttnState":
        a = np.zeros(enc_len)
        a[0] = 1.0
        return cls(a)

    def expected_position(self) -> float:
        return float(np.dot(np.arange(self.alpha.size), self.alpha))


def forward_attention_step(prev: ForwardAttnState, base_row) -> ForwardAttnState:
    """Monotonic recursion: alpha'(i) = (alpha(i) + alpha(i-1)) * base(i), renormalized.

    Mass can only stay in place or advance one encoder position per step.
    """
    base = np.asarray(base_row, dtype=np.float64)
    if base.shape != prev.alpha.shape:
        raise ParameterError("base row length does not match state length")
    if np.any(base < 0) or abs(base.sum() - 1.0) > SIMPLEX_TOL:
        raise ParameterError("base row must lie on the simplex")
    shifted = np.concatenate([[0.0], prev.alpha[:-1]])
    raw = (prev.alpha + shifted) * base
    norm = raw.sum()
    if norm < 1e-30:
        raise DegenerateAlignmentError("forward attention normalizer underflowed")
    return ForwardAttnState(raw / norm)


@dataclass(frozen=True)
class GmmAttnState:
    """Mixture of Gaussians over encoder positions."""

    means: np.ndarray
    widths: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.widths, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if not (m.shape == s.shape == w.shape) or m.ndim != 1:
            raise ValidationError("means/widths/weights must be equal-length vectors")
        if np.any(s <= 0):
            raise ValidationError("component widths must be positive")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValidationError("at least one mixture weight must be positive")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "widths", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def initial(cls, components: int) -> "GmmAttnState":
        return cls(
            means=np.zeros(components),
            widths=np.ones(components),
            weights=np.full(components, 1.0 / components),
        )


def gmm_attention_step(state: GmmAttnState, delta_raw, width_raw, weight_raw, enc_len: int):
    """Advance the mixture and emit an alignment row over enc_len positions.

    Means move by softplus(delta_raw) (strictly forward for finite inputs),
    widths are softplus(width_raw) + 1e-3, mixture weights a softmax.
    Returns (new_state, row).
    """
    k = state.means.size
    delta = np.asarray(delta_raw, dtype=np.float64)
    width = np.asarray(width_raw, dtype=np.float64)
    weight = np.asarray(weight_raw, dtype=np.float64)
    if not (delta.shape == width.shape == weight.shape == (k,)):
        raise ParameterError(f"raw outputs must each have shape ({k},)")
    means = state.means + _softplus(delta)
    widths = _softplus(width) + 1e-3
    weights = _softmax(weight)
    new_state = GmmAttnState(means, widths, weights)
    pos = np.arange(enc_len)[:, None]
    row = np.sum(
        weights * np.exp(-((pos - means) ** 2) / (2.0 * widths**2)), axis=1
    )
    total = row.sum()
    if not np.isfinite(total) or total <= 0:
        raise NumericError("GMM alignment row underflowed to zero mass")
    return new_state, row / total


def guidance_loss(a, a_f, a_g, lam: float) -> float:
    """lam * (mean|a - a_f| + mean|a - a_g|)."""
    if lam < 0:
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    a = np.asarray(a, dtype=np.float64)
    f = np.asarray(a_f, dtype=np.float64)
    g = np.asarray(a_g, dtype=np.float64)
    if not (a.shape == f.shape == g.shape):
        raise ParameterError("alignment matrices must share one shape")
    return float(lam * (np.mean(np.abs(a - f)) + np.mean(np.abs(a - g))))


def composite_loss(o, o_f, o_g, p, r, a, a_f, a_g, lam: float) -> float:
    """Sum of the four mean-absolute feature errors plus the guidance term."""
    r = np.asarray(r, dtype=np.float64)
    terms = []
    for name, out in (("o", o), ("o_f", o_f), ("o_g", o_g), ("p", p)):
        arr = np.asarray(out, dtype=np.float64)
        if arr.shape != r.shape:
            raise ParameterError(f"{name} shape {arr.shape} does not match reference {r.shape}")
        terms.append(float(np.mean(np.abs(arr - r))))
    return sum(terms) + guidance_loss(a, a_f, a_g, lam)


def _softmax(v):
    e = np.exp(v - np.max(v))
    return e / e.sum()


def _softplus(v):
    return np.log1p(np.exp(-np.abs(v))) + np.maximum(v, 0.0)
