"""Binary weights container ("MMLP" format) and random-weight generation.

Layout (all integers little-endian):

    magic   4 bytes  b"MMLP"
    version u32      currently 1
    mode    u8       0 = baseline, 1 = mmt
    dims    9 x u32  g_a, g_b, q, n_b, n_t, emb_width, feat_dim,
                     frn_channels, cond_dim
    count   u32      number of named tensor sections
    sections ...     u16 name length, utf-8 name, u8 kind (0 dense /
                     1 block-sparse), u8 ndim, ndim x u32 shape, payload

Dense payload is a row-major float32 array.  Block-sparse payload is a
u32 block count followed by (u32 row_block, u32 col, 16 x f32) records.
Magic and version are checked before anything header-sized is allocated,
and every section's declared size is bounded by the bytes remaining.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import MalformedInputError, ValidationError
from .neuralops import ALPHABET, BLOCK_ROWS, BlockSparseMatrix, DualFcParams, GruParams
from .vocoder import COND_DIM, FEAT_DIM, MODE_BASELINE, MODE_MMT, FrnParams, ModelWeights, role_order

MAGIC = b"MMLP"
VERSION = 1
_MODE_TAGS = {MODE_BASELINE: 0, MODE_MMT: 1}
_TAG_MODES = {v: k for k, v in _MODE_TAGS.items()}

KIND_DENSE = 0
KIND_SPARSE = 1

_MAX_NAME = 256
_MAX_NDIM = 4
_MAX_DIM = 1 << 24


class _Reader:
    """Sequential parser that reports the byte offset of any failure."""

    def __init__(self, data: bytes, source: str):
        self.data = data
        self.source = source
        self.offset = 0

    def fail(self, why: str):
        raise MalformedInputError(
            f"{self.source}: invalid MMLP weights at byte {self.offset}: {why}"
        )

    def take(self, n: int) -> bytes:
        if n < 0 or self.offset + n > len(self.data):
            self.fail(f"needs {n} more bytes but only {len(self.data) - self.offset} remain")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset


def parse_weights(data: bytes, source: str = "<bytes>") -> ModelWeights:
    """Parse and fully validate a serialized weights container."""
    r = _Reader(data, source)
    if r.take(4) != MAGIC:
        r.offset = 0
        r.fail(f"bad magic (expected {MAGIC!r})")
    version = r.u32()
    if version != VERSION:
        r.fail(f"unsupported version {version} (expected {VERSION})")
    mode_tag = r.u8()
    if mode_tag not in _TAG_MODES:
        r.fail(f"unknown mode tag {mode_tag}")
    mode = _TAG_MODES[mode_tag]
    g_a, g_b, q, n_b, n_t, emb_width, feat_dim, channels, cond_dim = (r.u32() for _ in range(9))
    for name, value, bound in (
        ("g_a", g_a, 1 << 16), ("g_b", g_b, 1 << 16), ("q", q, 1 << 16),
        ("n_b", n_b, 64), ("n_t", n_t, 64), ("emb_width", emb_width, 1 << 20),
        ("feat_dim", feat_dim, 1 << 12), ("frn_channels", channels, 1 << 12),
        ("cond_dim", cond_dim, 1 << 12),
    ):
        if not 0 < value < bound:
            r.fail(f"dimension {name}={value} out of range")
    if q != ALPHABET:
        r.fail(f"alphabet size must be {ALPHABET}, got {q}")
    if emb_width != 3 * g_a:
        r.fail(f"emb_width {emb_width} != 3 * g_a = {3 * g_a}")
    if feat_dim != FEAT_DIM:
        r.fail(f"feat_dim must be {FEAT_DIM}, got {feat_dim}")

    n_sections = r.u32()
    if n_sections > 4096:
        r.fail(f"implausible section count {n_sections}")
    sections: dict[str, object] = {}
    for _ in range(n_sections):
        name_len = r.u16()
        if name_len == 0 or name_len > _MAX_NAME:
            r.fail(f"section name length {name_len} out of range")
        name = r.take(name_len).decode("utf-8", errors="replace")
        kind = r.u8()
        ndim = r.u8()
        if ndim == 0 or ndim > _MAX_NDIM:
            r.fail(f"section {name!r}: ndim {ndim} out of range")
        shape = tuple(r.u32() for _ in range(ndim))
        if any(d == 0 or d > _MAX_DIM for d in shape):
            r.fail(f"section {name!r}: shape {shape} out of range")
        if name in sections:
            r.fail(f"duplicate section {name!r}")
        if kind == KIND_DENSE:
            count = 1
            for d in shape:
                count *= d  # python ints: no overflow before the bound check
            if count * 4 > r.remaining:
                r.fail(f"section {name!r} declares {count} floats but file is too short")
            payload = np.frombuffer(r.take(count * 4), dtype="<f4").reshape(shape)
            sections[name] = payload.astype(np.float64)
        elif kind == KIND_SPARSE:
            if ndim != 2:
                r.fail(f"block-sparse section {name!r} must be 2-D")
            rows, cols = shape
            if rows % BLOCK_ROWS != 0:
                r.fail(f"section {name!r}: rows {rows} not divisible by {BLOCK_ROWS}")
            n_blocks = r.u32()
            record = 8 + 4 * BLOCK_ROWS
            if n_blocks * record > r.remaining:
                r.fail(f"section {name!r} declares {n_blocks} blocks but file is too short")
            raw = np.frombuffer(r.take(n_blocks * record), dtype=np.uint8).reshape(n_blocks, record)
            row_blocks = raw[:, 0:4].copy().view("<u4").ravel()
            block_cols = raw[:, 4:8].copy().view("<u4").ravel()
            values = raw[:, 8:].copy().view("<f4").reshape(n_blocks, BLOCK_ROWS)
            blocks = [
                (int(row_blocks[i]), int(block_cols[i]), values[i].astype(np.float64))
                for i in range(n_blocks)
            ]
            try:
                sections[name] = BlockSparseMatrix(rows, cols, blocks)
            except ValidationError as exc:
                r.fail(f"section {name!r}: {exc}")
        else:
            r.fail(f"section {name!r}: unknown kind {kind}")
    if r.remaining:
        r.fail(f"{r.remaining} trailing bytes after the last section")

    def dense(name, shape=None):
        if name not in sections:
            r.fail(f"missing section {name!r}")
        t = sections.pop(name)
        if isinstance(t, BlockSparseMatrix):
            r.fail(f"section {name!r} must be dense")
        if shape is not None and t.shape != shape:
            r.fail(f"section {name!r} has shape {t.shape}, expected {shape}")
        return t

    def sparse(name, shape):
        if name not in sections:
            r.fail(f"missing section {name!r}")
        t = sections.pop(name)
        if not isinstance(t, BlockSparseMatrix):
            r.fail(f"section {name!r} must be block-sparse")
        if (t.rows, t.cols) != shape:
            r.fail(f"section {name!r} has shape {(t.rows, t.cols)}, expected {shape}")
        return t

    frn = FrnParams(
        conv1_w=dense("frn.conv1_w", (channels, feat_dim, 3)),
        conv1_b=dense("frn.conv1_b", (channels,)),
        conv2_w=dense("frn.conv2_w", (channels, channels, 3)),
        conv2_b=dense("frn.conv2_b", (channels,)),
        fc1_w=dense("frn.fc1_w", (cond_dim, channels)),
        fc1_b=dense("frn.fc1_b", (cond_dim,)),
        fc2_w=dense("frn.fc2_w", (cond_dim, cond_dim)),
        fc2_b=dense("frn.fc2_b", (cond_dim,)),
    )
    gru_a = GruParams(
        w_update=sparse("gru_a.w_update", (g_a, g_a)),
        w_reset=sparse("gru_a.w_reset", (g_a, g_a)),
        w_cand=sparse("gru_a.w_cand", (g_a, g_a)),
        b_update=dense("gru_a.b_update", (g_a,)),
        b_reset=dense("gru_a.b_reset", (g_a,)),
        b_cand=dense("gru_a.b_cand", (g_a,)),
    )
    gru_b = GruParams(
        w_update=dense("gru_b.w_update", (g_b, g_b)),
        w_reset=dense("gru_b.w_reset", (g_b, g_b)),
        w_cand=dense("gru_b.w_cand", (g_b, g_b)),
        b_update=dense("gru_b.b_update", (g_b,)),
        b_reset=dense("gru_b.b_reset", (g_b,)),
        b_cand=dense("gru_b.b_cand", (g_b,)),
    )
    roles = role_order(mode, n_b)
    embeddings = {role: dense(f"emb.{role}", (ALPHABET, emb_width)) for role in roles}
    heads = n_b * n_t
    dual_fcs = tuple(
        DualFcParams(
            w1=dense(f"fc{i}.w1", (ALPHABET, g_b)),
            w2=dense(f"fc{i}.w2", (ALPHABET, g_b)),
            scale1=dense(f"fc{i}.a1", (ALPHABET,)),
            scale2=dense(f"fc{i}.a2", (ALPHABET,)),
            bias=dense(f"fc{i}.b", (ALPHABET,)),
        )
        for i in range(heads)
    )
    cond_to_a = dense("cond_to_a", (3 * g_a, cond_dim))
    cond_to_b = dense("cond_to_b", (3 * g_b, cond_dim))
    w_ab = dense("w_ab", (3 * g_b, g_a))
    if sections:
        r.fail(f"unexpected extra sections: {sorted(sections)}")
    try:
        return ModelWeights(
            mode=mode, g_a=g_a, g_b=g_b, n_b=n_b, n_t=n_t, frn=frn,
            embeddings=embeddings, cond_to_a=cond_to_a, gru_a=gru_a,
            w_ab=w_ab, cond_to_b=cond_to_b, gru_b=gru_b, dual_fcs=dual_fcs,
        )
    except ValidationError as exc:
        raise MalformedInputError(f"{source}: inconsistent MMLP weights: {exc}") from exc


def load_weights(path) -> ModelWeights:
    """Read and validate a weights file from disk."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise MalformedInputError(f"{p}: cannot read weights file: {exc}") from exc
    return parse_weights(data, source=str(p))


def _emit_dense(out: list[bytes], name: str, arr: np.ndarray):
    arr = np.asarray(arr)
    nb = name.encode("utf-8")
    out.append(struct.pack("<H", len(nb)))
    out.append(nb)
    out.append(struct.pack("<BB", KIND_DENSE, arr.ndim))
    out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.append(arr.astype("<f4").tobytes(order="C"))


def _emit_sparse(out: list[bytes], name: str, m: BlockSparseMatrix):
    nb = name.encode("utf-8")
    out.append(struct.pack("<H", len(nb)))
    out.append(nb)
    out.append(struct.pack("<BB", KIND_SPARSE, 2))
    out.append(struct.pack("<2I", m.rows, m.cols))
    out.append(struct.pack("<I", m.n_blocks))
    for rb, c, vals in zip(m.row_blocks, m.block_cols, m.values):
        out.append(struct.pack("<2I", int(rb), int(c)))
        out.append(vals.astype("<f4").tobytes())


def serialize_weights(w: ModelWeights) -> bytes:
    """Serialize a model to the MMLP container format."""
    out: list[bytes] = [MAGIC, struct.pack("<I", VERSION), struct.pack("<B", _MODE_TAGS[w.mode])]
    out.append(
        struct.pack(
            "<9I", w.g_a, w.g_b, ALPHABET, w.n_b, w.n_t, 3 * w.g_a,
            FEAT_DIM, w.frn.channels, w.frn.cond_dim,
        )
    )
    body: list[bytes] = []
    count = 0

    def dense(name, arr):
        nonlocal count
        _emit_dense(body, name, arr)
        count += 1

    def sparse(name, m):
        nonlocal count
        _emit_sparse(body, name, m)
        count += 1

    p = w.frn
    for name, arr in (
        ("frn.conv1_w", p.conv1_w), ("frn.conv1_b", p.conv1_b),
        ("frn.conv2_w", p.conv2_w), ("frn.conv2_b", p.conv2_b),
        ("frn.fc1_w", p.fc1_w), ("frn.fc1_b", p.fc1_b),
        ("frn.fc2_w", p.fc2_w), ("frn.fc2_b", p.fc2_b),
    ):
        dense(name, arr)
    for gate in ("update", "reset", "cand"):
        sparse(f"gru_a.w_{gate}", getattr(w.gru_a, f"w_{gate}"))
        dense(f"gru_a.b_{gate}", getattr(w.gru_a, f"b_{gate}"))
        dense(f"gru_b.w_{gate}", getattr(w.gru_b, f"w_{gate}"))
        dense(f"gru_b.b_{gate}", getattr(w.gru_b, f"b_{gate}"))
    for role in w.roles:
        dense(f"emb.{role}", w.embeddings[role])
    for i, fc in enumerate(w.dual_fcs):
        dense(f"fc{i}.w1", fc.w1)
        dense(f"fc{i}.w2", fc.w2)
        dense(f"fc{i}.a1", fc.scale1)
        dense(f"fc{i}.a2", fc.scale2)
        dense(f"fc{i}.b", fc.bias)
    dense("cond_to_a", w.cond_to_a)
    dense("cond_to_b", w.cond_to_b)
    dense("w_ab", w.w_ab)

    out.append(struct.pack("<I", count))
    out.extend(body)
    return b"".join(out)


def build_random_model(
    seed: int,
    mode: str,
    g_a: int = 384,
    g_b: int = 16,
    n_b: int = 4,
    frn_channels: int = 128,
    cond_dim: int = COND_DIM,
    density: float = 0.1,
) -> ModelWeights:
    """Random small-magnitude model for testing without trained weights.

    Weights are uniform in [-0.1, 0.1] (rounded to float32 so a serialize/
    load round-trip is exact) and GRU-A uses 16x1 blocks at the requested
    density.
    """
    if mode == MODE_BASELINE:
        n_b, n_t = 1, 1
    else:
        n_t = 2
    rng = np.random.Generator(np.random.Philox(seed))

    def u(*shape):
        return rng.uniform(-0.1, 0.1, shape).astype(np.float32).astype(np.float64)

    def sparse_mat():
        n_rb = g_a // BLOCK_ROWS
        total = n_rb * g_a
        n_blocks = max(1, round(density * total))
        chosen = rng.permutation(total)[:n_blocks]
        blocks = [(int(k // g_a), int(k % g_a), u(BLOCK_ROWS)) for k in chosen]
        return BlockSparseMatrix(g_a, g_a, blocks)

    frn = FrnParams(
        conv1_w=u(frn_channels, FEAT_DIM, 3), conv1_b=u(frn_channels),
        conv2_w=u(frn_channels, frn_channels, 3), conv2_b=u(frn_channels),
        fc1_w=u(cond_dim, frn_channels), fc1_b=u(cond_dim),
        fc2_w=u(cond_dim, cond_dim), fc2_b=u(cond_dim),
    )
    gru_a = GruParams(
        w_update=sparse_mat(), w_reset=sparse_mat(), w_cand=sparse_mat(),
        b_update=u(g_a), b_reset=u(g_a), b_cand=u(g_a),
    )
    gru_b = GruParams(
        w_update=u(g_b, g_b), w_reset=u(g_b, g_b), w_cand=u(g_b, g_b),
        b_update=u(g_b), b_reset=u(g_b), b_cand=u(g_b),
    )
    roles = role_order(mode, n_b)
    embeddings = {role: u(ALPHABET, 3 * g_a) for role in roles}
    heads = n_b * n_t
    dual_fcs = tuple(
        DualFcParams(w1=u(ALPHABET, g_b), w2=u(ALPHABET, g_b),
                     scale1=u(ALPHABET), scale2=u(ALPHABET), bias=u(ALPHABET))
        for _ in range(heads)
    )
    return ModelWeights(
        mode=mode, g_a=g_a, g_b=g_b, n_b=n_b, n_t=n_t, frn=frn,
        embeddings=embeddings, cond_to_a=u(3 * g_a, cond_dim), gru_a=gru_a,
        w_ab=u(3 * g_b, g_a), cond_to_b=u(3 * g_b, cond_dim), gru_b=gru_b,
        dual_fcs=dual_fcs,
    )


def gen_random_weights(seed: int, mode: str, **dims) -> bytes:
    """Serialized random model; see :func:`build_random_model`."""
    return serialize_weights(build_random_model(seed, mode, **dims))


def baseline_counterpart(w: ModelWeights) -> ModelWeights:
    """Structure-preserving baseline model derived from mmt weights.

    Reuses the shared layers and maps band 0's e/s/p tables and head 0
    onto the baseline roles, so both modes run with identical layer sizes.
    Intended for speed comparisons from a single weights file, not for
    audio-quality claims.
    """
    if w.mode != MODE_MMT:
        raise ValidationError("baseline counterpart can only be derived from mmt weights")
    embeddings = {
        "e_tm1": w.embeddings["band0/e_tm1"],
        "s_tm1": w.embeddings["band0/s_tm1"],
        "p_t": w.embeddings["band0/p_t"],
    }
    return ModelWeights(
        mode=MODE_BASELINE, g_a=w.g_a, g_b=w.g_b, n_b=1, n_t=1, frn=w.frn,
        embeddings=embeddings, cond_to_a=w.cond_to_a, gru_a=w.gru_a,
        w_ab=w.w_ab, cond_to_b=w.cond_to_b, gru_b=w.gru_b,
        dual_fcs=(w.dual_fcs[0],),
    )
