"""Bidirectional LSTM Q-network with hand-rolled reverse-mode gradients.

Weights are shared across the frame axis, so one network scores sequences
of any length: per-frame features (quality, scaled history count) are
embedded, scanned by a forward and a backward LSTM, and each position's
concatenated hidden pair is mapped through a small tanh head to a scalar
Q-value. Everything is float64 numpy; gradients are exact and verified
against central finite differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit as _sigmoid

from .episode import AgentState
from .errors import DimensionError, FormatError, NumericError

FEATURE_DIM = 2  # (quality, history / h_scale)
DEFAULT_EMBED_DIM = 32
DEFAULT_HIDDEN_DIM = 64
DEFAULT_HEAD_WIDTH = 64
DEFAULT_H_SCALE = 8.0  # evaluation horizon; one normalizer for train and test

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAM_MAGIC = b"FPQN"
PARAM_VERSION = 1

# Fixed tensor order for gradients, Adam moments, and the file format.
TENSOR_FIELDS = (
    "embed_w", "embed_b",
    "fwd_wx", "fwd_wh", "fwd_b",
    "bwd_wx", "bwd_wh", "bwd_b",
    "head_w1", "head_b1", "head_w2", "head_b2",
)


@dataclass
class GradientBundle:
    """Per-tensor gradients (or Adam moments), same shapes as the params."""

    embed_w: np.ndarray
    embed_b: np.ndarray
    fwd_wx: np.ndarray
    fwd_wh: np.ndarray
    fwd_b: np.ndarray
    bwd_wx: np.ndarray
    bwd_wh: np.ndarray
    bwd_b: np.ndarray
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray

    def tensors(self):
        return [getattr(self, name) for name in TENSOR_FIELDS]


@dataclass
class QNetworkParams:
    """Network weights plus the fixed feature-scaling metadata.

    `h_scale` divides raw history counts at the feature boundary;
    `use_quality` / `use_history` implement the state-component ablation
    by zeroing the corresponding feature.
    """

    embed_w: np.ndarray
    embed_b: np.ndarray
    fwd_wx: np.ndarray
    fwd_wh: np.ndarray
    fwd_b: np.ndarray
    bwd_wx: np.ndarray
    bwd_wh: np.ndarray
    bwd_b: np.ndarray
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray
    h_scale: float = DEFAULT_H_SCALE
    use_quality: bool = True
    use_history: bool = True

    @property
    def embed_dim(self) -> int:
        return self.embed_w.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.fwd_wh.shape[1]

    @property
    def head_width(self) -> int:
        return self.head_w1.shape[0]

    def tensors(self):
        return [getattr(self, name) for name in TENSOR_FIELDS]

    def copy(self) -> "QNetworkParams":
        return replace(self, **{name: getattr(self, name).copy() for name in TENSOR_FIELDS})

    def n_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors()))


def init_params(
    seed: int = 0,
    embed_dim: int = DEFAULT_EMBED_DIM,
    hidden_dim: int = DEFAULT_HIDDEN_DIM,
    head_width: int = DEFAULT_HEAD_WIDTH,
    h_scale: float = DEFAULT_H_SCALE,
    use_quality: bool = True,
    use_history: bool = True,
) -> QNetworkParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases, forget-gate bias +1."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 7)))
    e, h, w = embed_dim, hidden_dim, head_width

    def uniform(shape, fan_in):
        limit = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-limit, limit, size=shape)

    def cell():
        wx = uniform((4 * h, e), e)
        wh = uniform((4 * h, h), h)
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # gate order (i, f, g, o): forget bias +1
        return wx, wh, b

    fwd_wx, fwd_wh, fwd_b = cell()
    bwd_wx, bwd_wh, bwd_b = cell()
    return QNetworkParams(
        embed_w=uniform((e, FEATURE_DIM), FEATURE_DIM),
        embed_b=np.zeros(e),
        fwd_wx=fwd_wx, fwd_wh=fwd_wh, fwd_b=fwd_b,
        bwd_wx=bwd_wx, bwd_wh=bwd_wh, bwd_b=bwd_b,
        head_w1=uniform((w, 2 * h), 2 * h),
        head_b1=np.zeros(w),
        head_w2=uniform((w,), w),
        head_b2=np.zeros(1),
        h_scale=h_scale,
        use_quality=use_quality,
        use_history=use_history,
    )


def zero_grads(params: QNetworkParams) -> GradientBundle:
    return GradientBundle(**{name: np.zeros_like(getattr(params, name)) for name in TENSOR_FIELDS})


def features(params: QNetworkParams, state: AgentState) -> np.ndarray:
    """(N, 2) feature matrix for one state."""
    q = state.quality if params.use_quality else np.zeros_like(state.quality)
    h = (
        state.history.astype(np.float64) / params.h_scale
        if params.use_history
        else np.zeros(state.history.size)
    )
    return np.stack([q, h], axis=-1)


def _scan(wx, wh, b, e, reverse: bool):
    """LSTM scan over (B, N, E) embeddings; returns hidden states and the
    per-position activation cache needed for backprop. The input-side gate
    contribution is one big matmul; the loop carries only the recurrence."""
    bsz, n, _ = e.shape
    hdim = wh.shape[1]
    order = range(n - 1, -1, -1) if reverse else range(n)
    zx = e @ wx.T + b  # (B, N, 4H)
    h = np.zeros((bsz, hdim))
    c = np.zeros((bsz, hdim))
    hs = np.zeros((bsz, n, hdim))
    cache = [None] * n
    for idx in order:
        z = zx[:, idx] + h @ wh.T
        i = _sigmoid(z[:, :hdim])
        f = _sigmoid(z[:, hdim : 2 * hdim])
        g = np.tanh(z[:, 2 * hdim : 3 * hdim])
        o = _sigmoid(z[:, 3 * hdim :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache[idx] = (i, f, g, o, tc, h, c)
        h, c = h_new, c_new
        hs[:, idx] = h_new
    return hs, cache


def _scan_backward(wx, wh, dh_out, e, cache, reverse: bool):
    """BPTT for one scan direction. `dh_out` is the head's gradient w.r.t.
    each position's hidden state. Per-position gate gradients are collected
    and contracted against the inputs in single einsum calls at the end."""
    bsz, n, _ = e.shape
    hdim = wh.shape[1]
    dz_all = np.zeros((bsz, n, 4 * hdim))
    h_prev_all = np.zeros((bsz, n, hdim))
    dh_next = np.zeros((bsz, hdim))
    dc_next = np.zeros((bsz, hdim))
    order = range(n) if reverse else range(n - 1, -1, -1)
    for idx in order:
        i, f, g, o, tc, h_prev, c_prev = cache[idx]
        dh = dh_out[:, idx] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dc_next = dc * f
        dz = dz_all[:, idx]
        dz[:, :hdim] = dc * g * i * (1.0 - i)
        dz[:, hdim : 2 * hdim] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * hdim : 3 * hdim] = dc * i * (1.0 - g * g)
        dz[:, 3 * hdim :] = do * o * (1.0 - o)
        h_prev_all[:, idx] = h_prev
        dh_next = dz @ wh
    d_wx = np.einsum("bnk,bne->ke", dz_all, e)
    d_wh = np.einsum("bnk,bnh->kh", dz_all, h_prev_all)
    d_b = dz_all.sum(axis=(0, 1))
    d_e = dz_all @ wx
    return d_wx, d_wh, d_b, d_e


def _forward_batch(params: QNetworkParams, x: np.ndarray):
    """x: (B, N, F) -> Q-values (B, N) plus the backprop cache."""
    e = x @ params.embed_w.T + params.embed_b
    h_fwd, cache_fwd = _scan(params.fwd_wx, params.fwd_wh, params.fwd_b, e, reverse=False)
    h_bwd, cache_bwd = _scan(params.bwd_wx, params.bwd_wh, params.bwd_b, e, reverse=True)
    u = np.concatenate([h_fwd, h_bwd], axis=-1)
    z1 = u @ params.head_w1.T + params.head_b1
    a1 = np.tanh(z1)
    q = a1 @ params.head_w2 + params.head_b2[0]
    return q, (x, e, cache_fwd, cache_bwd, u, a1)


def _backward_batch(params: QNetworkParams, cache, dq: np.ndarray) -> GradientBundle:
    x, e, cache_fwd, cache_bwd, u, a1 = cache
    hdim = params.hidden_dim
    d_w2 = np.einsum("bn,bnw->w", dq, a1)
    d_b2 = np.array([dq.sum()])
    da1 = dq[..., None] * params.head_w2
    dz1 = da1 * (1.0 - a1 * a1)
    d_w1 = np.einsum("bnw,bnu->wu", dz1, u)
    d_b1 = dz1.sum(axis=(0, 1))
    du = dz1 @ params.head_w1
    d_fwd_wx, d_fwd_wh, d_fwd_b, d_e1 = _scan_backward(
        params.fwd_wx, params.fwd_wh, du[..., :hdim], e, cache_fwd, reverse=False
    )
    d_bwd_wx, d_bwd_wh, d_bwd_b, d_e2 = _scan_backward(
        params.bwd_wx, params.bwd_wh, du[..., hdim:], e, cache_bwd, reverse=True
    )
    d_e = d_e1 + d_e2
    d_embed_w = np.einsum("bne,bnf->ef", d_e, x)
    d_embed_b = d_e.sum(axis=(0, 1))
    return GradientBundle(
        embed_w=d_embed_w, embed_b=d_embed_b,
        fwd_wx=d_fwd_wx, fwd_wh=d_fwd_wh, fwd_b=d_fwd_b,
        bwd_wx=d_bwd_wx, bwd_wh=d_bwd_wh, bwd_b=d_bwd_b,
        head_w1=d_w1, head_b1=d_b1, head_w2=d_w2, head_b2=d_b2,
    )


def _locate_nonfinite(params: QNetworkParams, x: np.ndarray) -> str:
    e = x @ params.embed_w.T + params.embed_b
    if not np.isfinite(e).all():
        return "embed"
    h_fwd, _ = _scan(params.fwd_wx, params.fwd_wh, params.fwd_b, e, reverse=False)
    if not np.isfinite(h_fwd).all():
        return "forward LSTM"
    h_bwd, _ = _scan(params.bwd_wx, params.bwd_wh, params.bwd_b, e, reverse=True)
    if not np.isfinite(h_bwd).all():
        return "backward LSTM"
    return "head"


def forward(params: QNetworkParams, state: AgentState) -> np.ndarray:
    """Per-frame Q-values for one state, length N. Deterministic."""
    x = features(params, state)
    if not np.isfinite(x).all():
        raise NumericError("non-finite values in network input")
    q, _ = _forward_batch(params, x[None])
    q = q[0]
    if not np.isfinite(q).all():
        raise NumericError(f"non-finite Q-values produced in {_locate_nonfinite(params, x[None])}")
    return q


def forward_many(params: QNetworkParams, states: list[AgentState]) -> list[np.ndarray]:
    """Q-values for many states at once, grouped internally by sequence
    length; results align with the input order."""
    by_len: dict[int, list[int]] = {}
    for pos, state in enumerate(states):
        by_len.setdefault(state.n_frames, []).append(pos)
    out: list[np.ndarray | None] = [None] * len(states)
    for n in sorted(by_len):
        idxs = by_len[n]
        x = np.stack([features(params, states[i]) for i in idxs])
        q, _ = _forward_batch(params, x)
        for row, i in enumerate(idxs):
            out[i] = q[row]
    return out


def loss_and_grad(
    params: QNetworkParams, state: AgentState, action: int, target: float
) -> tuple[float, GradientBundle]:
    """Squared error on the selected action's Q-value and its exact
    gradient with respect to every parameter."""
    n = state.n_frames
    if not 0 <= action < n:
        raise IndexError(f"action {action} out of range [0, {n})")
    x = features(params, state)[None]
    if not np.isfinite(x).all():
        raise NumericError("non-finite values in network input")
    q, cache = _forward_batch(params, x)
    if not np.isfinite(q).all():
        raise NumericError(f"non-finite Q-values produced in {_locate_nonfinite(params, x)}")
    diff = q[0, action] - target
    dq = np.zeros_like(q)
    dq[0, action] = 2.0 * diff
    grads = _backward_batch(params, cache, dq)
    return float(diff * diff), grads


def batch_loss_and_grad(
    params: QNetworkParams,
    items: list[tuple[AgentState, int, float]],
) -> tuple[float, GradientBundle]:
    """Mean squared error over a batch and its gradient. Items are grouped
    by sequence length and reduced in a fixed order, so the result does not
    depend on batch composition quirks."""
    if not items:
        raise DimensionError("empty batch")
    total = len(items)
    by_len: dict[int, list[int]] = {}
    for pos, (state, _, _) in enumerate(items):
        by_len.setdefault(state.n_frames, []).append(pos)
    grads = zero_grads(params)
    loss = 0.0
    for n in sorted(by_len):
        idxs = by_len[n]
        x = np.stack([features(params, items[i][0]) for i in idxs])
        q, cache = _forward_batch(params, x)
        actions = np.array([items[i][1] for i in idxs])
        targets = np.array([items[i][2] for i in idxs])
        rows = np.arange(len(idxs))
        diff = q[rows, actions] - targets
        loss += float((diff * diff).sum())
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * diff / total
        part = _backward_batch(params, cache, dq)
        for name in TENSOR_FIELDS:
            acc = getattr(grads, name)
            acc += getattr(part, name)
    if not np.isfinite(loss):
        raise NumericError("non-finite batch loss")
    return loss / total, grads


@dataclass
class AdamState:
    """First/second moment estimates and the shared step counter."""

    first_moment: GradientBundle
    second_moment: GradientBundle
    step_count: int = 0


def init_adam(params: QNetworkParams) -> AdamState:
    return AdamState(first_moment=zero_grads(params), second_moment=zero_grads(params))


def adam_step(
    params: QNetworkParams,
    grads: GradientBundle,
    adam: AdamState,
    lr: float,
) -> tuple[QNetworkParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    t = adam.step_count + 1
    new_params = {}
    new_m = {}
    new_v = {}
    for name in TENSOR_FIELDS:
        theta = getattr(params, name)
        g = getattr(grads, name)
        if g.shape != theta.shape:
            raise DimensionError(
                f"gradient shape {g.shape} != parameter shape {theta.shape} for {name}"
            )
        m = ADAM_BETA1 * getattr(adam.first_moment, name) + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * getattr(adam.second_moment, name) + (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        new_params[name] = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        new_m[name] = m
        new_v[name] = v
    updated = replace(params, **new_params)
    return updated, AdamState(
        first_moment=GradientBundle(**new_m),
        second_moment=GradientBundle(**new_v),
        step_count=t,
    )


def gradient_check(
    draws: int = 100,
    fd_step: float = 1e-5,
    seed: int = 0,
    coords_per_tensor: int = 12,
    embed_dim: int = DEFAULT_EMBED_DIM,
    hidden_dim: int = DEFAULT_HIDDEN_DIM,
    head_width: int = DEFAULT_HEAD_WIDTH,
) -> float:
    """Compare analytic gradients against central finite differences on
    random (params, state, action, target) draws; returns the max relative
    error over all probed coordinates. Every tensor is probed each draw."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 16)))
    worst = 0.0
    for _ in range(draws):
        params = init_params(
            seed=int(rng.integers(2**31)),
            embed_dim=embed_dim,
            hidden_dim=hidden_dim,
            head_width=head_width,
        )
        n = int(rng.integers(2, 9))
        state = AgentState(
            quality=rng.uniform(0.0, 1.0, size=n),
            history=rng.integers(0, 6, size=n).astype(np.int64),
            round=0,
        )
        action = int(rng.integers(n))
        target = float(rng.normal())
        _, grads = loss_and_grad(params, state, action, target)
        x = features(params, state)[None]

        def loss_at() -> float:
            q, _ = _forward_batch(params, x)
            diff = q[0, action] - target
            return float(diff * diff)

        for name in TENSOR_FIELDS:
            tensor = getattr(params, name)
            flat = tensor.reshape(-1)
            k = min(coords_per_tensor, flat.size)
            coords = rng.choice(flat.size, size=k, replace=False)
            for coord in coords:
                orig = flat[coord]
                flat[coord] = orig + fd_step
                lo_plus = loss_at()
                flat[coord] = orig - fd_step
                lo_minus = loss_at()
                flat[coord] = orig
                numeric = (lo_plus - lo_minus) / (2.0 * fd_step)
                analytic = getattr(grads, name).reshape(-1)[coord]
                denom = max(abs(analytic), abs(numeric), 1e-6)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst


# -- parameter file format ---------------------------------------------------
#
#   magic "FPQN" | u32 version | u32 F, E, H, W | f64 h_scale | u8 flags
#   then each tensor from TENSOR_FIELDS as raw little-endian float64.

_HEADER = struct.Struct("<4sIIIIIdB")


def save_params(params: QNetworkParams, path: str | Path) -> None:
    flags = (1 if params.use_quality else 0) | (2 if params.use_history else 0)
    blob = _HEADER.pack(
        PARAM_MAGIC,
        PARAM_VERSION,
        FEATURE_DIM,
        params.embed_dim,
        params.hidden_dim,
        params.head_width,
        params.h_scale,
        flags,
    )
    parts = [blob]
    for tensor in params.tensors():
        parts.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def _expected_shapes(e: int, h: int, w: int):
    return (
        (e, FEATURE_DIM), (e,),
        (4 * h, e), (4 * h, h), (4 * h,),
        (4 * h, e), (4 * h, h), (4 * h,),
        (w, 2 * h), (w,), (w,), (1,),
    )


def load_params(path: str | Path) -> QNetworkParams:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"parameter file truncated: {len(data)} bytes")
    magic, version, f, e, h, w, h_scale, flags = _HEADER.unpack_from(data)
    if magic != PARAM_MAGIC:
        raise FormatError(f"bad magic {magic!r}; expected {PARAM_MAGIC!r}")
    if version != PARAM_VERSION:
        raise FormatError(f"unsupported parameter file version {version}")
    if f != FEATURE_DIM:
        raise FormatError(f"feature dimension {f} != expected {FEATURE_DIM}")
    offset = _HEADER.size
    arrays = {}
    for name, shape in zip(TENSOR_FIELDS, _expected_shapes(e, h, w)):
        count = int(np.prod(shape))
        nbytes = count * 8
        if offset + nbytes > len(data):
            raise FormatError(f"parameter file truncated inside tensor {name}")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after tensors")
    return QNetworkParams(
        **arrays,
        h_scale=h_scale,
        use_quality=bool(flags & 1),
        use_history=bool(flags & 2),
    )
