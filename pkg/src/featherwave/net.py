"""Condition network + sample-rate network with hand-written reverse-mode gradients.

Parameters live in a flat ``dict[str, ndarray]``.  Training runs in float64
with teacher forcing over short chunks; :class:`InferenceNet` freezes a copy
in float32 (or float64) for step-by-step generation.

GRU gate order is (reset, update, candidate) on both weight matrices::

    r = sigmoid(Wir x + bir + Whr h + bhr)
    z = sigmoid(Wiz x + biz + Whz h + bhz)
    n = tanh(Win x + bin + r * (Whn h + bhn))
    h' = (1 - z) * n + z * h
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sparsity import BlockSparseMatrix, expand_mask


class NetError(ValueError):
    pass


class NumericalError(FloatingPointError):
    pass


N_ROLES = 3  # previous signal, previous excitation, current prediction


@dataclass(frozen=True)
class NetShape:
    n_mels: int
    cond_channels: int
    cond_layers: int
    n_bands: int
    q: int
    embed_dim: int
    gru_units: int
    affine_units: int
    block_rows: int = 16

    @classmethod
    def from_config(cls, cfg) -> "NetShape":
        return cls(cfg.n_mels, cfg.cond_channels, cfg.cond_layers, cfg.n_bands,
                   cfg.q_root, cfg.embed_dim, cfg.gru_units, cfg.affine_units,
                   cfg.block_rows)

    @property
    def embed_width(self) -> int:
        return N_ROLES * 2 * self.n_bands * self.embed_dim

    @property
    def gru_input(self) -> int:
        return self.embed_width + self.cond_channels

    @property
    def fine_input(self) -> int:
        return self.affine_units + self.n_bands * self.embed_dim


def param_shapes(s: NetShape) -> dict[str, tuple]:
    shapes = {}
    c_in = s.n_mels
    for i in range(s.cond_layers):
        shapes[f"cond{i}.w"] = (s.cond_channels, c_in, 3)
        shapes[f"cond{i}.b"] = (s.cond_channels,)
        c_in = s.cond_channels
    H = s.gru_units
    shapes.update({
        "embed.coarse": (s.n_bands, s.q, s.embed_dim),
        "embed.fine": (s.n_bands, s.q, s.embed_dim),
        "gru.w_ih": (3 * H, s.gru_input),
        "gru.b_ih": (3 * H,),
        "gru.w_hh": (3 * H, H),
        "gru.b_hh": (3 * H,),
        "affine.w": (s.affine_units, H),
        "affine.b": (s.affine_units,),
        "coarse.w": (s.n_bands * s.q, s.affine_units),
        "coarse.b": (s.n_bands * s.q,),
        "fine.w": (s.n_bands * s.q, s.fine_input),
        "fine.b": (s.n_bands * s.q,),
    })
    return shapes


def init_params(s: NetShape, seed: int = 0) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) matrices, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(s).items():
        if name.endswith(".b") or name.startswith("gru.b"):
            params[name] = np.zeros(shape)
            continue
        if name.startswith("cond"):
            fan_in = shape[1] * shape[2]
        elif name.startswith("embed"):
            fan_in = shape[1]
        else:
            fan_in = shape[-1]
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def full_mask(s: NetShape) -> np.ndarray:
    """All-ones block mask for the three recurrent gate matrices."""
    return np.ones((3, s.gru_units // s.block_rows, s.gru_units), dtype=np.uint8)


def hh_elementwise_mask(mask: np.ndarray, block_rows: int) -> np.ndarray:
    return expand_mask(mask, block_rows).reshape(-1, mask.shape[-1])


# ---------------------------------------------------------------------------
# elementary pieces


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad_from_output(y, x):
    return np.where(x > 0, 1.0, y + 1.0)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def nll_loss(coarse_logits, fine_logits, coarse_target, fine_target) -> float:
    """Mean over steps and bands of (-log P(coarse) - log P(fine)), natural log."""
    coarse_logits = np.asarray(coarse_logits)
    fine_logits = np.asarray(fine_logits)
    if coarse_logits.shape != fine_logits.shape:
        raise NetError("coarse and fine logits must have the same shape")
    lc = np.take_along_axis(log_softmax(coarse_logits), np.asarray(coarse_target)[..., None], -1)
    lf = np.take_along_axis(log_softmax(fine_logits), np.asarray(fine_target)[..., None], -1)
    return float(-(lc + lf).mean())


# ---------------------------------------------------------------------------
# condition network


def _im2col(x):
    B, W, C = x.shape
    xp = np.zeros((B, W + 2, C))
    xp[:, 1:-1] = x
    return np.stack([xp[:, k:k + W] for k in range(3)], axis=2).reshape(B * W, 3 * C)


def condition_forward(params, mel, valid=None, n_layers: int | None = None):
    """Conv1d(k=3, zero padding) + ELU per layer; positions outside ``valid`` are zeroed.

    ``mel`` is ``(frames, n_mels)`` or ``(batch, frames, n_mels)``.  Returns the
    output with the same leading shape and a cache for :func:`condition_backward`.
    """
    mel = np.asarray(mel, dtype=params["cond0.w"].dtype)
    squeeze = mel.ndim == 2
    if squeeze:
        mel = mel[None]
    B, W, _ = mel.shape
    if n_layers is None:
        n_layers = sum(1 for k in params if k.startswith("cond") and k.endswith(".w"))
    if mel.shape[2] != params["cond0.w"].shape[1]:
        raise NetError(f"mel width {mel.shape[2]} != network input {params['cond0.w'].shape[1]}")
    vmask = np.ones((B, W, 1)) if valid is None else np.asarray(valid, dtype=mel.dtype)[..., None]
    x = mel * vmask
    cache = []
    for i in range(n_layers):
        w = params[f"cond{i}.w"]
        cout, cin, _ = w.shape
        cols = _im2col(x)
        wm = w.transpose(0, 2, 1).reshape(cout, 3 * cin)
        pre = (cols @ wm.T + params[f"cond{i}.b"]).reshape(B, W, cout)
        act = elu(pre)
        y = act * vmask
        cache.append((cols, pre, act))
        x = y
    out = x[0] if squeeze else x
    return out, (cache, vmask, squeeze)


def condition_backward(params, dout, state, grads):
    cache, vmask, squeeze = state
    dy = dout[None] if squeeze else dout
    B, W, _ = dy.shape
    for i in range(len(cache) - 1, -1, -1):
        cols, pre, act = cache[i]
        w = params[f"cond{i}.w"]
        cout, cin, _ = w.shape
        dpre = (dy * vmask) * _elu_grad_from_output(act, pre)
        dflat = dpre.reshape(B * W, cout)
        wm = w.transpose(0, 2, 1).reshape(cout, 3 * cin)
        dwm = dflat.T @ cols
        grads[f"cond{i}.w"] += dwm.reshape(cout, 3, cin).transpose(0, 2, 1)
        grads[f"cond{i}.b"] += dflat.sum(axis=0)
        if i == 0:
            break
        dcols = (dflat @ wm).reshape(B, W, 3, cin)
        dxp = np.zeros((B, W + 2, cin))
        for k in range(3):
            dxp[:, k:k + W] += dcols[:, :, k]
        dy = dxp[:, 1:-1]


def upsample_repeat(cond, f: int):
    """Repeat every frame row ``f`` times along the time axis."""
    if f < 1:
        raise NetError("repeat factor must be >= 1")
    return np.repeat(np.asarray(cond), f, axis=-2)


# ---------------------------------------------------------------------------
# sample-rate network, teacher-forced over a batch of chunks


@dataclass
class Batch:
    mel: np.ndarray  # (B, W, n_mels)
    valid: np.ndarray  # (B, W) 0/1
    frame_pos: np.ndarray  # (B, S) index into W
    sig: np.ndarray  # (B, S, bands) mu-law index of previous reconstructed sample
    exc: np.ndarray  # (B, S, bands) previous excitation index
    pred: np.ndarray  # (B, S, bands) mu-law index of the LP prediction
    target: np.ndarray  # (B, S, bands) excitation index to predict


def embed_inputs(params, s: NetShape, sig, exc, pred):
    """Concatenate coarse/fine embeddings: role-major, then band, then (coarse, fine)."""
    q = s.q
    bands = np.arange(s.n_bands)
    parts = []
    for idx in (sig, exc, pred):
        c = params["embed.coarse"][bands, idx // q]
        f = params["embed.fine"][bands, idx % q]
        parts.append(np.stack([c, f], axis=-2))  # (..., bands, 2, E)
    emb = np.stack(parts, axis=-4)  # (..., roles, bands, 2, E)
    return emb.reshape(*sig.shape[:-1], s.embed_width)


def _scatter_embed_grad(grads, s: NetShape, demb, sig, exc, pred):
    q, E = s.q, s.embed_dim
    d = demb.reshape(-1, N_ROLES, s.n_bands, 2, E)
    bands = np.broadcast_to(np.arange(s.n_bands), (d.shape[0], s.n_bands))
    for r, idx in enumerate((sig, exc, pred)):
        idx = idx.reshape(-1, s.n_bands)
        np.add.at(grads["embed.coarse"], (bands, idx // q), d[:, r, :, 0])
        np.add.at(grads["embed.fine"], (bands, idx % q), d[:, r, :, 1])


def srn_forward(params, s: NetShape, batch: Batch, need_cache: bool = True):
    """Loss plus the activations needed by :func:`srn_backward`."""
    cond_all, cond_state = condition_forward(params, batch.mel, batch.valid, s.cond_layers)
    B, S = batch.frame_pos.shape
    cond = cond_all[np.arange(B)[:, None], batch.frame_pos]  # (B, S, C)
    emb = embed_inputs(params, s, batch.sig, batch.exc, batch.pred)
    X = np.concatenate([emb, cond], axis=-1)
    H = s.gru_units
    GI = X @ params["gru.w_ih"].T + params["gru.b_ih"]
    w_hh, b_hh = params["gru.w_hh"], params["gru.b_hh"]
    h = np.zeros((B, H))
    hs = np.empty((B, S, H))
    steps = []
    for t in range(S):
        gh = h @ w_hh.T + b_hh
        gi = GI[:, t]
        r = sigmoid(gi[:, :H] + gh[:, :H])
        z = sigmoid(gi[:, H:2 * H] + gh[:, H:2 * H])
        n = np.tanh(gi[:, 2 * H:] + r * gh[:, 2 * H:])
        h_new = (1.0 - z) * n + z * h
        if need_cache:
            steps.append((h, gh, r, z, n))
        h = h_new
        hs[:, t] = h
    a_pre = hs @ params["affine.w"].T + params["affine.b"]
    a = elu(a_pre)
    q, nb = s.q, s.n_bands
    coarse = (a @ params["coarse.w"].T + params["coarse.b"]).reshape(B, S, nb, q)
    t_coarse = batch.target // q
    t_fine = batch.target % q
    bands = np.arange(nb)
    emb_c = params["embed.coarse"][bands, t_coarse]  # (B, S, nb, E)
    fine_in = np.concatenate([a, emb_c.reshape(B, S, nb * s.embed_dim)], axis=-1)
    fine = (fine_in @ params["fine.w"].T + params["fine.b"]).reshape(B, S, nb, q)
    loss = nll_loss(coarse, fine, t_coarse, t_fine)
    if not need_cache:
        return loss, None
    cache = dict(cond_state=cond_state, X=X, emb=emb, steps=steps, hs=hs, a_pre=a_pre, a=a,
                 coarse=coarse, fine=fine, fine_in=fine_in, t_coarse=t_coarse, t_fine=t_fine)
    return loss, cache


def srn_backward(params, s: NetShape, batch: Batch, cache, hh_mask=None) -> dict:
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    B, S = batch.frame_pos.shape
    nb, q, E, H = s.n_bands, s.q, s.embed_dim, s.gru_units
    norm = 1.0 / (B * S * nb)

    def dlogits(logits, target):
        p = softmax(logits)
        np.put_along_axis(p, target[..., None], np.take_along_axis(p, target[..., None], -1) - 1.0, -1)
        return p * norm

    dc = dlogits(cache["coarse"], cache["t_coarse"]).reshape(B * S, nb * q)
    df = dlogits(cache["fine"], cache["t_fine"]).reshape(B * S, nb * q)
    a = cache["a"].reshape(B * S, -1)
    fine_in = cache["fine_in"].reshape(B * S, -1)
    grads["coarse.w"] += dc.T @ a
    grads["coarse.b"] += dc.sum(axis=0)
    grads["fine.w"] += df.T @ fine_in
    grads["fine.b"] += df.sum(axis=0)
    da = dc @ params["coarse.w"]
    dfine_in = df @ params["fine.w"]
    da += dfine_in[:, :s.affine_units]
    demb_c = dfine_in[:, s.affine_units:].reshape(B * S, nb, E)
    bands = np.broadcast_to(np.arange(nb), (B * S, nb))
    np.add.at(grads["embed.coarse"], (bands, cache["t_coarse"].reshape(-1, nb)), demb_c)

    da_pre = da * _elu_grad_from_output(a, cache["a_pre"].reshape(B * S, -1))
    hs = cache["hs"].reshape(B * S, H)
    grads["affine.w"] += da_pre.T @ hs
    grads["affine.b"] += da_pre.sum(axis=0)
    dhs = (da_pre @ params["affine.w"]).reshape(B, S, H)

    w_hh = params["gru.w_hh"]
    dGI = np.empty((B, S, 3 * H))
    dh_next = np.zeros((B, H))
    dW_hh = np.zeros_like(w_hh)
    db_hh = np.zeros(3 * H)
    for t in range(S - 1, -1, -1):
        h_prev, gh, r, z, n = cache["steps"][t]
        dh = dhs[:, t] + dh_next
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh_prev = dh * z
        dn_pre = dn * (1.0 - n * n)
        dr = dn_pre * gh[:, 2 * H:]
        dr_pre = dr * r * (1.0 - r)
        dz_pre = dz * z * (1.0 - z)
        dgh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=1)
        dGI[:, t] = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)
        dW_hh += dgh.T @ h_prev
        db_hh += dgh.sum(axis=0)
        dh_next = dh_prev + dgh @ w_hh
    if hh_mask is not None:
        dW_hh *= hh_mask
    grads["gru.w_hh"] += dW_hh
    grads["gru.b_hh"] += db_hh

    dGI = dGI.reshape(B * S, 3 * H)
    X = cache["X"].reshape(B * S, -1)
    grads["gru.w_ih"] += dGI.T @ X
    grads["gru.b_ih"] += dGI.sum(axis=0)
    dX = dGI @ params["gru.w_ih"]
    _scatter_embed_grad(grads, s, dX[:, :s.embed_width], batch.sig, batch.exc, batch.pred)
    dcond_steps = dX[:, s.embed_width:].reshape(B, S, -1)
    W = batch.mel.shape[1]
    dcond = np.zeros((B, W, s.cond_channels))
    np.add.at(dcond, (np.arange(B)[:, None], batch.frame_pos), dcond_steps)
    condition_backward(params, dcond, cache["cond_state"], grads)
    return grads


def loss_and_grads(params, s: NetShape, batch: Batch, hh_mask=None):
    loss, cache = srn_forward(params, s, batch)
    if not math.isfinite(loss):
        raise NumericalError(f"non-finite loss {loss}")
    return loss, srn_backward(params, s, batch, cache, hh_mask)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_step(params, s: NetShape, batch: Batch, opt: Adam, block_mask=None) -> float:
    """One teacher-forced step: gradients, Adam update, recurrent mask re-applied."""
    hh_mask = None if block_mask is None else hh_elementwise_mask(block_mask, s.block_rows)
    loss, grads = loss_and_grads(params, s, batch, hh_mask)
    opt.step(params, grads)
    if hh_mask is not None:
        params["gru.w_hh"] *= hh_mask
        opt.m["gru.w_hh"] *= hh_mask
        opt.v["gru.w_hh"] *= hh_mask
    return loss


# ---------------------------------------------------------------------------
# step-by-step inference


class InferenceNet:
    """Frozen network for one-step-at-a-time generation.

    Embedding lookups are folded into per-slot projection tables, so the GRU
    input product is a sum of table rows plus one conditioning product per
    frame.  The recurrent matrix is held in block-sparse form.
    """

    def __init__(self, params, s: NetShape, block_mask=None, dtype=np.float32, threads: int = 1):
        self.s = s
        self.dtype = np.dtype(dtype)
        self.threads = threads
        P = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.cond_params = {k: v.astype(self.dtype) for k, v in P.items() if k.startswith("cond")}
        H, q, nb, E = s.gru_units, s.q, s.n_bands, s.embed_dim
        w_ih = P["gru.w_ih"]
        tables = np.empty((N_ROLES, nb, 2, q, 3 * H))
        col = 0
        for r in range(N_ROLES):
            for b in range(nb):
                for part, name in enumerate(("embed.coarse", "embed.fine")):
                    tables[r, b, part] = P[name][b] @ w_ih[:, col:col + E].T
                    col += E
        self.in_tables = tables.astype(self.dtype)
        self.w_cond = np.ascontiguousarray(w_ih[:, s.embed_width:], dtype=self.dtype)
        self.b_ih = P["gru.b_ih"].astype(self.dtype)
        mask = full_mask(s) if block_mask is None else block_mask
        self.w_hh = BlockSparseMatrix.from_dense(
            P["gru.w_hh"], mask.reshape(-1, H), s.block_rows, dtype=self.dtype)
        self.b_hh = P["gru.b_hh"].astype(self.dtype)
        self.affine_w = P["affine.w"].astype(self.dtype)
        self.affine_b = P["affine.b"].astype(self.dtype)
        self.coarse_w = P["coarse.w"].astype(self.dtype)
        self.coarse_b = P["coarse.b"].astype(self.dtype)
        fw = P["fine.w"]
        self.fine_w = np.ascontiguousarray(fw[:, :s.affine_units], dtype=self.dtype)
        ftab = np.empty((nb, q, nb * q))
        for b in range(nb):
            lo = s.affine_units + b * E
            ftab[b] = P["embed.coarse"][b] @ fw[:, lo:lo + E].T
        self.fine_tables = ftab.astype(self.dtype)
        self.fine_b = P["fine.b"].astype(self.dtype)
        self._gh = np.empty(3 * H, dtype=self.dtype)
        self._band_idx = np.arange(nb)

    def condition(self, mel) -> np.ndarray:
        out, _ = condition_forward(self.cond_params, np.asarray(mel, dtype=self.dtype),
                                   n_layers=self.s.cond_layers)
        return out.astype(self.dtype)

    def cond_projection(self, cond_frame) -> np.ndarray:
        return self.w_cond @ np.asarray(cond_frame, dtype=self.dtype) + self.b_ih

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.s.gru_units, dtype=self.dtype)

    def coarse_step(self, h, sig, exc, pred, cond_proj):
        """Advance the GRU one step; returns (coarse logits (bands, Q), new hidden, affine out)."""
        s = self.s
        H, q = s.gru_units, s.q
        b = self._band_idx
        gi = cond_proj.copy()
        for r, idx in enumerate((sig, exc, pred)):
            idx = np.asarray(idx)
            gi += self.in_tables[r, b, 0, idx // q].sum(axis=0)
            gi += self.in_tables[r, b, 1, idx % q].sum(axis=0)
        gh = self.w_hh.matvec(h, out=self._gh, threads=self.threads) + self.b_hh
        rg = sigmoid(gi[:H] + gh[:H])
        zg = sigmoid(gi[H:2 * H] + gh[H:2 * H])
        ng = np.tanh(gi[2 * H:] + rg * gh[2 * H:])
        h_new = (1 - zg) * ng + zg * h
        a = elu(self.affine_w @ h_new + self.affine_b)
        logits = (self.coarse_w @ a + self.coarse_b).reshape(s.n_bands, q)
        return logits, h_new, a

    def fine_logits(self, a, coarse_idx):
        s = self.s
        out = self.fine_w @ a + self.fine_b
        out = out + self.fine_tables[self._band_idx, np.asarray(coarse_idx)].sum(axis=0)
        return out.reshape(s.n_bands, s.q)
