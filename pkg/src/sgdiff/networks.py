"""Coordinate-noise and edge-class predictors.

Parameters are plain ``dict[str, np.ndarray]``; the forward functions accept
either raw arrays (inference) or autograd tensors (training). All inputs carry
a leading batch axis with zero-padded nodes and a boolean ``node_mask``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .autograd import Tensor, as_tensor

TIME_DIM = 16


@dataclass(frozen=True)
class CoordNetConfig:
    hidden: int = 64


@dataclass(frozen=True)
class EdgeNetConfig:
    classes: int = 5
    hidden: int = 32
    blocks: int = 3
    rbf: int = 16
    rbf_max: float = 2.0

    def to_json(self) -> dict:
        return asdict(self)


def time_embedding(t, T: int, dim: int = TIME_DIM) -> np.ndarray:
    """Sinusoidal features of ``t / T``; ``t`` may be a scalar or a batch."""
    s = np.atleast_1d(np.asarray(t, dtype=np.float64)) / T
    freqs = np.exp(np.linspace(0.0, math.log(200.0), dim // 2))
    ang = s[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _dense(rng, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_in, fan_out))


def _p(params, name) -> Tensor:
    return as_tensor(params[name])


def _cast(x, like) -> np.ndarray:
    return np.asarray(x, dtype=like.data.dtype if isinstance(like, Tensor) else np.asarray(like).dtype)


# --- coordinate noise predictor --------------------------------------------

def init_coord_params(cfg: CoordNetConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    h = cfg.hidden
    return {
        "enc_x": _dense(rng, 3, h), "enc_t": _dense(rng, TIME_DIM, h), "enc_b": np.zeros(h),
        "l1_x": _dense(rng, 3, h), "l1_t": _dense(rng, TIME_DIM, h), "l1_c": _dense(rng, h, h), "l1_b": np.zeros(h),
        "l2_w": _dense(rng, h, h), "l2_b": np.zeros(h),
        "out_w": _dense(rng, h, 3) * 0.1, "out_b": np.zeros(3),
    }


def coord_forward(params, xt, t, T: int, node_mask: np.ndarray | None = None) -> Tensor:
    """Predicted noise for each point of ``xt`` (``B x N x 3``)."""
    x = as_tensor(xt)
    B, N, _ = x.shape
    mask = np.ones((B, N), dtype=bool) if node_mask is None else node_mask
    like = params["out_w"]
    temb = _cast(time_embedding(np.broadcast_to(t, (B,)), T), like)[:, None, :]
    enc = (x @ _p(params, "enc_x") + temb @ _p(params, "enc_t") + _p(params, "enc_b")).silu()
    w = _cast(mask / np.maximum(mask.sum(1, keepdims=True), 1), like)[:, :, None]
    ctx = (enc * w).sum(axis=1, keepdims=True)
    z = (x @ _p(params, "l1_x") + temb @ _p(params, "l1_t") + ctx @ _p(params, "l1_c") + _p(params, "l1_b")).silu()
    z = (z @ _p(params, "l2_w") + _p(params, "l2_b")).silu()
    out = z @ _p(params, "out_w") + _p(params, "out_b")
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite coordinate-noise prediction")
    return out


def coord_loss(params, x0, t, eps, T: int, sched_alpha_bar, node_mask: np.ndarray | None = None) -> Tensor:
    """Mean squared error between ``eps`` and the prediction on the noised ``x0``."""
    ab = np.asarray(sched_alpha_bar)[np.asarray(t)].reshape(-1, 1, 1)
    xt = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    pred = coord_forward(params, xt, t, T, node_mask)
    B, N, _ = x0.shape
    mask = np.ones((B, N), dtype=bool) if node_mask is None else node_mask
    diff = pred - eps
    w = mask[:, :, None] / (3.0 * mask.sum())
    return (diff * diff * w).sum()


# --- edge class predictor --------------------------------------------------

def init_edge_params(cfg: EdgeNetConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    h, c = cfg.hidden, cfg.classes
    p = {
        "node_x": _dense(rng, 3, h), "node_t": _dense(rng, TIME_DIM, h), "node_b": np.zeros(h),
        "pair_c": _dense(rng, c, h), "pair_r": _dense(rng, cfg.rbf, h),
        "pair_t": _dense(rng, TIME_DIM, h), "pair_b": np.zeros(h),
        "head_w": _dense(rng, h, c) * 0.1, "head_b": np.zeros(c),
    }
    for k in range(cfg.blocks):
        p[f"b{k}_node"] = _dense(rng, h, h)
        p[f"b{k}_pair"] = _dense(rng, h, h) * 0.5
        p[f"b{k}_bias"] = np.zeros(h)
        p[f"b{k}_u_self"] = _dense(rng, h, h) * 0.5
        p[f"b{k}_u_all"] = _dense(rng, h, h) * 0.5
        p[f"b{k}_u_edge"] = _dense(rng, h, h) * 0.5
        p[f"b{k}_u_b"] = np.zeros(h)
    return p


def block_count(params) -> int:
    return sum(1 for k in params if k.endswith("_u_b"))


def rbf_features(coords: np.ndarray, cfg: EdgeNetConfig) -> np.ndarray:
    """Gaussian basis expansion of pairwise distances, ``B x N x N x R``."""
    d = np.sqrt(((coords[:, :, None, :] - coords[:, None, :, :]) ** 2).sum(-1))
    centers = np.linspace(0.0, cfg.rbf_max, cfg.rbf)
    width = centers[1] - centers[0] if cfg.rbf > 1 else 1.0
    return np.exp(-0.5 * ((d[..., None] - centers) / width) ** 2)


def pair_mask(node_mask: np.ndarray) -> np.ndarray:
    m = node_mask[:, :, None] & node_mask[:, None, :]
    idx = np.arange(node_mask.shape[1])
    m[:, idx, idx] = False
    return m


def _aggregation_weights(pm: np.ndarray, et: np.ndarray, dt) -> tuple[np.ndarray, np.ndarray]:
    """Row weights (``B x N x 1 x N``) for the mean over all partners and over current neighbours."""
    present = pm & (et > 0)
    w_all = pm / np.maximum(pm.sum(2, keepdims=True), 1)
    w_edge = present / np.maximum(present.sum(2, keepdims=True), 1)
    return w_all.astype(dt)[:, :, None, :], w_edge.astype(dt)[:, :, None, :]


def edge_logits(params, et: np.ndarray, coords: np.ndarray, t, T: int, cfg: EdgeNetConfig,
                node_mask: np.ndarray | None = None, rbf: np.ndarray | None = None) -> Tensor:
    """Per-pair class logits (``B x N x N x c``), symmetric in the two endpoints.

    ``et`` holds the current classes, ``coords`` the clean node positions.
    ``rbf`` may be passed in to reuse distance features across steps.
    """
    B, N = et.shape[:2]
    mask = np.ones((B, N), dtype=bool) if node_mask is None else node_mask
    like = params["head_w"]
    dt = like.data.dtype if isinstance(like, Tensor) else np.asarray(like).dtype
    pm = pair_mask(mask)
    temb = time_embedding(np.broadcast_to(t, (B,)), T).astype(dt)
    onehot = (et[..., None] == np.arange(cfg.classes)).astype(dt)
    if rbf is None:
        rbf = rbf_features(coords, cfg)
    rbf = rbf.astype(dt, copy=False)
    x = np.asarray(coords, dtype=dt)

    hn = (as_tensor(x) @ _p(params, "node_x") + as_tensor(temb[:, None, :]) @ _p(params, "node_t")
          + _p(params, "node_b")).silu()
    P = (as_tensor(onehot) @ _p(params, "pair_c") + as_tensor(rbf) @ _p(params, "pair_r")
         + as_tensor(temb[:, None, None, :]) @ _p(params, "pair_t") + _p(params, "pair_b")).silu()

    w_all, w_edge = _aggregation_weights(pm, et, dt)
    for k in range(block_count(params)):
        a = hn @ _p(params, f"b{k}_node")
        z = a.expand(2) + a.expand(1) + P @ _p(params, f"b{k}_pair") + _p(params, f"b{k}_bias")
        P = P + z.silu()
        agg_all = (as_tensor(w_all) @ P).reshape(B, N, -1)
        agg_edge = (as_tensor(w_edge) @ P).reshape(B, N, -1)
        upd = (hn @ _p(params, f"b{k}_u_self") + agg_all @ _p(params, f"b{k}_u_all")
               + agg_edge @ _p(params, f"b{k}_u_edge") + _p(params, f"b{k}_u_b"))
        hn = hn + upd.silu()
    logits = P @ _p(params, "head_w") + _p(params, "head_b")
    if not np.all(np.isfinite(logits.data)):
        raise FloatingPointError("non-finite edge logits")
    return logits


def _silu_(x: np.ndarray) -> np.ndarray:
    """In-place ``x * sigmoid(x)``."""
    s = x * 0.5
    np.tanh(s, out=s)
    s += 1.0
    s *= 0.5
    x *= s
    return x


def edge_forward(params, et, coords, t, T: int, cfg: EdgeNetConfig, node_mask=None, rbf=None) -> np.ndarray:
    """Predicted clean-class probabilities per pair; rows sum to one.

    Same function as ``edge_logits`` followed by a softmax, evaluated in place
    without recording a tape.
    """
    B, N = et.shape[:2]
    mask = np.ones((B, N), dtype=bool) if node_mask is None else node_mask
    dt = np.asarray(params["head_w"]).dtype
    pm = pair_mask(mask)
    temb = time_embedding(np.broadcast_to(t, (B,)), T).astype(dt)
    if rbf is None:
        rbf = rbf_features(coords, cfg)
    x = np.asarray(coords, dtype=dt)

    hn = x @ params["node_x"] + (temb @ params["node_t"])[:, None, :] + params["node_b"]
    _silu_(hn)
    P = rbf.astype(dt, copy=False) @ params["pair_r"]
    P += params["pair_c"][et]
    P += ((temb @ params["pair_t"]) + params["pair_b"])[:, None, None, :]
    _silu_(P)
    w_all, w_edge = _aggregation_weights(pm, et, dt)
    for k in range(block_count(params)):
        a = hn @ params[f"b{k}_node"]
        z = P @ params[f"b{k}_pair"]
        z += a[:, :, None, :]
        z += (a + params[f"b{k}_bias"])[:, None, :, :]
        _silu_(z)
        P += z
        del z
        upd = (hn @ params[f"b{k}_u_self"] + (w_all @ P).reshape(B, N, -1) @ params[f"b{k}_u_all"]
               + (w_edge @ P).reshape(B, N, -1) @ params[f"b{k}_u_edge"] + params[f"b{k}_u_b"])
        _silu_(upd)
        hn = hn + upd
    logits = P @ params["head_w"]
    logits += params["head_b"]
    logits -= logits.max(-1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(-1, keepdims=True)
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite edge predictions")
    return logits


LOG_FLOOR = math.log(1e-30)


def edge_ce(params, e0: np.ndarray, et: np.ndarray, coords: np.ndarray, t, T: int, cfg: EdgeNetConfig,
            node_mask=None, rbf=None) -> Tensor:
    """Mean cross-entropy of the true classes ``e0`` over all real node pairs."""
    B, N = e0.shape[:2]
    mask = np.ones((B, N), dtype=bool) if node_mask is None else node_mask
    logp = edge_logits(params, et, coords, t, T, cfg, mask, rbf).log_softmax(-1).clamp_min(LOG_FLOOR)
    pm = pair_mask(mask)
    target = (e0[..., None] == np.arange(cfg.classes)) & pm[..., None]
    return (logp * (target * (-1.0 / pm.sum()))).sum()


@dataclass
class EdgeDenoiser:
    """Edge predictor parameters bundled with their architecture."""

    params: dict
    config: EdgeNetConfig

    @property
    def dtype(self):
        return np.asarray(self.params["head_w"]).dtype

    def astype(self, dtype) -> "EdgeDenoiser":
        return EdgeDenoiser({k: np.asarray(v, dtype=dtype) for k, v in self.params.items()}, self.config)

    def probs(self, et, coords, t, T: int, node_mask=None, rbf=None) -> np.ndarray:
        return edge_forward(self.params, et, coords, t, T, self.config, node_mask, rbf)
