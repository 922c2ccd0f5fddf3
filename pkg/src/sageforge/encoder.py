"""Bidirectional transformer encoder in numpy with exact analytic gradients.

Architecture: learned token + absolute position embeddings, pre-norm residual
blocks (self-attention, then a GELU feed-forward), and a final layer norm.
The masked-prediction head ties its projection to the token embedding matrix
(logits = hidden @ tok_emb.T + bias). Dropout, when enabled, is applied to
the attention and feed-forward block outputs before the residual add.

``backward`` consumes the cache produced by ``forward`` and the gradient with
respect to the final hidden states, returning exact gradients for every
parameter; head and pooling gradients are composed by the helpers below.
Gradients are validated against central finite differences in the test suite,
so run gradient checks in float64.

Checkpoint format: magic ``SAGE``, u32 version, a config JSON block, a
manifest JSON block listing (name, shape, offset) in parameter declaration
order, then raw little-endian float32 tensors.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import erf

LN_EPS = 1e-5
INIT_SCALE = 0.02
MASK_BIAS = -1e9
CHECKPOINT_MAGIC = b"SAGE"
CHECKPOINT_VERSION = 1

PRESETS = {
    "tiny": dict(layers=2, heads=4, model_dim=64, ff_dim=256),
    "small-desk": dict(layers=4, heads=4, model_dim=128, ff_dim=512),
    # The published-scale settings; accepted but far beyond desk budgets.
    "small": dict(layers=6, heads=8, model_dim=1024, ff_dim=4096),
}


class EncoderError(ValueError):
    pass


@dataclass
class EncoderConfig:
    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    ff_dim: int = 256
    vocab_size: int = 8192
    max_len: int = 128
    dropout_rate: float = 0.1
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise EncoderError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )
        if self.dtype not in ("float32", "float64"):
            raise EncoderError(f"unsupported dtype {self.dtype}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "EncoderConfig":
        if name not in PRESETS:
            raise EncoderError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
        kwargs = dict(PRESETS[name])
        kwargs.update(overrides)
        return cls(**kwargs)


def param_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Parameter name -> shape, in declaration (= checkpoint) order."""
    d, f, v, p = config.model_dim, config.ff_dim, config.vocab_size, config.max_len
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (v, d),
        "pos_emb": (p, d),
    }
    for i in range(config.layers):
        shapes[f"layer{i}.ln1_gamma"] = (d,)
        shapes[f"layer{i}.ln1_beta"] = (d,)
        shapes[f"layer{i}.wq"] = (d, d)
        shapes[f"layer{i}.bq"] = (d,)
        shapes[f"layer{i}.wk"] = (d, d)
        shapes[f"layer{i}.bk"] = (d,)
        shapes[f"layer{i}.wv"] = (d, d)
        shapes[f"layer{i}.bv"] = (d,)
        shapes[f"layer{i}.wo"] = (d, d)
        shapes[f"layer{i}.bo"] = (d,)
        shapes[f"layer{i}.ln2_gamma"] = (d,)
        shapes[f"layer{i}.ln2_beta"] = (d,)
        shapes[f"layer{i}.w1"] = (d, f)
        shapes[f"layer{i}.b1"] = (f,)
        shapes[f"layer{i}.w2"] = (f, d)
        shapes[f"layer{i}.b2"] = (d,)
    shapes["lnf_gamma"] = (d,)
    shapes["lnf_beta"] = (d,)
    shapes["mlm_bias"] = (v,)
    return shapes


def parameter_count(config: EncoderConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init_params(config: EncoderConfig, seed: Optional[int] = None) -> dict[str, np.ndarray]:
    """Deterministic initialization: N(0, 0.02) weights, zero biases, unit gains."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    dtype = config.np_dtype
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        leaf = name.split(".")[-1]
        if leaf.endswith("gamma"):
            params[name] = np.ones(shape, dtype=dtype)
        elif leaf.endswith("beta") or leaf.startswith("b") or leaf == "mlm_bias":
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            params[name] = rng.normal(0.0, INIT_SCALE, size=shape).astype(dtype)
    return params


# -- primitive ops -------------------------------------------------------------


def _layer_norm(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * gamma + beta, (xhat, inv)

def _layer_norm_backward(dy, cache, gamma):
    xhat, inv = cache
    dgamma = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    dbeta = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gamma
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

def _gelu(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))

def _gelu_prime(x):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
    return cdf + x * pdf


def _softmax_last(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def _dropout_mask(rng: np.random.Generator, shape, rate: float, dtype):
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(dtype) / dtype(keep)


# -- forward / backward ----------------------------------------------------------


def forward(
    params: dict[str, np.ndarray],
    config: EncoderConfig,
    ids: np.ndarray,
    attention_mask: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
):
    """Run the encoder; returns (hidden states (B, T, D), cache for backward)."""
    ids = np.asarray(ids)
    attention_mask = np.asarray(attention_mask)
    if ids.shape != attention_mask.shape:
        raise EncoderError("ids and attention_mask shapes differ")
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= config.vocab_size:
        raise EncoderError("token id out of vocabulary range")
    B, T = ids.shape
    if T > config.max_len:
        raise EncoderError(f"sequence length {T} exceeds max_len {config.max_len}")
    if train_mode and config.dropout_rate > 0 and rng is None:
        raise EncoderError("train_mode with dropout requires an rng")
    dtype = config.np_dtype
    H, dh = config.heads, config.head_dim
    scale = dtype(1.0 / np.sqrt(dh))

    x = params["tok_emb"][ids] + params["pos_emb"][:T][None, :, :]
    x = x.astype(dtype)
    key_bias = ((1.0 - attention_mask.astype(dtype)) * MASK_BIAS)[:, None, None, :]

    cache: dict = {"ids": ids, "mask": attention_mask, "train": train_mode, "layers": []}
    for i in range(config.layers):
        p = lambda leaf: params[f"layer{i}.{leaf}"]  # noqa: E731
        lc: dict = {"x_in": x}
        a, lc["ln1"] = _layer_norm(x, p("ln1_gamma"), p("ln1_beta"))
        lc["a"] = a
        q = (a @ p("wq") + p("bq")).reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        k = (a @ p("wk") + p("bk")).reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        v = (a @ p("wv") + p("bv")).reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        lc["q"], lc["k"], lc["v"] = q, k, v
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale + key_bias
        attn_probs = _softmax_last(scores)
        lc["attn_probs"] = attn_probs
        ctx = (attn_probs @ v).transpose(0, 2, 1, 3).reshape(B, T, config.model_dim)
        lc["ctx"] = ctx
        attn_out = ctx @ p("wo") + p("bo")
        if train_mode and config.dropout_rate > 0:
            lc["drop_attn"] = _dropout_mask(rng, attn_out.shape, config.dropout_rate, dtype)
            attn_out = attn_out * lc["drop_attn"]
        x = x + attn_out
        lc["x_mid"] = x
        b, lc["ln2"] = _layer_norm(x, p("ln2_gamma"), p("ln2_beta"))
        lc["b"] = b
        h1 = b @ p("w1") + p("b1")
        lc["h1"] = h1
        g = _gelu(h1)
        lc["g"] = g
        ff = g @ p("w2") + p("b2")
        if train_mode and config.dropout_rate > 0:
            lc["drop_ff"] = _dropout_mask(rng, ff.shape, config.dropout_rate, dtype)
            ff = ff * lc["drop_ff"]
        x = x + ff
        cache["layers"].append(lc)
    cache["x_final"] = x
    hidden, cache["lnf"] = _layer_norm(x, params["lnf_gamma"], params["lnf_beta"])
    return hidden, cache


def backward(
    params: dict[str, np.ndarray],
    config: EncoderConfig,
    cache: dict,
    d_hidden: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact gradients for every parameter given d(loss)/d(hidden states)."""
    ids, mask = cache["ids"], cache["mask"]
    B, T = ids.shape
    D, H, dh = config.model_dim, config.heads, config.head_dim
    dtype = config.np_dtype
    scale = dtype(1.0 / np.sqrt(dh))
    grads = {name: np.zeros_like(params[name]) for name in params}

    dx, dg, db = _layer_norm_backward(d_hidden, cache["lnf"], params["lnf_gamma"])
    grads["lnf_gamma"] += dg
    grads["lnf_beta"] += db

    for i in reversed(range(config.layers)):
        p = lambda leaf: params[f"layer{i}.{leaf}"]  # noqa: E731
        g_ = lambda leaf: grads[f"layer{i}.{leaf}"]  # noqa: E731
        lc = cache["layers"][i]

        # feed-forward block
        dff = dx
        if "drop_ff" in lc:
            dff = dff * lc["drop_ff"]
        dff2 = dff.reshape(-1, D)
        g_("w2")[...] += lc["g"].reshape(-1, config.ff_dim).T @ dff2
        g_("b2")[...] += dff2.sum(axis=0)
        dgelu = dff @ p("w2").T
        dh1 = dgelu * _gelu_prime(lc["h1"])
        dh1_2 = dh1.reshape(-1, config.ff_dim)
        g_("w1")[...] += lc["b"].reshape(-1, D).T @ dh1_2
        g_("b1")[...] += dh1_2.sum(axis=0)
        db_ = dh1 @ p("w1").T
        dx2, dgamma2, dbeta2 = _layer_norm_backward(db_, lc["ln2"], p("ln2_gamma"))
        g_("ln2_gamma")[...] += dgamma2
        g_("ln2_beta")[...] += dbeta2
        dx = dx + dx2

        # attention block
        dattn = dx
        if "drop_attn" in lc:
            dattn = dattn * lc["drop_attn"]
        dattn2 = dattn.reshape(-1, D)
        g_("wo")[...] += lc["ctx"].reshape(-1, D).T @ dattn2
        g_("bo")[...] += dattn2.sum(axis=0)
        dctx = (dattn @ p("wo").T).reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        A, v = lc["attn_probs"], lc["v"]
        dA = dctx @ v.transpose(0, 1, 3, 2)
        dv = A.transpose(0, 1, 3, 2) @ dctx
        dscores = A * (dA - (dA * A).sum(axis=-1, keepdims=True))
        dq = (dscores @ lc["k"]) * scale
        dk = (dscores.transpose(0, 1, 3, 2) @ lc["q"]) * scale

        da = np.zeros_like(lc["a"])
        a2 = lc["a"].reshape(-1, D)
        for leaf, dmat in (("wq", dq), ("wk", dk), ("wv", dv)):
            dflat = dmat.transpose(0, 2, 1, 3).reshape(-1, D)
            g_(leaf)[...] += a2.T @ dflat
            g_("b" + leaf[1])[...] += dflat.sum(axis=0)
            da += (dflat @ p(leaf).T).reshape(B, T, D)
        dx3, dgamma1, dbeta1 = _layer_norm_backward(da, lc["ln1"], p("ln1_gamma"))
        g_("ln1_gamma")[...] += dgamma1
        g_("ln1_beta")[...] += dbeta1
        dx = dx + dx3

    np.add.at(grads["tok_emb"], ids, dx)
    grads["pos_emb"][:T] += dx.sum(axis=0)
    return grads


# -- pooling and the tied prediction head ------------------------------------------


def pool_mean(hidden: np.ndarray, attention_mask: np.ndarray) -> np.ndarray:
    """Mean of hidden states over non-pad positions, one row per sequence."""
    mask = np.asarray(attention_mask, dtype=hidden.dtype)
    denom = mask.sum(axis=1)
    if np.any(denom == 0):
        raise EncoderError("sequence with no valid positions cannot be pooled")
    return (hidden * mask[:, :, None]).sum(axis=1) / denom[:, None]


def pool_mean_backward(d_pooled: np.ndarray, attention_mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(attention_mask, dtype=d_pooled.dtype)
    denom = mask.sum(axis=1)
    return mask[:, :, None] * d_pooled[:, None, :] / denom[:, None, None]


def mlm_logits(params: dict[str, np.ndarray], hidden: np.ndarray) -> np.ndarray:
    """Tied-head logits over the vocabulary for any (..., model_dim) input."""
    return hidden @ params["tok_emb"].T + params["mlm_bias"]


def mlm_logits_backward(
    params: dict[str, np.ndarray], hidden: np.ndarray, d_logits: np.ndarray
):
    """Returns (d_hidden, d_tok_emb, d_mlm_bias) for the tied head."""
    d_hidden = d_logits @ params["tok_emb"]
    flat_h = hidden.reshape(-1, hidden.shape[-1])
    flat_d = d_logits.reshape(-1, d_logits.shape[-1])
    d_tok_emb = flat_d.T @ flat_h
    d_mlm_bias = flat_d.sum(axis=0)
    return d_hidden, d_tok_emb, d_mlm_bias


# -- checkpoints ----------------------------------------------------------------


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray], config: EncoderConfig) -> None:
    shapes = param_shapes(config)
    config_blob = json.dumps(asdict(config), sort_keys=True).encode("utf-8")
    manifest = []
    offset = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape)) * 4
        manifest.append({"name": name, "shape": list(shape), "offset": offset})
        offset += size
    manifest_blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)
        fh.write(struct.pack("<I", len(manifest_blob)))
        fh.write(manifest_blob)
        for name, shape in shapes.items():
            arr = params[name]
            if arr.shape != shape:
                raise EncoderError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], EncoderConfig]:
    blob = Path(path).read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise EncoderError(f"{path} is not a SAGE checkpoint")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise EncoderError(f"unsupported checkpoint version {version}")
    pos = 8
    (cfg_len,) = struct.unpack("<I", blob[pos : pos + 4])
    pos += 4
    config = EncoderConfig(**json.loads(blob[pos : pos + cfg_len]))
    pos += cfg_len
    (man_len,) = struct.unpack("<I", blob[pos : pos + 4])
    pos += 4
    manifest = json.loads(blob[pos : pos + man_len])
    pos += man_len
    params: dict[str, np.ndarray] = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 4
        start = pos + entry["offset"]
        arr = np.frombuffer(blob[start : start + size], dtype="<f4").reshape(shape)
        params[entry["name"]] = arr.astype(config.np_dtype)
    return params, config
