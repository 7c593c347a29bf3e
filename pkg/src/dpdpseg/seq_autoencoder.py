"""Recurrent autoencoder over code sequences, trained from scratch in numpy.

Encoder GRU reads the code embeddings, the final hidden state is projected
(tanh) to a latent, the decoder GRU starts from the latent and is teacher
forced (begin-of-sequence symbol, then the true codes) to reconstruct the
input. The reconstruction NLL of a span is the word-segmentation cost.

Everything runs in double precision; training is a pure function of
(corpus, config, seed).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

AERN_MAGIC = b"AERN"
AERN_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
GRAD_CLIP_NORM = 5.0


@dataclass(frozen=True)
class AeRnnConfig:
    vocab: int
    emb_dim: int = 64
    hidden_dim: int = 128
    epochs: int = 15
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    max_seq_len: int = 256

    def __post_init__(self):
        for name in ("vocab", "emb_dim", "hidden_dim", "epochs", "batch_size", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class CodeSequence:
    utt_id: str
    codes: List[int]
    frame_spans: List[Tuple[int, int]] = field(default_factory=list)


# parameter keys in serialization order; emb row `vocab` is the BOS symbol
def _param_shapes(vocab: int, emb: int, hid: int) -> Dict[str, tuple]:
    shapes = {"emb": (vocab + 1, emb)}
    for side in ("enc", "dec"):
        for gate in ("z", "r", "h"):
            shapes[f"{side}_W{gate}"] = (emb, hid)
            shapes[f"{side}_U{gate}"] = (hid, hid)
            shapes[f"{side}_b{gate}"] = (hid,)
    shapes["lat_W"] = (hid, hid)
    shapes["lat_b"] = (hid,)
    shapes["out_W"] = (hid, vocab)
    shapes["out_b"] = (vocab,)
    return shapes


class AeRnnModel:
    """Parameter container; immutable after training for safe shared scoring."""

    def __init__(self, vocab: int, emb_dim: int, hidden_dim: int, params: Dict[str, np.ndarray]):
        self.vocab = vocab
        self.emb_dim = emb_dim
        self.hidden_dim = hidden_dim
        shapes = _param_shapes(vocab, emb_dim, hidden_dim)
        if set(params) != set(shapes):
            raise ValueError("parameter keys do not match the model layout")
        for k, shape in shapes.items():
            p = np.asarray(params[k], dtype=np.float64)
            if p.shape != shape:
                raise ValueError(f"{k}: expected shape {shape}, got {p.shape}")
            if not np.all(np.isfinite(p)):
                raise ValueError(f"{k}: non-finite parameters")
            params[k] = p
        self.params = params

    def copy(self) -> "AeRnnModel":
        return AeRnnModel(
            self.vocab, self.emb_dim, self.hidden_dim,
            {k: v.copy() for k, v in self.params.items()},
        )

    def zero_grads(self) -> Dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}


def init_model(cfg: AeRnnConfig) -> AeRnnModel:
    """Uniform [-s, s] init with s = 1/sqrt(hidden_dim), seeded."""
    rng = np.random.default_rng(cfg.seed)
    s = 1.0 / np.sqrt(cfg.hidden_dim)
    params = {}
    for k, shape in _param_shapes(cfg.vocab, cfg.emb_dim, cfg.hidden_dim).items():
        params[k] = rng.uniform(-s, s, size=shape)
    return AeRnnModel(cfg.vocab, cfg.emb_dim, cfg.hidden_dim, params)


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def _gru_step(p, side: str, x, h_prev):
    """One GRU step: h = (1-z)*h_prev + z*tanh-candidate."""
    z = _sigmoid(x @ p[f"{side}_Wz"] + h_prev @ p[f"{side}_Uz"] + p[f"{side}_bz"])
    r = _sigmoid(x @ p[f"{side}_Wr"] + h_prev @ p[f"{side}_Ur"] + p[f"{side}_br"])
    hc = np.tanh(x @ p[f"{side}_Wh"] + (r * h_prev) @ p[f"{side}_Uh"] + p[f"{side}_bh"])
    h = (1.0 - z) * h_prev + z * hc
    return h, (x, h_prev, z, r, hc)


def _gru_back(p, g, side: str, dh, cache):
    """Backprop one GRU step; returns (dx, dh_prev)."""
    x, h_prev, z, r, hc = cache
    dz = dh * (hc - h_prev)
    dhc = dh * z
    dh_prev = dh * (1.0 - z)

    da_hc = dhc * (1.0 - hc * hc)
    g[f"{side}_Wh"] += np.outer(x, da_hc)
    g[f"{side}_bh"] += da_hc
    dx = da_hc @ p[f"{side}_Wh"].T
    drh = da_hc @ p[f"{side}_Uh"].T
    g[f"{side}_Uh"] += np.outer(r * h_prev, da_hc)
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r

    da_z = dz * z * (1.0 - z)
    g[f"{side}_Wz"] += np.outer(x, da_z)
    g[f"{side}_Uz"] += np.outer(h_prev, da_z)
    g[f"{side}_bz"] += da_z
    dx += da_z @ p[f"{side}_Wz"].T
    dh_prev = dh_prev + da_z @ p[f"{side}_Uz"].T

    da_r = dr * r * (1.0 - r)
    g[f"{side}_Wr"] += np.outer(x, da_r)
    g[f"{side}_Ur"] += np.outer(h_prev, da_r)
    g[f"{side}_br"] += da_r
    dx += da_r @ p[f"{side}_Wr"].T
    dh_prev = dh_prev + da_r @ p[f"{side}_Ur"].T
    return dx, dh_prev


def _check_codes(m: AeRnnModel, codes) -> List[int]:
    codes = [int(c) for c in codes]
    if len(codes) == 0:
        raise ValueError("empty code sequence")
    for c in codes:
        if not 0 <= c < m.vocab:
            raise ValueError(f"code {c} out of range [0, {m.vocab})")
    return codes


def _forward(m: AeRnnModel, codes: List[int]):
    """Forward pass with caches for backprop. Returns (nll, caches)."""
    p = m.params
    hid = m.hidden_dim
    bos = m.vocab

    enc_caches = []
    h = np.zeros(hid)
    for c in codes:
        h, cache = _gru_step(p, "enc", p["emb"][c], h)
        enc_caches.append(cache)
    h_enc = h

    a_lat = h_enc @ p["lat_W"] + p["lat_b"]
    latent = np.tanh(a_lat)

    dec_inputs = [bos] + codes[:-1]
    dec_caches = []
    probs = []
    nll = 0.0
    h = latent
    for t, c_in in enumerate(dec_inputs):
        h, cache = _gru_step(p, "dec", p["emb"][c_in], h)
        dec_caches.append(cache)
        logits = h @ p["out_W"] + p["out_b"]
        logits = logits - logits.max()
        lse = np.log(np.exp(logits).sum())
        prob = np.exp(logits - lse)
        probs.append(prob)
        nll -= logits[codes[t]] - lse
    return float(nll), (enc_caches, h_enc, latent, dec_inputs, dec_caches, probs)


def forward_nll(m: AeRnnModel, codes) -> float:
    """Reconstruction negative log-likelihood of the code sequence."""
    codes = _check_codes(m, codes)
    nll, _ = _forward(m, codes)
    return nll


def backward(m: AeRnnModel, codes) -> Tuple[float, Dict[str, np.ndarray]]:
    """NLL and exact gradients by backpropagation through time."""
    codes = _check_codes(m, codes)
    nll, (enc_caches, h_enc, latent, dec_inputs, dec_caches, probs) = _forward(m, codes)
    p = m.params
    g = m.zero_grads()

    dh = np.zeros(m.hidden_dim)
    for t in range(len(codes) - 1, -1, -1):
        dlogits = probs[t].copy()
        dlogits[codes[t]] -= 1.0
        h_t = (1.0 - dec_caches[t][2]) * dec_caches[t][1] + dec_caches[t][2] * dec_caches[t][4]
        g["out_W"] += np.outer(h_t, dlogits)
        g["out_b"] += dlogits
        dh = dh + dlogits @ p["out_W"].T
        dx, dh = _gru_back(p, g, "dec", dh, dec_caches[t])
        g["emb"][dec_inputs[t]] += dx
    dlatent = dh

    da_lat = dlatent * (1.0 - latent * latent)
    g["lat_W"] += np.outer(h_enc, da_lat)
    g["lat_b"] += da_lat
    dh = da_lat @ p["lat_W"].T
    for t in range(len(codes) - 1, -1, -1):
        dx, dh = _gru_back(p, g, "enc", dh, enc_caches[t])
        g["emb"][codes[t]] += dx
    return nll, g


def _chunks(codes: List[int], max_seq_len: int) -> List[List[int]]:
    return [codes[i : i + max_seq_len] for i in range(0, len(codes), max_seq_len)]


def train(
    m: AeRnnModel, corpus: List[CodeSequence], cfg: AeRnnConfig
) -> Tuple[AeRnnModel, List[float]]:
    """Adam minibatch training on mean per-symbol NLL; returns (model, loss trace).

    Long sequences are split into consecutive chunks of cfg.max_seq_len;
    order is reshuffled each epoch from cfg.seed; gradients are clipped at
    global norm 5.0. Runs exactly cfg.epochs epochs.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    sequences = []
    for cs in corpus:
        codes = _check_codes(m, cs.codes)
        sequences.extend(_chunks(codes, cfg.max_seq_len))

    model = m.copy()
    p = model.params
    adam_m = {k: np.zeros_like(v) for k, v in p.items()}
    adam_v = {k: np.zeros_like(v) for k, v in p.items()}
    step = 0
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, len(sequences)]))

    trace = []
    for _epoch in range(cfg.epochs):
        order = rng.permutation(len(sequences))
        epoch_nll = 0.0
        epoch_symbols = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [sequences[i] for i in order[start : start + cfg.batch_size]]
            grads = model.zero_grads()
            batch_nll = 0.0
            batch_symbols = sum(len(s) for s in batch)
            for seq in batch:  # fixed accumulation order for determinism
                nll, g = backward(model, seq)
                batch_nll += nll
                for k in grads:
                    grads[k] += g[k]
            scale = 1.0 / batch_symbols
            for k in grads:
                grads[k] *= scale
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > GRAD_CLIP_NORM:
                clip = GRAD_CLIP_NORM / norm
                for k in grads:
                    grads[k] *= clip
            step += 1
            lr_t = cfg.learning_rate * np.sqrt(1.0 - ADAM_BETA2**step) / (1.0 - ADAM_BETA1**step)
            for k in p:
                adam_m[k] = ADAM_BETA1 * adam_m[k] + (1.0 - ADAM_BETA1) * grads[k]
                adam_v[k] = ADAM_BETA2 * adam_v[k] + (1.0 - ADAM_BETA2) * grads[k] ** 2
                p[k] -= lr_t * adam_m[k] / (np.sqrt(adam_v[k]) + ADAM_EPS)
            epoch_nll += batch_nll
            epoch_symbols += batch_symbols
        trace.append(epoch_nll / epoch_symbols)
    return model, trace


def save_model(m: AeRnnModel, path) -> None:
    """Persist as AERN v1: header then float64-LE parameter blocks in key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(AERN_MAGIC)
        f.write(struct.pack("<IIII", AERN_VERSION, m.vocab, m.emb_dim, m.hidden_dim))
        for k in _param_shapes(m.vocab, m.emb_dim, m.hidden_dim):
            f.write(np.ascontiguousarray(m.params[k], dtype="<f8").tobytes())


def load_model(path) -> AeRnnModel:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != AERN_MAGIC:
        raise ValueError(f"{path}: not an AERN model file")
    version, vocab, emb, hid = struct.unpack_from("<IIII", data, 4)
    if version != AERN_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    offset = 20
    params = {}
    for k, shape in _param_shapes(vocab, emb, hid).items():
        n = int(np.prod(shape))
        params[k] = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(shape).copy()
        offset += n * 8
    if offset != len(data):
        raise ValueError(f"{path}: trailing or missing parameter bytes")
    return AeRnnModel(vocab, emb, hid, params)
