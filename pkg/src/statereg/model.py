"""Graph attention auto-encoder over register fan-in structures.

Three attention encoder layers compress the 17-wide node features of a path
structure down to one scalar per node; a mirrored three-layer decoder
reconstructs the features from those scalars over the same edges. The root
register's scalar is the register's embedding.

Each layer k with parameters W, v_s, v_r (one set per attention head)
computes, over every node i and its in-neighborhood N_i (predecessors plus a
mandatory self-loop):

    e_ij   = Sigmoid( v_s . act(W h_i)  +  v_r . act(W h_j) )    j in N_i
    a_ij   = exp(e_ij) / sum_{l in N_i} exp(e_il)
    h_i'   = sum_{j in N_i} a_ij * act(W h_j)

with heads averaged so the output width stays at the configured layer size.
``act`` is ReLU on hidden layers and identity on each stack's output layer
(the architecture has no bias terms, so a ReLU on the width-1 bottleneck or
on the reconstruction output could die permanently). The training loss is
the mean squared error between input features and the decoder output (an
optional edge-reconstruction term can be mixed in). Everything runs in
float64 on the tape in ``autodiff``, so training is bitwise reproducible
for a fixed seed on a single thread.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import autodiff as ad
from .graph import FEATURE_DIM, PathStructure

HIDDEN_DIM = 64
DEFAULT_HEADS = 4


class NumericalError(RuntimeError):
    """Training or gradient evaluation produced non-finite values."""


class CheckpointError(RuntimeError):
    """Model checkpoint is corrupt or has an unsupported version."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    gradient_clip: float = 5.0
    seed: int = 0
    heads: int = DEFAULT_HEADS
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # optional edge-reconstruction loss term; 0 disables it
    structure_loss_weight: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.gradient_clip <= 0:
            raise ValueError("gradient_clip must be positive")
        if self.heads < 1:
            raise ValueError("heads must be >= 1")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.structure_loss_weight < 0:
            raise ValueError("structure_loss_weight must be nonnegative")


@dataclass
class LayerParams:
    """One attention layer's trainable tensors, heads stacked on axis 0:
    W is (heads, d_out, d_in), v_s and v_r are (heads, d_out)."""

    W: np.ndarray
    v_s: np.ndarray
    v_r: np.ndarray

    @property
    def d_in(self) -> int:
        return self.W.shape[2]

    @property
    def d_out(self) -> int:
        return self.W.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [self.W, self.v_s, self.v_r]


def encoder_dims(feature_dim: int = FEATURE_DIM, hidden_dim: int = HIDDEN_DIM):
    return [(feature_dim, hidden_dim), (hidden_dim, hidden_dim), (hidden_dim, 1)]


def decoder_dims(feature_dim: int = FEATURE_DIM, hidden_dim: int = HIDDEN_DIM):
    return [(1, hidden_dim), (hidden_dim, hidden_dim), (hidden_dim, feature_dim)]


@dataclass
class GateModel:
    """All trainable parameters of the 3-encoder/3-decoder attention
    auto-encoder. Encoder and decoder have independent parameters."""

    encoder: list[LayerParams]
    decoder: list[LayerParams]
    heads: int
    activation: str = "relu"
    feature_dim: int = FEATURE_DIM
    hidden_dim: int = HIDDEN_DIM

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in a fixed order (encoder then decoder;
        W, v_s, v_r within each layer)."""
        out: list[np.ndarray] = []
        for layer in self.encoder + self.decoder:
            out.extend(layer.arrays())
        return out

    def parameter_names(self) -> list[str]:
        names = []
        for side, layers in (("encoder", self.encoder), ("decoder", self.decoder)):
            for i in range(len(layers)):
                names.extend(f"{side}.{i}.{p}" for p in ("W", "v_s", "v_r"))
        return names

    def __eq__(self, other) -> bool:
        if not isinstance(other, GateModel):
            return NotImplemented
        if (self.heads, self.activation, self.feature_dim, self.hidden_dim) != (
            other.heads, other.activation, other.feature_dim, other.hidden_dim,
        ):
            return False
        mine, theirs = self.parameters(), other.parameters()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs)
        )


def _init_layers(rng: np.random.Generator, dims, heads: int) -> list[LayerParams]:
    layers = []
    for d_in, d_out in dims:
        bound = math.sqrt(6.0 / (d_in + d_out))
        layers.append(LayerParams(
            W=rng.uniform(-bound, bound, size=(heads, d_out, d_in)),
            v_s=rng.uniform(-bound, bound, size=(heads, d_out)),
            v_r=rng.uniform(-bound, bound, size=(heads, d_out)),
        ))
    return layers


def _init_from_rng(rng, heads, feature_dim, hidden_dim) -> GateModel:
    return GateModel(
        encoder=_init_layers(rng, encoder_dims(feature_dim, hidden_dim), heads),
        decoder=_init_layers(rng, decoder_dims(feature_dim, hidden_dim), heads),
        heads=heads,
        feature_dim=feature_dim,
        hidden_dim=hidden_dim,
    )


def init_model(seed: int, heads: int = DEFAULT_HEADS, feature_dim: int = FEATURE_DIM,
               hidden_dim: int = HIDDEN_DIM) -> GateModel:
    """Seeded uniform initialization, +-sqrt(6 / (d_in + d_out)) per layer."""
    return _init_from_rng(np.random.default_rng(seed), heads, feature_dim, hidden_dim)


# --------------------------------------------------------------------------
# Path structures lowered to dense arrays

@dataclass
class PreparedStructure:
    """A path structure ready for the network: nodes renumbered 0..n-1 in
    ascending global-id order, feature rows, and message endpoints
    (one self-loop per node plus every induced edge, src feeding dst)."""

    nodes: np.ndarray      # global node ids, sorted
    root_index: int        # local index of the root register
    features: np.ndarray   # (n, feature_dim)
    src: np.ndarray        # (E,) local indices
    dst: np.ndarray        # (E,)
    source: str = ""       # provenance tag, e.g. "design/register"

    @property
    def n(self) -> int:
        return len(self.nodes)


def prepare_structure(ps: PathStructure, features: np.ndarray, source: str = "") -> PreparedStructure:
    """Lower a path structure to arrays. ``features`` is the full-graph
    feature matrix, indexed by global node id."""
    nodes = np.asarray(ps.induced_nodes, dtype=np.int64)
    index = {int(g): i for i, g in enumerate(nodes)}
    pairs = {(i, i) for i in range(len(nodes))}
    pairs.update((index[v], index[u]) for (u, v) in ps.induced_edges)
    ordered = sorted(pairs)
    dst = np.array([p[0] for p in ordered], dtype=np.int64)
    src = np.array([p[1] for p in ordered], dtype=np.int64)
    return PreparedStructure(
        nodes=nodes,
        root_index=index[ps.root],
        features=np.asarray(features, dtype=np.float64)[nodes],
        src=src,
        dst=dst,
        source=source,
    )


# --------------------------------------------------------------------------
# Forward pass

def _layer_tensors(layer: LayerParams):
    return ad.Tensor(layer.W), ad.Tensor(layer.v_s), ad.Tensor(layer.v_r)


_ACTIVATIONS = {
    "relu": ad.relu,
    "identity": lambda t: t,
}


def layer_activations(activation: str, num_layers: int = 3) -> list[str]:
    """Per-layer activations of one stack: the configured nonlinearity on
    hidden layers, identity on the stack's output layer. Without bias terms
    a ReLU on the width-1 encoder output (or on the decoder output) can die
    permanently, so the output layers stay linear."""
    return [activation] * (num_layers - 1) + ["identity"]


def _layer_forward(wt, vst, vrt, h, src, dst, n, act: str = "relu"):
    """One attention layer on the tape. Returns (h_next, logits, alpha)."""
    sig = _ACTIVATIONS[act]
    z = ad.linear_heads(wt, h)                   # (n, H, d_out)
    s = sig(z)
    a_s = ad.head_dot(s, vst)                    # (n, H)
    a_r = ad.head_dot(s, vrt)
    e = ad.sigmoid(ad.gather_rows(a_s, dst) + ad.gather_rows(a_r, src))   # (E, H)
    w = ad.exp(e)
    denom = ad.segment_sum(w, dst, n)            # (n, H)
    alpha = w / ad.gather_rows(denom, dst)       # (E, H)
    msg = ad.unsqueeze(alpha, 2) * ad.gather_rows(s, src)                 # (E, H, d_out)
    h_next = ad.mean(ad.segment_sum(msg, dst, n), axis=1)                 # (n, d_out)
    return h_next, e, alpha


@dataclass
class ForwardPass:
    """Tape handles from one full forward evaluation."""

    param_tensors: list[ad.Tensor]
    representations: list[ad.Tensor]   # h^(0) .. h^(3), encoder side
    reconstruction: ad.Tensor          # decoder output, (n, feature_dim)
    logits: list[np.ndarray]           # per layer, (E, H)
    alphas: list[np.ndarray]           # per layer, (E, H)


def run_forward(model: GateModel, prep: PreparedStructure) -> ForwardPass:
    if prep.features.shape[1] != model.feature_dim:
        raise ValueError(
            f"feature width {prep.features.shape[1]} does not match model "
            f"feature_dim {model.feature_dim}"
        )
    if model.activation not in _ACTIVATIONS:
        raise ValueError(f"unsupported activation tag {model.activation!r}")
    n = prep.n
    param_tensors: list[ad.Tensor] = []
    logits: list[np.ndarray] = []
    alphas: list[np.ndarray] = []
    acts = layer_activations(model.activation, len(model.encoder))

    h = ad.Tensor(prep.features)
    reps = [h]
    for layer, act in zip(model.encoder, acts):
        wt, vst, vrt = _layer_tensors(layer)
        param_tensors += [wt, vst, vrt]
        h, e, alpha = _layer_forward(wt, vst, vrt, h, prep.src, prep.dst, n, act)
        reps.append(h)
        logits.append(e.data)
        alphas.append(alpha.data)

    d = reps[-1]
    for layer, act in zip(model.decoder, layer_activations(model.activation, len(model.decoder))):
        wt, vst, vrt = _layer_tensors(layer)
        param_tensors += [wt, vst, vrt]
        d, e, alpha = _layer_forward(wt, vst, vrt, d, prep.src, prep.dst, n, act)
        logits.append(e.data)
        alphas.append(alpha.data)

    return ForwardPass(param_tensors, reps, d, logits, alphas)


# --------------------------------------------------------------------------
# Spec'd operation surfaces (forward-only convenience wrappers)

def attention_logits(layer: LayerParams, h_prev: np.ndarray,
                     src: np.ndarray, dst: np.ndarray,
                     activation: str = "relu") -> np.ndarray:
    """Per-edge relevance logits e_ij for messages src -> dst, shape (E, heads)."""
    with ad.no_grad():
        wt, vst, vrt = _layer_tensors(layer)
        h = ad.Tensor(h_prev)
        s = _ACTIVATIONS[activation](ad.linear_heads(wt, h))
        a_s = ad.head_dot(s, vst)
        a_r = ad.head_dot(s, vrt)
        e = ad.sigmoid(ad.gather_rows(a_s, dst) + ad.gather_rows(a_r, src))
    return e.data


def attention_weights(logits: np.ndarray, dst: np.ndarray, num_nodes: int) -> np.ndarray:
    """Normalize per-edge logits into attention weights that sum to one over
    each destination node's neighborhood."""
    w = np.exp(np.asarray(logits, dtype=np.float64))
    denom = np.zeros((num_nodes,) + w.shape[1:], dtype=np.float64)
    np.add.at(denom, dst, w)
    return w / denom[dst]


def encoder_layer(layer: LayerParams, h_prev: np.ndarray,
                  src: np.ndarray, dst: np.ndarray, num_nodes: int,
                  activation: str = "relu") -> np.ndarray:
    """One attention layer forward, heads averaged: (n, d_in) -> (n, d_out)."""
    with ad.no_grad():
        wt, vst, vrt = _layer_tensors(layer)
        h, _, _ = _layer_forward(
            wt, vst, vrt, ad.Tensor(h_prev), src, dst, num_nodes, activation
        )
    return h.data


def encode(model: GateModel, prep: PreparedStructure) -> list[np.ndarray]:
    """All encoder representations h^(0)..h^(3); h^(3) has width 1."""
    with ad.no_grad():
        fwd = run_forward(model, prep)
    return [t.data for t in fwd.representations]


def decode(model: GateModel, h_final: np.ndarray, prep: PreparedStructure) -> np.ndarray:
    """Reconstruct node features from final representations (n, 1) -> (n, 17)."""
    h_final = np.asarray(h_final, dtype=np.float64)
    if h_final.ndim != 2 or h_final.shape[1] != 1:
        raise ValueError(f"expected final representations of shape (n, 1), got {h_final.shape}")
    with ad.no_grad():
        d = ad.Tensor(h_final)
        acts = layer_activations(model.activation, len(model.decoder))
        for layer, act in zip(model.decoder, acts):
            wt, vst, vrt = _layer_tensors(layer)
            d, _, _ = _layer_forward(wt, vst, vrt, d, prep.src, prep.dst, prep.n, act)
    return d.data


def reconstruction_loss(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean squared error over all node-feature entries."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    diff = x - x_hat
    return float(np.mean(diff * diff))


def embed_register(model: GateModel, prep: PreparedStructure) -> float:
    """The root register's final encoder scalar."""
    return float(encode(model, prep)[-1][prep.root_index, 0])


# --------------------------------------------------------------------------
# Loss, gradients, optimizer

def _loss_tensor(fwd: ForwardPass, prep: PreparedStructure,
                 structure_loss_weight: float) -> ad.Tensor:
    x = ad.Tensor(prep.features)
    diff = x - fwd.reconstruction
    loss = ad.mean(diff * diff)
    if structure_loss_weight > 0.0:
        off_diag = prep.src != prep.dst
        if np.any(off_diag):
            h_final = fwd.representations[-1]
            hs = ad.gather_rows(h_final, prep.src[off_diag])
            hd = ad.gather_rows(h_final, prep.dst[off_diag])
            edge_prob = ad.sigmoid(ad.mean(hs * hd, axis=1))
            loss = loss + ad.Tensor(structure_loss_weight) * -ad.mean(ad.log(edge_prob))
    return loss


def loss_and_gradients(model: GateModel, prep: PreparedStructure,
                       structure_loss_weight: float = 0.0):
    """Forward plus reverse pass. Returns (loss value, gradient arrays) with
    gradients in ``model.parameters()`` order."""
    fwd = run_forward(model, prep)
    loss = _loss_tensor(fwd, prep, structure_loss_weight)
    ad.backward(loss)
    grads = [
        t.grad if t.grad is not None else np.zeros_like(t.data)
        for t in fwd.param_tensors
    ]
    return float(loss.data), grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, config: TrainConfig) -> float:
    """One Adam update, in place. Gradients are first clipped to a global L2
    norm of ``gradient_clip``; weight decay is decoupled (applied directly
    to the weights, not folded into the gradient). The update denominator is
    sqrt(v_hat) + eps. Returns the post-clip global gradient norm.
    """
    sq = 0.0
    for g in grads:
        sq += float(np.sum(g * g))
    norm = math.sqrt(sq)
    if not math.isfinite(norm):
        raise NumericalError(f"non-finite gradient norm {norm}")
    scale = config.gradient_clip / norm if norm > config.gradient_clip else 1.0
    state.t += 1
    bc1 = 1.0 - config.beta1 ** state.t
    bc2 = 1.0 - config.beta2 ** state.t
    lr = config.learning_rate
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = g * scale
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * (m_hat / (np.sqrt(v_hat) + config.eps) + config.weight_decay * p)
    return norm * scale if scale != 1.0 else norm


@dataclass
class TrainResult:
    model: GateModel
    epoch_losses: list[float]        # mean reconstruction loss per epoch
    initial_loss: float              # mean loss at initialization, before any update
    max_clipped_grad_norm: float     # largest post-clip global norm observed


def _flatten_model(model: GateModel) -> np.ndarray:
    """Concatenate all parameters into one flat vector and rebind every
    layer's arrays to views of it, so the optimizer can update the whole
    model with a handful of vectorized ops."""
    params = model.parameters()
    flat = np.concatenate([p.ravel() for p in params])
    offset = 0
    for layer in model.encoder + model.decoder:
        for name in ("W", "v_s", "v_r"):
            arr = getattr(layer, name)
            view = flat[offset:offset + arr.size].reshape(arr.shape)
            setattr(layer, name, view)
            offset += arr.size
    return flat


def evaluate_mean_loss(model: GateModel, corpus: list[PreparedStructure],
                       structure_loss_weight: float = 0.0) -> float:
    total = 0.0
    with ad.no_grad():
        for prep in corpus:
            fwd = run_forward(model, prep)
            total += float(_loss_tensor(fwd, prep, structure_loss_weight).data)
    return total / len(corpus)


def train(corpus: list[PreparedStructure], config: TrainConfig) -> TrainResult:
    """Train a fresh model on the corpus: one forward/backward/Adam step per
    structure, corpus order reshuffled every epoch from the seeded stream.
    Bitwise deterministic for a fixed seed; BLAS pools are pinned to one
    thread for the duration (the matrices are tiny, threading only adds
    overhead and nondeterminism risk). The optimizer is the same clipped,
    decoupled-decay Adam as ``adam_step``, applied to the flattened
    parameter vector."""
    if not corpus:
        raise ValueError("training corpus is empty")
    widths = {p.features.shape[1] for p in corpus}
    if len(widths) != 1:
        raise ValueError(f"corpus mixes feature widths {sorted(widths)}")
    with threadpool_limits(limits=1):
        return _train_single_thread(corpus, config, widths.pop())


def _train_single_thread(corpus, config: TrainConfig, feature_dim: int) -> TrainResult:
    rng = np.random.default_rng(config.seed)
    model = _init_from_rng(rng, config.heads, feature_dim, HIDDEN_DIM)
    flat = _flatten_model(model)
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    lr, wd = config.learning_rate, config.weight_decay
    beta1, beta2, eps = config.beta1, config.beta2, config.eps

    initial_loss = evaluate_mean_loss(model, corpus, config.structure_loss_weight)
    losses: list[float] = []
    max_norm = 0.0
    t = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(corpus))
        total = 0.0
        for idx in order:
            loss, grads = loss_and_gradients(model, corpus[idx], config.structure_loss_weight)
            if not math.isfinite(loss):
                raise NumericalError(f"loss diverged at epoch {epoch}: {loss}")
            g = np.concatenate([a.ravel() for a in grads])
            norm = math.sqrt(float(g @ g))
            if not math.isfinite(norm):
                raise NumericalError(f"non-finite gradient norm at epoch {epoch}")
            if norm > config.gradient_clip:
                g *= config.gradient_clip / norm
                norm = config.gradient_clip
            if norm > max_norm:
                max_norm = norm
            t += 1
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            m_hat = m / (1.0 - beta1 ** t)
            v_hat = v / (1.0 - beta2 ** t)
            flat -= lr * (m_hat / (np.sqrt(v_hat) + eps) + wd * flat)
            total += loss
        losses.append(total / len(corpus))
    return TrainResult(model, losses, initial_loss, max_norm)


# --------------------------------------------------------------------------
# Checkpoint format: versioned JSON with base64 little-endian float64 arrays
# and a sha256 checksum over the payload.

CHECKPOINT_SCHEMA = "statereg.checkpoint/1"


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(entry["shape"])
    return arr.copy()


def _payload_digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return "sha256:" + hashlib.sha256(blob).hexdigest()


def save_model(model: GateModel, path, extra_meta: dict | None = None) -> None:
    names = model.parameter_names()
    params = model.parameters()
    payload = {
        "meta": {
            "heads": model.heads,
            "activation": model.activation,
            "feature_dim": model.feature_dim,
            "hidden_dim": model.hidden_dim,
            "encoder_dims": [list(d) for d in encoder_dims(model.feature_dim, model.hidden_dim)],
            "decoder_dims": [list(d) for d in decoder_dims(model.feature_dim, model.hidden_dim)],
            **(extra_meta or {}),
        },
        "params": {name: _encode_array(arr) for name, arr in zip(names, params)},
    }
    doc = {"schema": CHECKPOINT_SCHEMA, "checksum": _payload_digest(payload), **payload}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_checkpoint(path) -> tuple[GateModel, dict]:
    """Load a checkpoint, returning the model and its metadata dict."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint (not valid JSON: {exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema") != CHECKPOINT_SCHEMA:
        raise CheckpointError(
            f"{path}: checkpoint version mismatch "
            f"(expected {CHECKPOINT_SCHEMA!r}, found {doc.get('schema')!r})"
        )
    payload = {"meta": doc.get("meta"), "params": doc.get("params")}
    if _payload_digest(payload) != doc.get("checksum"):
        raise CheckpointError(f"{path}: checksum mismatch, checkpoint is corrupt")
    meta = doc["meta"]
    heads = int(meta["heads"])
    feature_dim = int(meta["feature_dim"])
    hidden_dim = int(meta["hidden_dim"])

    def build_side(side: str, dims) -> list[LayerParams]:
        layers = []
        for i, (d_in, d_out) in enumerate(dims):
            layer = LayerParams(
                W=_decode_array(doc["params"][f"{side}.{i}.W"]),
                v_s=_decode_array(doc["params"][f"{side}.{i}.v_s"]),
                v_r=_decode_array(doc["params"][f"{side}.{i}.v_r"]),
            )
            if layer.W.shape != (heads, d_out, d_in):
                raise CheckpointError(
                    f"{path}: parameter {side}.{i}.W has shape {layer.W.shape}, "
                    f"expected {(heads, d_out, d_in)}"
                )
            layers.append(layer)
        return layers

    try:
        model = GateModel(
            encoder=build_side("encoder", encoder_dims(feature_dim, hidden_dim)),
            decoder=build_side("decoder", decoder_dims(feature_dim, hidden_dim)),
            heads=heads,
            activation=meta["activation"],
            feature_dim=feature_dim,
            hidden_dim=hidden_dim,
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing parameter {exc}") from exc
    return model, meta


def load_model(path) -> GateModel:
    return load_checkpoint(path)[0]
