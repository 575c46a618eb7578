"""Minimal differentiable-model substrate.

A client model is a small MLP split into three segments:

* extractor  -- input_dim -> hidden... -> feature_dim, activation after
  every layer (tanh by default, relu selectable),
* stochastic layer -- a frozen random affine map on the feature vector,
  h -> W.h + b with W = I + scale*G; generated from a seed, never trained,
* classifier -- a single affine head feature_dim -> num_classes feeding a
  softmax.

The plain forward path skips the stochastic layer; the stochastic path
routes features through it (optionally through a *peer's* layer). All
parameters are float64 numpy arrays; a parameter collection is a flat list
ordered ``[W1, b1, W2, b2, ...]`` with weights shaped (out, in).

All gradients here are exact analytic reverse-mode gradients of the
implemented losses (including the 1e-12 epsilon inside the logs), which is
what the finite-difference suite checks them against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError

EPS_NUM = 1e-12  # additive epsilon inside log terms

DEFAULT_STOCHASTIC_SCALE = 0.5


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class LayerSizes:
    """Architecture descriptor for a segmented client model."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    feature_dim: int
    num_classes: int

    def extractor_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.feature_dim]
        return list(zip(dims[1:], dims[:-1]))  # (out, in) per layer


@dataclass
class StochasticLayerParams:
    """Frozen random affine perturbation of the feature vector.

    Regenerating from the same (seed, feature_dim, scale) reproduces the
    arrays bit-for-bit; no optimizer ever touches them.
    """

    weight: np.ndarray
    offset: np.ndarray
    seed: int
    scale: float = DEFAULT_STOCHASTIC_SCALE

    @property
    def feature_dim(self) -> int:
        return self.offset.shape[0]


@dataclass
class SegmentedParams:
    """Trainable extractor + classifier plus the client's frozen layer."""

    extractor: list[np.ndarray]
    classifier: list[np.ndarray]
    stochastic: StochasticLayerParams
    sizes: LayerSizes
    activation: str = "tanh"

    def trainable(self) -> list[np.ndarray]:
        """Arrays the optimizer may update (never the stochastic segment)."""
        return [*self.extractor, *self.classifier]

    def copy(self) -> "SegmentedParams":
        return SegmentedParams(
            extractor=[a.copy() for a in self.extractor],
            classifier=[a.copy() for a in self.classifier],
            stochastic=self.stochastic,  # frozen, shared by design
            sizes=self.sizes,
            activation=self.activation,
        )


@dataclass
class EncryptorParams:
    """Input-shape-preserving residual MLP ``g(x) = x + W2.act(W1.x+b1)+b2``."""

    arrays: list[np.ndarray] = field(default_factory=list)
    input_dim: int = 0
    activation: str = "tanh"

    def copy(self) -> "EncryptorParams":
        return EncryptorParams(
            arrays=[a.copy() for a in self.arrays],
            input_dim=self.input_dim,
            activation=self.activation,
        )


# ---------------------------------------------------------------------------
# initialization


def make_stochastic_layer(
    feature_dim: int, seed: int, scale: float = DEFAULT_STOCHASTIC_SCALE
) -> StochasticLayerParams:
    """Generate the frozen layer W = I + scale*G, b = scale*g from a seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    weight = np.eye(feature_dim) + scale * rng.standard_normal((feature_dim, feature_dim))
    offset = scale * rng.standard_normal(feature_dim)
    return StochasticLayerParams(weight=weight, offset=offset, seed=int(seed), scale=scale)


def identity_stochastic_layer(feature_dim: int, seed: int = 0) -> StochasticLayerParams:
    """Identity perturbation; makes the stochastic path equal the plain one."""
    return StochasticLayerParams(
        weight=np.eye(feature_dim), offset=np.zeros(feature_dim), seed=int(seed), scale=0.0
    )


def _affine_init(rng, out_dim: int, in_dim: int, scale: float) -> list[np.ndarray]:
    w = scale / np.sqrt(max(in_dim, 1)) * rng.standard_normal((out_dim, in_dim))
    return [w, np.zeros(out_dim)]


def init_segmented(
    sizes: LayerSizes,
    seed: int,
    activation: str = "tanh",
    stochastic_seed: int | None = None,
    stochastic_scale: float = DEFAULT_STOCHASTIC_SCALE,
    init_scale: float = 1.0,
) -> SegmentedParams:
    """Seeded 1/sqrt(fan_in) normal weights, zero biases.

    ``init_scale=0`` gives the all-zero model (uniform softmax output).
    """
    if activation not in _ACTIVATIONS:
        raise DimensionError(f"unknown activation {activation!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    extractor: list[np.ndarray] = []
    for out_dim, in_dim in sizes.extractor_dims():
        extractor.extend(_affine_init(rng, out_dim, in_dim, init_scale))
    classifier = _affine_init(rng, sizes.num_classes, sizes.feature_dim, init_scale)
    layer = make_stochastic_layer(
        sizes.feature_dim,
        seed if stochastic_seed is None else stochastic_seed,
        stochastic_scale,
    )
    return SegmentedParams(extractor, classifier, layer, sizes, activation)


def init_encryptor(
    input_dim: int,
    hidden_dim: int,
    seed: int,
    activation: str = "tanh",
    residual_scale: float = 1e-2,
) -> EncryptorParams:
    """Near-identity init: output = input + small random residual."""
    rng = np.random.Generator(np.random.PCG64(seed))
    w1, b1 = _affine_init(rng, hidden_dim, input_dim, 1.0)
    w2, b2 = _affine_init(rng, input_dim, hidden_dim, residual_scale)
    return EncryptorParams(arrays=[w1, b1, w2, b2], input_dim=input_dim, activation=activation)


# ---------------------------------------------------------------------------
# forward passes

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda out: 1.0 - out * out),
    "relu": (lambda z: np.maximum(z, 0.0), lambda out: (out > 0).astype(float)),
}


def _as_batch(x: np.ndarray, dim: int, name: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise DimensionError(f"{name}: expected trailing dimension {dim}, got shape {x.shape}")
    return x, single


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _extractor_forward(params: SegmentedParams, x: np.ndarray):
    act, _ = _ACTIVATIONS[params.activation]
    cache = []
    h = x
    for i in range(0, len(params.extractor), 2):
        w, b = params.extractor[i], params.extractor[i + 1]
        out = act(h @ w.T + b)
        cache.append((h, out))
        h = out
    return h, cache


def _classifier_logits(params: SegmentedParams, h: np.ndarray) -> np.ndarray:
    w, b = params.classifier
    return h @ w.T + b


def forward_plain(params: SegmentedParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities along the plain path (stochastic layer skipped)."""
    xb, single = _as_batch(x, params.sizes.input_dim, "forward_plain")
    h, _ = _extractor_forward(params, xb)
    p = softmax(_classifier_logits(params, h))
    return p[0] if single else p


def forward_stochastic(
    params: SegmentedParams, stochastic: StochasticLayerParams, x: np.ndarray
) -> np.ndarray:
    """Class probabilities with features routed through ``stochastic``."""
    if stochastic.feature_dim != params.sizes.feature_dim:
        raise DimensionError(
            f"stochastic layer dim {stochastic.feature_dim} != "
            f"feature dim {params.sizes.feature_dim}"
        )
    xb, single = _as_batch(x, params.sizes.input_dim, "forward_stochastic")
    h, _ = _extractor_forward(params, xb)
    s = h @ stochastic.weight.T + stochastic.offset
    p = softmax(_classifier_logits(params, s))
    return p[0] if single else p


def encryptor_forward(phi: EncryptorParams, x: np.ndarray) -> np.ndarray:
    """Encrypted sample(s) g(x; phi); output shape equals input shape."""
    xb, single = _as_batch(x, phi.input_dim, "encryptor_forward")
    act, _ = _ACTIVATIONS[phi.activation]
    w1, b1, w2, b2 = phi.arrays
    mid = act(xb @ w1.T + b1)
    out = xb + mid @ w2.T + b2
    return out[0] if single else out


# ---------------------------------------------------------------------------
# scalar reference losses


def cross_entropy(pred: np.ndarray, label: int) -> float:
    """-log(pred[label] + eps) for a single probability vector."""
    pred = np.asarray(pred, dtype=float)
    label = int(label)
    if not 0 <= label < pred.shape[-1]:
        raise IndexError(f"label {label} out of range for {pred.shape[-1]} classes")
    return float(-np.log(pred[label] + EPS_NUM))


def kl_divergence(target: np.ndarray, pred: np.ndarray) -> float:
    """sum target * log((target+eps)/(pred+eps)); >= 0 up to epsilon slack."""
    target = np.asarray(target, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if target.shape != pred.shape:
        raise DimensionError(f"length mismatch {target.shape} vs {pred.shape}")
    return float(np.sum(target * (np.log(target + EPS_NUM) - np.log(pred + EPS_NUM))))


# ---------------------------------------------------------------------------
# batched losses with analytic gradients


def _check_finite(loss: float, term: str) -> float:
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss in term {term!r}: {loss}")
    return float(loss)


def _softmax_backward(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    # dL/dlogits given dL/dprobabilities, per row.
    inner = np.sum(dp * p, axis=-1, keepdims=True)
    return p * (dp - inner)


def _ce_head(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    p = softmax(logits)
    n = p.shape[0]
    picked = p[np.arange(n), labels]
    loss = _check_finite(-np.mean(np.log(picked + EPS_NUM)), "cross_entropy")
    dp = np.zeros_like(p)
    dp[np.arange(n), labels] = -1.0 / (picked + EPS_NUM) / n
    return loss, _softmax_backward(p, dp)


def _kl_head(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    p = softmax(logits)
    n = p.shape[0]
    loss = np.mean(np.sum(targets * (np.log(targets + EPS_NUM) - np.log(p + EPS_NUM)), axis=-1))
    loss = _check_finite(loss, "kl_divergence")
    dp = -targets / (p + EPS_NUM) / n
    return loss, _softmax_backward(p, dp)


def _zero_grads(arrays: list[np.ndarray]) -> list[np.ndarray]:
    return [np.zeros_like(a) for a in arrays]


def _backward_model(
    params: SegmentedParams,
    cache,
    h_cls_in: np.ndarray,
    dlogits: np.ndarray,
    stochastic: StochasticLayerParams | None,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Backprop dlogits to extractor/classifier grads and the model input."""
    _, deriv = _ACTIVATIONS[params.activation]
    wc = params.classifier[0]
    cls_grads = [dlogits.T @ h_cls_in, dlogits.sum(axis=0)]
    dh = dlogits @ wc
    if stochastic is not None:
        dh = dh @ stochastic.weight  # frozen: contributes no grads of its own
    ext_grads: list[np.ndarray] = []
    for i in range(len(cache) - 1, -1, -1):
        layer_in, out = cache[i]
        w = params.extractor[2 * i]
        dpre = dh * deriv(out)
        ext_grads.insert(0, dpre.sum(axis=0))
        ext_grads.insert(0, dpre.T @ layer_in)
        dh = dpre @ w
    return ext_grads, cls_grads, dh


def ce_grads_plain(
    params: SegmentedParams, x: np.ndarray, labels: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy along the plain path, with grads for g and c."""
    xb, _ = _as_batch(x, params.sizes.input_dim, "ce_grads_plain")
    labels = np.asarray(labels, dtype=int).reshape(-1)
    h, cache = _extractor_forward(params, xb)
    loss, dlogits = _ce_head(_classifier_logits(params, h), labels)
    ext_g, cls_g, _ = _backward_model(params, cache, h, dlogits, None)
    return loss, ext_g, cls_g


def kl_grads_stochastic(
    params: SegmentedParams,
    stochastic: StochasticLayerParams,
    x: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean KL(target || model) through a substituted stochastic layer."""
    xb, _ = _as_batch(x, params.sizes.input_dim, "kl_grads_stochastic")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape != (xb.shape[0], params.sizes.num_classes):
        raise DimensionError(
            f"targets shape {targets.shape} != ({xb.shape[0]}, {params.sizes.num_classes})"
        )
    h, cache = _extractor_forward(params, xb)
    s = h @ stochastic.weight.T + stochastic.offset
    loss, dlogits = _kl_head(_classifier_logits(params, s), targets)
    ext_g, cls_g, _ = _backward_model(params, cache, s, dlogits, stochastic)
    return loss, ext_g, cls_g


def encryptor_grads(
    phi: EncryptorParams,
    frozen: SegmentedParams,
    stochastic: StochasticLayerParams,
    x: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, list[np.ndarray]]:
    """Mean CE of the frozen stochastic-path model on g(x; phi), grads for phi only."""
    xb, _ = _as_batch(x, phi.input_dim, "encryptor_grads")
    labels = np.asarray(labels, dtype=int).reshape(-1)
    act, deriv = _ACTIVATIONS[phi.activation]
    w1, b1, w2, b2 = phi.arrays
    mid = act(xb @ w1.T + b1)
    enc = xb + mid @ w2.T + b2

    h, cache = _extractor_forward(frozen, enc)
    s = h @ stochastic.weight.T + stochastic.offset
    loss, dlogits = _ce_head(_classifier_logits(frozen, s), labels)
    _, _, denc = _backward_model(frozen, cache, s, dlogits, stochastic)

    dmid = denc @ w2
    dpre1 = dmid * deriv(mid)
    phi_grads = [dpre1.T @ xb, dpre1.sum(axis=0), denc.T @ mid, denc.sum(axis=0)]
    return loss, phi_grads


def add_scaled(
    acc: list[np.ndarray] | None, grads: list[np.ndarray], scale: float
) -> list[np.ndarray]:
    """acc += scale * grads (elementwise over a collection); acc may be None."""
    if acc is None:
        return [scale * g for g in grads]
    if len(acc) != len(grads):
        raise DimensionError("gradient collections differ in length")
    for a, g in zip(acc, grads):
        if a.shape != g.shape:
            raise DimensionError(f"gradient shape mismatch {a.shape} vs {g.shape}")
        a += scale * g
    return acc
