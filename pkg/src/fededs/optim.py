"""Optimizers: momentum SGD for model segments, AdamW for the encryptor.

Updates are applied in place to the given parameter arrays; buffers are
allocated lazily on the first step and must keep matching shapes afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

MOMENTUM_SGD = "momentum-sgd"
ADAPTIVE = "adaptive-decoupled-decay"


@dataclass
class OptimizerState:
    kind: str
    learning_rate: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    buffers: list[np.ndarray] = field(default_factory=list)
    moment2: list[np.ndarray] = field(default_factory=list)


def momentum_sgd(lr: float, momentum: float = 0.9, weight_decay: float = 0.0) -> OptimizerState:
    if not 0.0 <= momentum < 1.0:
        raise DimensionError(f"momentum must be in [0,1), got {momentum}")
    return OptimizerState(MOMENTUM_SGD, lr, momentum=momentum, weight_decay=weight_decay)


def adamw(lr: float, weight_decay: float = 0.0) -> OptimizerState:
    return OptimizerState(ADAPTIVE, lr, weight_decay=weight_decay)


def _check_shapes(state: OptimizerState, params, grads) -> None:
    if len(params) != len(grads):
        raise DimensionError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"grad shape {g.shape} != param shape {p.shape}")
    if state.buffers and len(state.buffers) != len(params):
        raise DimensionError("optimizer buffers do not match parameter collection")


def sgd_momentum_step(
    state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], OptimizerState]:
    """buffer <- rho*buffer + grad + wd*param; param <- param - lr*buffer."""
    if state.kind != MOMENTUM_SGD:
        raise DimensionError(f"optimizer kind {state.kind!r} is not {MOMENTUM_SGD!r}")
    _check_shapes(state, params, grads)
    if not state.buffers:
        state.buffers = [np.zeros_like(p) for p in params]
    for p, g, buf in zip(params, grads, state.buffers):
        step = g if state.weight_decay == 0.0 else g + state.weight_decay * p
        buf *= state.momentum
        buf += step
        p -= state.learning_rate * buf
    state.step_count += 1
    return params, state


def adaptive_step(
    state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], OptimizerState]:
    """Bias-corrected first/second-moment update with decoupled weight decay."""
    if state.kind != ADAPTIVE:
        raise DimensionError(f"optimizer kind {state.kind!r} is not {ADAPTIVE!r}")
    _check_shapes(state, params, grads)
    if not state.buffers:
        state.buffers = [np.zeros_like(p) for p in params]
        state.moment2 = [np.zeros_like(p) for p in params]
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.buffers, state.moment2):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay != 0.0:
            p -= state.learning_rate * state.weight_decay * p
    return params, state


def step(state: OptimizerState, params, grads):
    if state.kind == MOMENTUM_SGD:
        return sgd_momentum_step(state, params, grads)
    return adaptive_step(state, params, grads)
