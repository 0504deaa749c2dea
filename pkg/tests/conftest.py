"""Shared fixtures: healthy-band sampling and the finite-difference oracle."""

import math
import random

import numpy as np
import pytest

from btt.toytrainer import MlpSpec, loss_only


def healthy_band_spec(rng: random.Random, max_epoch: int = 20) -> MlpSpec:
    """A configuration from the band where training is known to behave.

    Shallow (single hidden layer) nets with near-unit init and small
    learning rates: inter-layer amplification is structurally absent and
    the loss keeps declining smoothly through the whole run.
    """
    return MlpSpec(
        depth=1,
        width=rng.randint(16, 64),
        activation=rng.choice(["relu", "tanh"]),
        init_scale=math.exp(rng.uniform(math.log(0.8), math.log(1.3))),
        learning_rate=math.exp(rng.uniform(math.log(0.03), math.log(0.15))),
        momentum=rng.uniform(0.0, 0.5),
        batch_size=rng.randint(48, 128),
        max_epoch=max_epoch,
    )


def finite_difference_grads(model, X, y, spec, eps=1e-5):
    """Central-difference gradients for every weight and bias entry."""
    grads_w = [np.zeros_like(W) for W in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]
    for l, W in enumerate(model.weights):
        for idx in np.ndindex(*W.shape):
            orig = W[idx]
            W[idx] = orig + eps
            lp = loss_only(model, X, y, spec)
            W[idx] = orig - eps
            lm = loss_only(model, X, y, spec)
            W[idx] = orig
            grads_w[l][idx] = (lp - lm) / (2 * eps)
    for l, b in enumerate(model.biases):
        for idx in np.ndindex(*b.shape):
            orig = b[idx]
            b[idx] = orig + eps
            lp = loss_only(model, X, y, spec)
            b[idx] = orig - eps
            lm = loss_only(model, X, y, spec)
            b[idx] = orig
            grads_b[l][idx] = (lp - lm) / (2 * eps)
    return grads_w, grads_b


def max_grad_rel_err(model, X, y, spec, eps=1e-5):
    from btt.toytrainer import loss_and_grads

    _, dws, dbs, _ = loss_and_grads(model, X, y, spec)
    fd_w, fd_b = finite_difference_grads(model, X, y, spec, eps)
    worst = 0.0
    for a, b in zip(dws + dbs, fd_w + fd_b):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
        worst = max(worst, float((np.abs(a - b) / denom).max()))
    return worst


def relu_kink_free(model, X, spec, margin=1e-4):
    """True when no hidden pre-activation sits within `margin` of a ReLU kink."""
    from btt.toytrainer import forward

    if spec.activation != "relu":
        return True
    _, pres, _ = forward(model, X, spec)
    return all(float(np.abs(z).min()) > margin for z in pres)
