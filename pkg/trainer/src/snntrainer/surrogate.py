"""Spike activation with an arctangent surrogate gradient.

The forward pass is the Heaviside step on (membrane - threshold); the
backward pass uses the derivative of the smoothed step

    sigma(x) = arctan(pi / 2 * alpha * x) / pi + 1/2
    sigma'(x) = alpha / (2 * (1 + (pi / 2 * alpha * x)^2))

so the surrogate is exactly the gradient of a differentiable relaxation,
which makes it checkable against finite differences.
"""
from __future__ import annotations

import math

import torch

DEFAULT_ALPHA = 2.0


class AtanSpike(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x: torch.Tensor, alpha: float) -> torch.Tensor:
        ctx.save_for_backward(x)
        ctx.alpha = alpha
        return (x >= 0).to(x)

    @staticmethod
    def backward(ctx, grad_out: torch.Tensor):
        (x,) = ctx.saved_tensors
        alpha = ctx.alpha
        grad = alpha / (2 * (1 + (math.pi / 2 * alpha * x) ** 2))
        return grad_out * grad, None


def spike_fn(x: torch.Tensor, alpha: float = DEFAULT_ALPHA) -> torch.Tensor:
    """Heaviside spike with surrogate gradient; x is membrane - threshold."""
    return AtanSpike.apply(x, alpha)


def smoothed_spike(x: torch.Tensor, alpha: float = DEFAULT_ALPHA) -> torch.Tensor:
    """The differentiable relaxation whose exact derivative the surrogate uses."""
    return torch.arctan(math.pi / 2 * alpha * x) / math.pi + 0.5
