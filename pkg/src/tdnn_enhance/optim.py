"""Adam with bias correction, plus the dev-loss driven learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

INITIAL_LR = 0.0005
LR_DECAY = 0.7


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    learning_rate: float = INITIAL_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate=INITIAL_LR, **kwargs) -> AdamState:
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            **kwargs,
        )

    def copy(self) -> AdamState:
        return AdamState(
            [m.copy() for m in self.m],
            [v.copy() for v in self.v],
            self.t,
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.eps,
        )


def adam_step(params, grads, state: AdamState):
    """One Adam update. Returns new parameter arrays; ``state`` is updated in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidArgument("params, grads and optimizer state disagree in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise InvalidArgument(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")
        m = state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        v = state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        updated.append(p - state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.eps))
    return updated, state


def lr_update(state: AdamState, prev_dev_loss, curr_dev_loss) -> AdamState:
    """Scale the learning rate by 0.7 when the dev loss went up."""
    if not (np.isfinite(prev_dev_loss) and np.isfinite(curr_dev_loss)):
        raise InvalidArgument("dev losses must be finite")
    if curr_dev_loss > prev_dev_loss:
        state.learning_rate *= LR_DECAY
    return state
