"""Dense/TDNN mask estimator with hand-written reverse-mode gradients.

A layer with temporal context ``(L, R)`` sees, at frame ``t``, the previous
layer's outputs at frames ``t+L .. t+R`` concatenated into one vector, so a
single weight matrix of shape ``out x (in * width)`` holds every delay
weight. Out-of-range frames replicate the first/last frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import N_BINS
from .errors import InvalidArgument
from .masking import signal_mse

STD_FLOOR = 1e-8
ACTIVATIONS = ("relu", "linear")

# Layerwise temporal contexts: four hidden layers then the output layer.
CONTEXT_PRESETS = {
    "dnn": ((-8, 8), (0, 0), (0, 0), (0, 0), (0, 0)),
    "tdnn-a": ((-4, 4), (-3, 3), (-2, 2), (-2, 2), (0, 0)),
    "tdnn-b": ((-2, 2), (-2, 2), (-2, 2), (-4, 4), (0, 0)),
    "tdnn-c": ((-2, 2), (-1, 1), (-2, 2), (-4, 4), (0, 0)),
    "tdnn-d": ((-2, 2), (-2, 2), (-2, 2), (-2, 2), (0, 0)),
    "tdnn-e": ((-1, 1), (-2, 2), (-2, 2), (-2, 2), (0, 0)),
    "tdnn-f": ((-1, 1), (-1, 1), (-2, 2), (-2, 2), (0, 0)),
}
# Whole-network receptive field as tabulated next to each preset.
NETWORK_CONTEXT = {
    "dnn": (-8, 8),
    "tdnn-a": (-11, 11),
    "tdnn-b": (-10, 10),
    "tdnn-c": (-9, 9),
    "tdnn-d": (-8, 8),
    "tdnn-e": (-7, 7),
    "tdnn-f": (-6, 6),
}


def check_context(context) -> tuple[int, int]:
    try:
        left, right = (int(c) for c in context)
    except (TypeError, ValueError):
        raise InvalidArgument(f"context must be a pair (L, R), got {context!r}") from None
    if left > 0 or right < 0:
        raise InvalidArgument(f"context ({left}, {right}) must satisfy L <= 0 <= R")
    return left, right


def context_width(context) -> int:
    left, right = context
    return right - left + 1


def receptive_field(contexts) -> tuple[int, int]:
    return sum(c[0] for c in contexts), sum(c[1] for c in contexts)


@dataclass
class TdnnLayer:
    context: tuple[int, int]
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.context = check_context(self.context)
        if self.activation not in ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise InvalidArgument(
                f"weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )
        if self.weight.shape[1] % self.width:
            raise InvalidArgument(
                f"weight has {self.weight.shape[1]} inputs, not a multiple of context width {self.width}"
            )

    @property
    def width(self) -> int:
        return context_width(self.context)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1] // self.width

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class TdnnModel:
    layers: list[TdnnLayer]
    mean: np.ndarray = field(default_factory=lambda: np.zeros(N_BINS))
    std: np.ndarray = field(default_factory=lambda: np.ones(N_BINS))

    def __post_init__(self):
        if not self.layers:
            raise InvalidArgument("a model needs at least one layer")
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)
        if self.mean.shape != (self.input_dim,) or self.std.shape != (self.input_dim,):
            raise InvalidArgument("normalization vectors must match the input dimension")
        for prev, layer in zip(self.layers, self.layers[1:]):
            if layer.in_dim != prev.out_dim:
                raise InvalidArgument(
                    f"layer expects {layer.in_dim} inputs but previous layer emits {prev.out_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def contexts(self):
        return [layer.context for layer in self.layers]

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases in declaration order (w0, b0, w1, b1, ...)."""
        params = []
        for layer in self.layers:
            params.extend((layer.weight, layer.bias))
        return params

    def set_parameters(self, params):
        params = list(params)
        if len(params) != 2 * len(self.layers):
            raise InvalidArgument("parameter count does not match the model")
        for i, layer in enumerate(self.layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != layer.weight.shape or b.shape != layer.bias.shape:
                raise InvalidArgument(f"parameter shapes for layer {i} do not match")
            layer.weight, layer.bias = w, b

    def copy(self) -> TdnnModel:
        layers = [
            TdnnLayer(l.context, l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers
        ]
        return TdnnModel(layers, self.mean.copy(), self.std.copy())

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def build_model(
    contexts,
    hidden=256,
    input_dim=N_BINS,
    output_dim=N_BINS,
    seed=0,
    mean=None,
    std=None,
    output_bias=1.0,
) -> TdnnModel:
    """Randomly initialised model: ReLU hidden layers and a ReLU output layer.

    ``hidden`` is one width for every hidden layer or a list of widths.
    Weights are Glorot-uniform, biases zero except the output layer, which
    starts at ``output_bias`` so the initial mask is close to identity.
    """
    contexts = [check_context(c) for c in contexts]
    n_hidden = len(contexts) - 1
    widths = [hidden] * n_hidden if np.isscalar(hidden) else list(hidden)
    if len(widths) != n_hidden:
        raise InvalidArgument(f"{len(contexts)} contexts need {n_hidden} hidden widths")
    rng = np.random.default_rng(seed)
    dims = [input_dim, *widths, output_dim]
    layers = []
    for i, ctx in enumerate(contexts):
        fan_in = dims[i] * context_width(ctx)
        fan_out = dims[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        bias = np.zeros(fan_out)
        if i == len(contexts) - 1:
            bias += output_bias
        layers.append(TdnnLayer(ctx, weight, bias, "relu"))
    mean = np.zeros(input_dim) if mean is None else mean
    std = np.ones(input_dim) if std is None else std
    return TdnnModel(layers, mean, std)


def splice(features, context):
    """Stack rows ``t+L .. t+R`` of ``features`` side by side, replicating edges."""
    features = np.asarray(features)
    left, right = check_context(context)
    n_frames = features.shape[0]
    if n_frames < 1:
        raise InvalidArgument("splice needs at least one frame")
    if left == 0 and right == 0:
        return features
    padded = np.concatenate(
        [
            np.repeat(features[:1], -left, axis=0),
            features,
            np.repeat(features[-1:], right, axis=0),
        ]
    )
    return np.concatenate(
        [padded[k : k + n_frames] for k in range(right - left + 1)], axis=1
    )


def unsplice(grad, context, n_frames, dim):
    """Adjoint of :func:`splice`: fold a spliced gradient back onto frames."""
    left, right = context
    if left == 0 and right == 0:
        return grad
    width = right - left + 1
    parts = grad.reshape(n_frames, width, dim)
    padded = np.zeros((n_frames + width - 1, dim), dtype=grad.dtype)
    for k in range(width):
        padded[k : k + n_frames] += parts[:, k, :]
    out = padded[-left : -left + n_frames].copy()
    if left:
        out[0] += padded[:-left].sum(axis=0)
    if right:
        out[-1] += padded[n_frames - left :].sum(axis=0)
    return out


def normalize_input(model: TdnnModel, noisy_mag):
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    if noisy_mag.ndim != 2 or noisy_mag.shape[1] != model.input_dim:
        raise InvalidArgument(
            f"model expects T x {model.input_dim} magnitudes, got {noisy_mag.shape}"
        )
    return (noisy_mag - model.mean) / model.std


def _activate(z, activation):
    return np.maximum(z, 0.0) if activation == "relu" else z


def _run(model: TdnnModel, noisy_mag, keep: bool, dtype=np.float64):
    h = normalize_input(model, noisy_mag).astype(dtype, copy=False)
    trace = []
    for layer in model.layers:
        x = splice(h, layer.context)
        z = x @ layer.weight.T.astype(dtype, copy=False) + layer.bias.astype(dtype, copy=False)
        if keep:
            trace.append((x, z))
        h = _activate(z, layer.activation)
    return h, trace


def forward(model: TdnnModel, noisy_mag, dtype=np.float64):
    """Estimate a T x F mask from noisy magnitudes.

    ``dtype=np.float32`` runs a single-precision inference path.
    """
    out, _ = _run(model, noisy_mag, keep=False, dtype=dtype)
    if model.layers[-1].activation == "linear":
        out = np.maximum(out, 0.0)
    return out


def forward_backward(model: TdnnModel, noisy_mag, clean_mag):
    """Signal-approximation loss and its gradient for every parameter.

    Returns ``(loss, grads)`` with ``grads`` ordered like
    ``model.parameters()``. The ReLU derivative at exactly zero is taken as 0.
    """
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    if noisy_mag.shape != clean_mag.shape:
        raise InvalidArgument(
            f"noisy {noisy_mag.shape} and clean {clean_mag.shape} magnitudes differ in shape"
        )
    mask, trace = _run(model, noisy_mag, keep=True)
    if model.layers[-1].activation == "linear":
        mask = np.maximum(mask, 0.0)
    loss = signal_mse(noisy_mag, mask, clean_mag)

    residual = noisy_mag * mask - clean_mag
    grad_h = (2.0 / residual.size) * residual * noisy_mag
    if model.layers[-1].activation == "linear":
        grad_h = grad_h * (trace[-1][1] > 0)

    n_frames = noisy_mag.shape[0]
    grads = [None] * (2 * len(model.layers))
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        x, z = trace[i]
        grad_z = grad_h * (z > 0) if layer.activation == "relu" else grad_h
        grads[2 * i] = grad_z.T @ x
        grads[2 * i + 1] = grad_z.sum(axis=0)
        if i:
            grad_x = grad_z @ layer.weight
            grad_h = unsplice(grad_x, layer.context, n_frames, layer.in_dim)
    return loss, grads
