"""Small feedforward networks with explicit reverse-mode gradients.

Everything is dense numpy: a network is a list of (weight, bias, activation)
layers with gradient buffers of matching shapes. Forward passes cache the
per-layer inputs and pre-activations that backward consumes, so the usual
step is forward(cache=True) -> backward(upstream) -> optimizer step.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, StateError

__all__ = ["Layer", "Network", "AdamState", "clip_parameters", "ACTIVATIONS", "LEAKY_SLOPE"]

LEAKY_SLOPE = 0.1

ACTIVATIONS = ("linear", "relu", "lrelu", "tanh")


def _act(z, tag):
    if tag == "linear":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "lrelu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if tag == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {tag!r}")


def _act_grad(z, tag):
    if tag == "linear":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0).astype(z.dtype)
    if tag == "lrelu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if tag == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (d_in, d_out)
    bias: np.ndarray  # (d_out,)
    activation: str
    grad_weight: np.ndarray = field(default=None, repr=False)
    grad_bias: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError("layer weight must be (d_in, d_out) with matching bias")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.grad_weight is None:
            self.grad_weight = np.zeros_like(self.weight)
        if self.grad_bias is None:
            self.grad_bias = np.zeros_like(self.bias)
        if self.grad_weight.shape != self.weight.shape:
            raise ShapeError("gradient buffer must match weight shape")
        if self.grad_bias.shape != self.bias.shape:
            raise ShapeError("gradient buffer must match bias shape")


class Network:
    """An MLP whose layers chain dimensionally; owns its gradient buffers."""

    def __init__(self, layers):
        if not layers:
            raise ShapeError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ShapeError(
                    f"layer output dim {a.weight.shape[1]} does not feed "
                    f"layer input dim {b.weight.shape[0]}"
                )
        self.layers = list(layers)
        self._cache = None

    @classmethod
    def create(cls, dims, activations, rng) -> "Network":
        """Build a network with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init.

        ``dims`` lists the layer sizes input-first, e.g. [4, 16, 1];
        ``activations`` gives one tag per layer (len(dims) - 1 of them).
        """
        if len(activations) != len(dims) - 1:
            raise ShapeError("need one activation per layer")
        layers = []
        for d_in, d_out, act in zip(dims, dims[1:], activations):
            bound = 1.0 / np.sqrt(d_in)
            w = rng.uniform(-bound, bound, size=(d_in, d_out))
            b = rng.uniform(-bound, bound, size=d_out)
            layers.append(Layer(w, b, act))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def param_count(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def parameters(self):
        for l in self.layers:
            yield l.weight
            yield l.bias

    def forward(self, batch: np.ndarray, cache: bool = False) -> np.ndarray:
        """Run the batch (rows are samples) through all layers.

        With ``cache=True`` the per-layer inputs and pre-activations are
        retained for a following :meth:`backward` call.
        """
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(
                f"batch shape {x.shape} does not match input dim {self.input_dim}"
            )
        saved = [] if cache else None
        for l in self.layers:
            z = x @ l.weight + l.bias
            if cache:
                saved.append((x, z))
            x = _act(z, l.activation)
        if cache:
            self._cache = saved
        return x

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients for the cached forward pass.

        ``upstream`` holds the loss gradient with respect to the network
        output, one row per sample. Returns the gradient with respect to
        the input batch (used to chain through composed networks). The
        cache is consumed, so each forward pays for exactly one backward.
        """
        if self._cache is None:
            raise StateError("backward called without a cached forward pass")
        g = np.asarray(upstream, dtype=np.float64)
        last_x, last_z = self._cache[-1]
        if g.shape != (last_x.shape[0], self.output_dim):
            raise ShapeError(
                f"upstream gradient shape {g.shape} does not match output "
                f"({last_x.shape[0]}, {self.output_dim})"
            )
        for l, (x, z) in zip(reversed(self.layers), reversed(self._cache)):
            gz = g * _act_grad(z, l.activation)
            l.grad_weight += x.T @ gz
            l.grad_bias += gz.sum(axis=0)
            g = gz @ l.weight.T
        self._cache = None
        return g

    def zero_grads(self):
        for l in self.layers:
            l.grad_weight[:] = 0.0
            l.grad_bias[:] = 0.0

    def copy(self) -> "Network":
        return Network(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    # Checkpoint format "dotn-net-v1": an .npz archive with string scalar
    # "format", string array "activations", and row-major float64 arrays
    # "w0","b0","w1","b1",... in layer order. Shapes are carried by the
    # arrays themselves.
    def save(self, path):
        arrays = {
            "format": np.asarray("dotn-net-v1"),
            "activations": np.asarray([l.activation for l in self.layers]),
        }
        for i, l in enumerate(self.layers):
            arrays[f"w{i}"] = l.weight
            arrays[f"b{i}"] = l.bias
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "Network":
        with np.load(path, allow_pickle=False) as data:
            fmt = str(data["format"])
            if fmt != "dotn-net-v1":
                raise ValueError(f"unsupported network format {fmt!r}")
            acts = [str(a) for a in data["activations"]]
            layers = [
                Layer(data[f"w{i}"].copy(), data[f"b{i}"].copy(), act)
                for i, act in enumerate(acts)
            ]
        return cls(layers)


class AdamState:
    """Bias-corrected Adam over a network's gradient buffers.

    ``step`` consumes the buffers (they are zeroed afterwards) and advances
    the shared step counter, so each call corresponds to one optimizer
    update of whatever loss was last backpropagated.
    """

    def __init__(self, net: Network, learning_rate=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p) for p in net.parameters()]
        self.second_moment = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: Network):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        params = list(net.parameters())
        grads = []
        for l in net.layers:
            grads.append(l.grad_weight)
            grads.append(l.grad_bias)
        if len(params) != len(self.first_moment):
            raise ShapeError("Adam state does not match this network")
        for p, g, m, v in zip(params, grads, self.first_moment, self.second_moment):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        net.zero_grads()


def clip_parameters(net: Network, c: float):
    """Clamp every weight and bias into [-c, c] in place."""
    if not c > 0:
        raise ValueError("clip bound must be positive")
    for p in net.parameters():
        np.clip(p, -c, c, out=p)
