"""Many-to-one stacked LSTM: cell step, forward pass, initialisation, snapshots.

Weight layout: every gate matrix is ``hidden_dim x (hidden_dim + input_dim)``
with columns ordered ``[h_prev, x]``. Layer 1 has ``input_dim = 1``; layer
``k > 1`` takes the hidden stream of layer ``k - 1`` (``input_dim = hidden_dim``).
The prediction is ``readout_w . h_final + readout_b`` on the top layer.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError
from .kernel import as_vector, hadamard, matvec, sigmoid, tanh_ew

GATES = ("f", "i", "c", "o")
FIELD_ORDER = ("w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o")


@dataclass(frozen=True)
class LstmDims:
    hidden_dim: int = 8
    num_layers: int = 1
    input_dim: int = 1

    def __post_init__(self):
        if self.hidden_dim < 1 or self.num_layers < 1 or self.input_dim < 1:
            raise DimensionError(f"invalid LSTM dimensions {self}")

    def layer_input_dim(self, k):
        return self.input_dim if k == 0 else self.hidden_dim


@dataclass
class CellWeights:
    w_f: np.ndarray
    w_i: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        shape = self.w_f.shape
        if len(shape) != 2 or shape[1] <= shape[0]:
            raise DimensionError(f"bad gate matrix shape {shape}")
        for name in FIELD_ORDER[1:4]:
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in FIELD_ORDER[4:]:
            if getattr(self, name).shape != (shape[0],):
                raise DimensionError(f"{name} must have length {shape[0]}")

    @property
    def hidden_dim(self):
        return self.w_f.shape[0]

    @property
    def input_dim(self):
        return self.w_f.shape[1] - self.w_f.shape[0]

    def stacked(self):
        """Gate matrices stacked as one ``(4H, H + D)`` matrix plus bias ``(4H,)``."""
        w = np.vstack([self.w_f, self.w_i, self.w_c, self.w_o])
        b = np.concatenate([self.b_f, self.b_i, self.b_c, self.b_o])
        return w, b

    def arrays(self):
        return [getattr(self, name) for name in FIELD_ORDER]


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim):
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


@dataclass
class LstmParams:
    """All trainable parameters. Also used as the container for gradients."""

    layers: list
    readout_w: np.ndarray
    readout_b: float = 0.0
    dims: LstmDims = field(default=None)

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("an LSTM needs at least one layer")
        H = self.layers[0].hidden_dim
        if self.dims is None:
            self.dims = LstmDims(H, len(self.layers), self.layers[0].input_dim)
        for k, layer in enumerate(self.layers):
            if layer.hidden_dim != H or layer.input_dim != self.dims.layer_input_dim(k):
                raise DimensionError(f"layer {k} dimensions do not chain")
        if self.readout_w.shape != (H,):
            raise DimensionError(f"readout_w must have length {H}")
        self.readout_b = float(self.readout_b)

    def to_flat(self):
        parts = [a.ravel() for layer in self.layers for a in layer.arrays()]
        parts.append(self.readout_w)
        parts.append(np.array([self.readout_b]))
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, dims, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (_param_count(dims),):
            raise DimensionError(f"flat vector has shape {flat.shape}, expected ({_param_count(dims)},)")
        H = dims.hidden_dim
        pos = 0
        layers = []
        for k in range(dims.num_layers):
            cols = H + dims.layer_input_dim(k)
            arrays = {}
            for name in FIELD_ORDER:
                n = H * cols if name.startswith("w") else H
                chunk = flat[pos:pos + n]
                arrays[name] = chunk.reshape(H, cols).copy() if name.startswith("w") else chunk.copy()
                pos += n
            layers.append(CellWeights(**arrays))
        readout_w = flat[pos:pos + H].copy()
        readout_b = float(flat[pos + H])
        return cls(layers, readout_w, readout_b, dims)

    def copy(self):
        return LstmParams.from_flat(self.dims, self.to_flat())

    @property
    def size(self):
        return self.to_flat().size

    def to_dict(self):
        return {
            "format": "rtforecast-lstm-v1",
            "dims": {
                "hidden_dim": self.dims.hidden_dim,
                "num_layers": self.dims.num_layers,
                "input_dim": self.dims.input_dim,
            },
            "field_order": list(FIELD_ORDER) + ["readout_w", "readout_b"],
            "layers": [
                {name: getattr(layer, name).tolist() for name in FIELD_ORDER}
                for layer in self.layers
            ],
            "readout_w": self.readout_w.tolist(),
            "readout_b": self.readout_b,
        }

    @classmethod
    def from_dict(cls, data):
        dims = LstmDims(**data["dims"])
        layers = [
            CellWeights(**{name: np.array(layer[name], dtype=np.float64) for name in FIELD_ORDER})
            for layer in data["layers"]
        ]
        return cls(layers, np.array(data["readout_w"], dtype=np.float64), data["readout_b"], dims)

    def to_json(self):
        return json.dumps(self.to_dict())


def init_zero(dims):
    return LstmParams.from_flat(dims, np.zeros(_param_count(dims)))


def init_seeded(dims, rng, scale=0.1):
    """Parameters drawn uniformly from ``[-scale, scale]`` in flat order."""
    n = _param_count(dims)
    if scale == 0:
        return init_zero(dims)
    return LstmParams.from_flat(dims, rng.uniform(-scale, scale, size=n))


def _param_count(dims):
    H = dims.hidden_dim
    n = 0
    for k in range(dims.num_layers):
        n += 4 * H * (H + dims.layer_input_dim(k)) + 4 * H
    return n + H + 1


def cell_step(w, prev, x):
    """One application of the gate equations; returns the new ``CellState``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (w.input_dim,) or prev.h.shape != (w.hidden_dim,) or prev.c.shape != prev.h.shape:
        raise DimensionError("cell_step input dimensions do not match the weights")
    z = np.concatenate([prev.h, x])
    f = sigmoid(matvec(w.w_f, z) + w.b_f)
    i = sigmoid(matvec(w.w_i, z) + w.b_i)
    c_tilde = tanh_ew(matvec(w.w_c, z) + w.b_c)
    c = hadamard(f, prev.c) + hadamard(i, c_tilde)
    o = sigmoid(matvec(w.w_o, z) + w.b_o)
    h = hadamard(o, tanh_ew(c))
    return CellState(h, c)


@dataclass
class LayerTrace:
    """Activations of one layer over the sequence, kept for backpropagation."""

    inputs: np.ndarray   # (S, D)
    gates: np.ndarray    # (S, 4H) activated [f, i, c_tilde, o]
    c: np.ndarray        # (S + 1, H), row 0 is the initial cell state
    tanh_c: np.ndarray   # (S, H)
    h: np.ndarray        # (S + 1, H), row 0 is the initial hidden state
    w: np.ndarray        # stacked gate matrix (4H, H + D)


def _run_layer(layer, inputs):
    H = layer.hidden_dim
    w, b = layer.stacked()
    w_h = w[:, :H]
    pre_x = inputs @ w[:, H:].T + b
    S = inputs.shape[0]
    gates = np.empty((S, 4 * H))
    c = np.zeros((S + 1, H))
    h = np.zeros((S + 1, H))
    tanh_c = np.empty((S, H))
    for s in range(S):
        a = pre_x[s] + w_h @ h[s]
        g = sigmoid(a)
        g[2 * H:3 * H] = tanh_ew(a[2 * H:3 * H])
        gates[s] = g
        c[s + 1] = g[:H] * c[s] + g[H:2 * H] * g[2 * H:3 * H]
        tanh_c[s] = tanh_ew(c[s + 1])
        h[s + 1] = g[3 * H:] * tanh_c[s]
    return LayerTrace(inputs, gates, c, tanh_c, h, w)


def forward_trace(params, window):
    """Forward pass that also returns per-layer traces for BPTT."""
    x = np.asarray(window, dtype=np.float64).reshape(-1)
    if x.size < 1:
        raise DimensionError("window must contain at least one value")
    inputs = x.reshape(-1, params.dims.input_dim)
    traces = []
    for layer in params.layers:
        trace = _run_layer(layer, inputs)
        traces.append(trace)
        inputs = trace.h[1:]
    pred = float(params.readout_w @ traces[-1].h[-1] + params.readout_b)
    if not np.isfinite(pred):
        raise DivergenceError("forward pass produced a non-finite prediction")
    return pred, traces


def forward(params, window):
    """Scalar prediction for one window, with zero initial states."""
    return forward_trace(params, window)[0]


def forward_reference(params, window):
    """Slow path built from ``cell_step``; used to cross-check ``forward``."""
    xs = [np.array([v]) for v in as_vector(window, "window")]
    for layer in params.layers:
        state = CellState.zeros(layer.hidden_dim)
        out = []
        for x in xs:
            state = cell_step(layer, state, x)
            out.append(state.h)
        xs = out
    return float(params.readout_w @ xs[-1] + params.readout_b)
