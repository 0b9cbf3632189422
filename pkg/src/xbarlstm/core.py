"""Floating-point reference LSTM: cell step, dense output, sequence forward.

This is the exact double-precision path the crossbar model is checked
against. Everything here is a pure function of immutable inputs; the
crossbar and training modules own quantization and parameter updates.

Gate axis order is (input, forget, cell, output) everywhere, matching the
left-to-right column packing of the concatenated [*, 4M] weight matrices.
"""

from dataclasses import dataclass, field

import numpy as np

GATES = ("i", "f", "c", "o")
GATE_I, GATE_F, GATE_C, GATE_O = range(4)


@dataclass(frozen=True)
class Dims:
    """Model dimensions: n_inputs per step, n_hidden LSTM units."""

    n_inputs: int
    n_hidden: int

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ValueError(f"n_inputs must be >= 1, got {self.n_inputs}")
        if self.n_hidden < 1:
            raise ValueError(f"n_hidden must be >= 1, got {self.n_hidden}")


@dataclass
class LstmParams:
    """Gate weights of one LSTM layer, stacked on a leading gate axis.

    W: [4, n_inputs, n_hidden] input weights, U: [4, n_hidden, n_hidden]
    recurrent weights, b: [4, n_hidden] biases; gate order (i, f, c, o).
    Per-gate views are exposed as W_i ... b_o.
    """

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        n, m = self.dims.n_inputs, self.dims.n_hidden
        if self.W.shape != (4, n, m):
            raise ValueError(f"W must be [4, n_inputs, n_hidden], got {self.W.shape}")
        if self.U.shape != (4, m, m):
            raise ValueError(f"U must be [4, n_hidden, n_hidden], got {self.U.shape}")
        if self.b.shape != (4, m):
            raise ValueError(f"b must be [4, n_hidden], got {self.b.shape}")

    @property
    def dims(self) -> Dims:
        return Dims(self.W.shape[1], self.W.shape[2])

    @classmethod
    def zeros(cls, dims: Dims) -> "LstmParams":
        n, m = dims.n_inputs, dims.n_hidden
        return cls(np.zeros((4, n, m)), np.zeros((4, m, m)), np.zeros((4, m)))

    def copy(self) -> "LstmParams":
        return LstmParams(self.W.copy(), self.U.copy(), self.b.copy())

    # per-gate views (read/write, no copies)
    @property
    def W_i(self):
        return self.W[GATE_I]

    @property
    def W_f(self):
        return self.W[GATE_F]

    @property
    def W_c(self):
        return self.W[GATE_C]

    @property
    def W_o(self):
        return self.W[GATE_O]

    @property
    def U_i(self):
        return self.U[GATE_I]

    @property
    def U_f(self):
        return self.U[GATE_F]

    @property
    def U_c(self):
        return self.U[GATE_C]

    @property
    def U_o(self):
        return self.U[GATE_O]

    @property
    def b_i(self):
        return self.b[GATE_I]

    @property
    def b_f(self):
        return self.b[GATE_F]

    @property
    def b_c(self):
        return self.b[GATE_C]

    @property
    def b_o(self):
        return self.b[GATE_O]


@dataclass
class LstmState:
    """Hidden output h and cell state C carried between time steps."""

    h: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        if self.h.shape != self.C.shape or self.h.ndim != 1:
            raise ValueError(f"h and C must be equal-length vectors, got {self.h.shape} and {self.C.shape}")

    @classmethod
    def zeros(cls, dims: Dims) -> "LstmState":
        return cls(np.zeros(dims.n_hidden), np.zeros(dims.n_hidden))

    def copy(self) -> "LstmState":
        return LstmState(self.h.copy(), self.C.copy())


@dataclass
class GateActivations:
    """Post-activation gate values of one step: i, f, o in (0,1), c_tilde in (-1,1)."""

    i: np.ndarray
    f: np.ndarray
    c_tilde: np.ndarray
    o: np.ndarray


@dataclass
class OutputLayer:
    """Affine readout with no activation: prediction = w_out . h + b_out."""

    w_out: np.ndarray
    b_out: float

    def __post_init__(self):
        self.w_out = np.asarray(self.w_out, dtype=np.float64)
        self.b_out = float(self.b_out)
        if self.w_out.ndim != 1:
            raise ValueError(f"w_out must be a vector, got shape {self.w_out.shape}")

    @classmethod
    def zeros(cls, dims: Dims) -> "OutputLayer":
        return cls(np.zeros(dims.n_hidden), 0.0)

    def copy(self) -> "OutputLayer":
        return OutputLayer(self.w_out.copy(), self.b_out)


def sigmoid(x):
    """Logistic function, saturates gracefully for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def tanh(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.tanh(x)
    if out.ndim == 0:
        return float(out)
    return out


def lstm_step(params: LstmParams, x_t: np.ndarray, prev: LstmState):
    """One LSTM cell step.

    i = sigma(x W_i + h U_i + b_i), f and o analogous,
    c_tilde = tanh(x W_c + h U_c + b_c),
    C_t = f * C_prev + i * c_tilde,  h_t = o * tanh(C_t).

    Returns (GateActivations, LstmState); gate internals are exposed so the
    crossbar path can be cross-checked cycle by cycle.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    n, m = params.dims.n_inputs, params.dims.n_hidden
    if x_t.shape != (n,):
        raise ValueError(f"x_t has shape {x_t.shape}, expected ({n},) to match W")
    if prev.h.shape != (m,):
        raise ValueError(f"prev.h has shape {prev.h.shape}, expected ({m},) to match U")

    # [4, m] pre-activations for all gates at once
    a = np.einsum("n,gnm->gm", x_t, params.W) + np.einsum("m,gmh->gh", prev.h, params.U) + params.b
    i = sigmoid(a[GATE_I])
    f = sigmoid(a[GATE_F])
    c_tilde = tanh(a[GATE_C])
    o = sigmoid(a[GATE_O])
    C_t = f * prev.C + i * c_tilde
    h_t = o * np.tanh(C_t)
    return GateActivations(i, f, c_tilde, o), LstmState(h_t, C_t)


def dense_output(h: np.ndarray, out: OutputLayer) -> float:
    """Affine readout w_out . h + b_out, no nonlinearity."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != out.w_out.shape:
        raise ValueError(f"h has shape {h.shape}, expected {out.w_out.shape} to match w_out")
    return float(h @ out.w_out + out.b_out)


def forward_sequence(params: LstmParams, out: OutputLayer, inputs, initial: LstmState | None = None):
    """Run the cell over a sequence, reading out a prediction after every step.

    Returns (predictions, final_state). With no initial state the run starts
    from h = 0, C = 0, so the first step's cell state is i * c_tilde.
    """
    state = LstmState.zeros(params.dims) if initial is None else initial.copy()
    predictions = []
    for x_t in inputs:
        _, state = lstm_step(params, np.atleast_1d(np.asarray(x_t, dtype=np.float64)), state)
        predictions.append(dense_output(state.h, out))
    return predictions, state
