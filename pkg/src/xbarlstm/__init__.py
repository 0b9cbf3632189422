"""LSTM forecasting on a behavioral 16-level memristive crossbar model."""

from .core import (
    Dims,
    GateActivations,
    LstmParams,
    LstmState,
    OutputLayer,
    dense_output,
    forward_sequence,
    lstm_step,
    sigmoid,
    tanh,
)
from .crossbar import (
    CrossbarConfig,
    CrossbarProgram,
    LevelSet,
    build_level_set,
    crossbar_dot,
    crossbar_forward,
    crossbar_lstm_step,
    map_weight_to_pair,
    program_crossbar,
    quantize_weight,
    read_program,
    reconstruct_weights,
    write_program,
)
from .data import (
    Normalizer,
    TimeSeries,
    WindowedSeries,
    denormalize,
    fit_normalizer,
    load_series,
    make_windows,
    normalize,
    rmse,
    split,
)
from .training import (
    GradientSet,
    TrainConfig,
    bptt_gradients,
    finite_difference_check,
    mse_loss,
    train,
)
from .weights_io import read_weights, write_weights

__version__ = "0.1.0"
