"""Spiking feedback-control training of LIF output layers.

Controller neuron pairs steer output neurons toward target firing rates, and
the feedback current they inject drives a local update of the feedforward
weights, either in mini-batches or online.
"""

from .dynamics import (
    ControllerState,
    OutputLayerState,
    SimulationParams,
    WeightSet,
    heaviside,
    reset_states,
    step_controller,
    step_output_layer,
)
from .encoding import (
    LabeledSample,
    SpikeDataset,
    SpikeRaster,
    YinYangClass,
    YinYangPoint,
    encode_yinyang_sample,
    gen_binary_dataset,
    gen_yinyang_dataset,
    gen_yinyang_points,
    poisson_encode,
)
from .errors import (
    ConfigurationError,
    EncodingSaturationError,
    FBSNNError,
    NumericalDivergenceError,
    StructuralError,
)
from .hardware import (
    MismatchSpec,
    PerNeuronParams,
    PopulationSpec,
    aggregate_population_output,
    apply_mismatch,
    expand_population,
)
from .network import Network, simulate
from .training import (
    MetricsRow,
    TrainConfig,
    TrialRecord,
    baseline_linear_readout,
    cross_entropy,
    evaluate,
    local_weight_update,
    readout_rates,
    run_trial,
    target_error,
    train_offline,
    train_online,
)

__version__ = "0.1.0"
