"""Differentiable spiking neural networks for predictive control."""

from .tensor import Tensor, concat, maximum, minimum, no_grad, \
    set_default_dtype
from .surrogates import SurrogateConfig, spike, surrogate_grad
from .neurons import ALIFCell, LayerState, LIFCell, NeuronParams, \
    ReadoutCell, alif_step, lif_step, readout_step, reparam_tau
from .connections import DenseConnection, LowRankConnection, \
    connection_apply, encode_input, fluctuation_weight_std
from .network import Network, NetworkConfig
from .optim import Adam, AdamState, LrSchedule, adam_step
from .arm import ArmState, EpisodeConfig, Task, eval_tasks, \
    forward_kinematics
from .buffer import Episode, ReplayBuffer
from .losses import RegConfig, action_reg, activity_reg, policy_loss, \
    prediction_loss
from .training import TrainConfig, collect_episodes, evaluate, \
    train_policy, train_prediction, training_iteration
from .metrics import AggregateMetrics, EpisodeMetrics, episode_metrics, \
    spike_stats, unrolled_mse, write_csv
from .config import RunConfig, parse_config

__version__ = "0.1.0"
