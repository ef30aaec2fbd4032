"""Age-of-Information simulation with particle-filter beliefs and mean-field policies."""

from .belief import AgentState, BeliefSummary, DelayEstimate, ParticleFilter, estimate_lambda2, quantize
from .channel import Ack, ChannelState, Message
from .core import ConfigError, EventQueue, RngStreams, SimConfig, Stream, build_config, load_config, sample_exp
from .experiments import export, filter_trace, monte_carlo, read_csv, render, sweep
from .policy import (
    AlwaysSend,
    ConstantRate,
    DecisionRule,
    ObsModel,
    PolicyFormatError,
    ScriptedPolicy,
    Threshold,
    UpperPolicy,
    Variant,
    load_policy,
    save_policy,
)
from .receiver import ReceiverState
from .simulation import EpisodeMetrics, Simulation, run_episode
from .trainer import TrainConfig, TrainingError, train_cem, train_policy

__version__ = "0.1.0"
