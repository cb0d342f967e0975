"""Discriminator-constrained optimal-transport domain adaptation for
regression, with a synthetic spectral-enhancement benchmark.

The package is organized as:

- ``ot``: discrete optimal transport (exact solver and entropic solver)
- ``nets``: hand-rolled feedforward networks with reverse-mode gradients
- ``adaptation``: the joint cost and the four training losses
- ``training``: the alternating adaptation loop and baselines
- ``datagen``: synthetic corpus (clean signals, noise families, features)
- ``metrics``: MSE / SI-SDR / LSD and per-cell evaluation reports
- ``experiment`` / ``cli``: config-driven experiment pipeline
"""

from .adaptation import BatchPair, JointCostParams, joint_cost, loss_critic, \
    loss_generator, loss_l1, loss_l2, wgan_value
from .datagen import CleanSignal, Corpus, CorpusConfig, MixedUtterance, \
    NoiseSpec, build_corpus, inverse_spectral_frames, load_corpus, make_clean, \
    make_noise, mix_at_snr, save_corpus, spectral_frames, stack_context
from .errors import ConfigError, CouplingError, DataError, MarginalError, \
    ShapeError, SinkhornConvergenceWarning, StateError
from .metrics import EvalReport, evaluate, log_spectral_distance, si_sdr
from .nets import AdamState, Layer, Network, clip_parameters
from .ot import CostMatrix, Coupling, Histogram, frobenius_cost, \
    solve_ot_exact, solve_sinkhorn
from .training import TrainLog, TrainRecord, TrainSchedule, train, train_step, \
    train_source_only
from .experiment import ExperimentConfig, emit_plot_data, load_config, \
    run_experiment

__version__ = "0.1.0"
