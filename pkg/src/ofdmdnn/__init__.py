"""OFDM link-level simulator with LS/LMMSE baselines and a trained
neural-network receiver."""

from .channel import (
    ChannelConfig,
    add_awgn,
    circular_convolve,
    frequency_response,
    linear_convolve,
    sample_channel,
    transmit_frame,
)
from .errors import ConfigError, MissingResourceError, NumericError
from .estimators import (
    CorrelationStats,
    PilotPattern,
    equalize_and_detect,
    estimate_correlation_stats,
    interpolate_linear,
    ls_estimate,
    mmse_estimate,
)
from .experiments import (
    BerPoint,
    SweepSpec,
    emit_report,
    evaluate_ber,
    run_robustness_grid,
    run_sweep,
)
from .neuralnet import (
    AdamState,
    LayerSpec,
    MlpParams,
    TrainConfig,
    adam_step,
    backward,
    forward,
    gradient_check,
    init_params,
    loss_l2,
)
from .ofdm import (
    ClipConfig,
    FrameConfig,
    TxFrame,
    add_cp,
    build_frame,
    clip_signal,
    dft,
    idft,
    qpsk_demodulate_hard,
    qpsk_modulate,
    remove_cp,
)
from .receiver import (
    DnnReceiver,
    detect_bits,
    featurize,
    generate_training_stream,
    load_bundle,
    save_bundle,
    train_receiver,
)
from .simulate import ScenarioConfig, simulate_frames

__version__ = "0.1.0"
