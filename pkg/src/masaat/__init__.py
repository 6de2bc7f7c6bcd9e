"""Multi-agent attention-based portfolio optimisation on directional-change features."""

from .autodiff import Tensor, backward, concat, dot, gelu, softmax
from .backtest import (BacktestReport, BacktestState, MetricConfig,
                       PolicyStrategy, ReturnsRecord, annualised_return,
                       max_drawdown, run_backtest, sharpe_ratio, step)
from .baselines import (CRP, EG, PAMR, eg_update, make_baseline, pamr_update,
                        project_simplex, uniform_weights)
from .data import (AssetSeries, MarketFrame, ObservationWindow, SplitSpec,
                   align, load_csv, load_directory, synthesize, window,
                   write_csv)
from .dc import (DcEvent, DcFeatureMap, dc_feature_map, dc_transform,
                 detect_events, event_rows, high_order_signal, time_mask)
from .errors import (AccountingError, AlignmentError, ConfigError,
                     IngestionError, MasaatError, NumericError, RangeError,
                     TrainingError, ZeroVolatilityError)
from .model import (AgentSpec, MasaatPolicy, build_agents, csa_forward,
                    ensemble, fuse, load_checkpoint, save_checkpoint,
                    ta_embedding, ta_forward, tokenize_csa, tokenize_ta,
                    untokenize_csa, untokenize_ta)
from .nn import (Adam, EncoderConfig, encoder_forward, init_encoder_params,
                 init_mlp_params, layer_norm, linear, multi_head_attention,
                 two_layer_mlp, uniform_param)
from .training import (EpisodeLog, MemoryTuple, TrainerConfig, TrainResult,
                       UpdateRecord, episode_reward, run_episode, train,
                       update_policy, write_training_log)

__version__ = "0.1.0"
