"""Policy-gradient training loop: episodes, log-return reward, updates.

The policy is deterministic and the per-episode reward is differentiable,
so training ascends the reward directly: roll an episode, rebuild the
forward graph over the stored observations, backpropagate the mean episode
reward and take one Adam step. The memory of stored tuples is cleared after
every update. Model selection tracks the validation-range Sharpe ratio and
the best checkpoint wins.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, backward, dot
from .backtest import (BacktestState, MetricConfig, PolicyStrategy, run_backtest,
                       step)
from .data import MarketFrame, ObservationWindow, SplitSpec, window
from .dc import DcFeatureMap
from .errors import ConfigError, NumericError, RangeError, TrainingError
from .model import MasaatPolicy
from .nn import Adam


@dataclass(frozen=True)
class TrainerConfig:
    max_iterations: int = 200
    episode_len: int = 20          # trading days per sampled mini-batch
    window_len: int = 10           # observation period fed to the policy
    learning_rate: float = 1e-3
    update_every: int = 1          # episodes accumulated per policy update
    seed: int = 0
    initial_value: float = 1.0     # C_0 in the reward

    def __post_init__(self):
        if self.max_iterations < 0 or self.episode_len < 1 or self.window_len < 2:
            raise ConfigError("iterations >= 0, episode_len >= 1, window_len >= 2")
        if self.learning_rate < 0 or self.update_every < 1 or self.initial_value <= 0:
            raise ConfigError("learning_rate >= 0, update_every >= 1, initial_value > 0")


@dataclass(frozen=True)
class MemoryTuple:
    """One day of experience: action, reward and what the policy saw."""

    weights: np.ndarray
    gross_return: float
    net_return: float
    observation: ObservationWindow
    dc_maps: list[DcFeatureMap]
    relative_closes: np.ndarray


@dataclass(frozen=True)
class EpisodeLog:
    start_day: int
    tuples: tuple[MemoryTuple, ...]

    def __len__(self) -> int:
        return len(self.tuples)


@dataclass(frozen=True)
class UpdateRecord:
    iteration: int
    start_day: int
    reward_before: float
    validation_sharpe: float | None
    checkpoint_id: str


@dataclass
class TrainResult:
    policy: MasaatPolicy
    log: list[UpdateRecord] = field(default_factory=list)
    best_validation_sharpe: float | None = None


def episode_reward(gross_returns, initial_value: float = 1.0) -> float:
    """Mean log growth (1/T) * log(C_0 * prod rho_t) over one episode."""
    rho = np.asarray(gross_returns, dtype=np.float64)
    if len(rho) == 0:
        raise ConfigError("episode reward needs at least one return")
    if initial_value <= 0:
        raise NumericError("initial portfolio value must be positive")
    if np.any(rho <= 0):
        raise NumericError("gross returns must be positive")
    return (math.log(initial_value) + float(np.log(rho).sum())) / len(rho)


def run_episode(frame: MarketFrame, policy: MasaatPolicy, start_day: int,
                cfg: TrainerConfig) -> EpisodeLog:
    """Roll the policy forward for ``episode_len`` consecutive days.

    Day t's weights come from the window ending at t - 1 and earn the day's
    relative closes; no transaction costs are charged during training.
    """
    last = start_day + cfg.episode_len - 1
    if start_day < cfg.window_len or last >= frame.n_days:
        raise RangeError(
            f"episode days {start_day}..{last} need {cfg.window_len} days of "
            f"history and must end inside the frame (0..{frame.n_days - 1})")
    state = BacktestState()
    tuples: list[MemoryTuple] = []
    for t in range(start_day, last + 1):
        obs = window(frame, t - 1, cfg.window_len)
        weights = policy.portfolio(obs)
        x = frame.relative_closes(t)
        state, record = step(state, weights, x)
        tuples.append(MemoryTuple(
            weights=weights,
            gross_return=record.gross,
            net_return=record.net,
            observation=obs,
            dc_maps=policy.dc_maps(obs),
            relative_closes=x,
        ))
    return EpisodeLog(start_day=start_day, tuples=tuple(tuples))


def _mean_reward_tensor(policy: MasaatPolicy, episodes: list[EpisodeLog],
                        initial_value: float) -> Tensor:
    """Differentiable mean episode reward rebuilt from stored observations."""
    total = None
    for episode in episodes:
        log_sum = None
        for mt in episode.tuples:
            w = policy.portfolio_tensor(mt.observation)
            growth = dot(w, Tensor(mt.relative_closes)).log()
            log_sum = growth if log_sum is None else log_sum + growth
        reward = (log_sum + math.log(initial_value)) * (1.0 / len(episode))
        total = reward if total is None else total + reward
    return total * (1.0 / len(episodes))


def update_policy(policy: MasaatPolicy, episodes: list[EpisodeLog],
                  optimizer: Adam,
                  initial_value: float = 1.0) -> tuple[float, float]:
    """One gradient-ascent step on the mean episode reward.

    Returns the reward before and after the step, both evaluated on the
    same stored episodes.
    """
    if not episodes:
        raise ConfigError("update_policy needs at least one episode")
    policy.zero_grad()
    reward = _mean_reward_tensor(policy, episodes, initial_value)
    loss = -reward
    backward(loss)
    for name, p in policy.params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in parameter {name}")
    reward_before = reward.item()
    optimizer.step()
    policy.zero_grad()
    reward_after = _mean_reward_tensor(policy, episodes, initial_value).item()
    return reward_before, reward_after


def _validation_sharpe(frame: MarketFrame, policy: MasaatPolicy,
                       span: tuple[int, int], metrics: MetricConfig) -> float | None:
    report = run_backtest(frame, PolicyStrategy(policy), span, metrics)
    return report.sharpe


def train(frame: MarketFrame, splits: SplitSpec, policy: MasaatPolicy,
          cfg: TrainerConfig,
          metrics: MetricConfig = MetricConfig()) -> TrainResult:
    """Full training run; the returned policy is the best validation checkpoint.

    Episode start days are sampled uniformly from the train split (leaving
    room for the observation window and the episode itself), the policy is
    updated every ``update_every`` episodes and scored on the validation
    split after each update. Everything is driven by one seeded generator,
    so identical inputs give bit-identical results.
    """
    if cfg.window_len != policy.window_len:
        raise ConfigError(f"trainer window_len {cfg.window_len} != "
                          f"policy window_len {policy.window_len}")
    train_start, train_stop = splits.indices(frame, "train")
    val_span = splits.indices(frame, "validation")
    lo = max(train_start, cfg.window_len)
    hi = train_stop - cfg.episode_len + 1
    if hi < lo:
        raise RangeError("train split too short for the window and episode length")

    rng = np.random.default_rng(cfg.seed)
    optimizer = policy.make_optimizer(cfg.learning_rate)
    result = TrainResult(policy=policy)
    best_snapshot = policy.snapshot()
    best_sharpe = -math.inf

    memory: list[EpisodeLog] = []
    for iteration in range(1, cfg.max_iterations + 1):
        start_day = int(rng.integers(lo, hi + 1))
        memory.append(run_episode(frame, policy, start_day, cfg))
        if len(memory) < cfg.update_every:
            continue
        reward_before, _ = update_policy(policy, memory, optimizer,
                                         cfg.initial_value)
        memory = []  # reset the stored tuples after every update
        sharpe = _validation_sharpe(frame, policy, val_span, metrics)
        result.log.append(UpdateRecord(
            iteration=iteration,
            start_day=start_day,
            reward_before=reward_before,
            validation_sharpe=sharpe,
            checkpoint_id=policy.param_digest(),
        ))
        score = -math.inf if sharpe is None else sharpe
        if score > best_sharpe:
            best_sharpe = score
            best_snapshot = policy.snapshot()

    policy.restore(best_snapshot)
    result.best_validation_sharpe = None if best_sharpe == -math.inf else best_sharpe
    return result


def write_training_log(records: list[UpdateRecord], path: str | Path) -> None:
    """Training log CSV: iteration,t_s,J_train,SR_validation,checkpoint_id."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "t_s", "J_train", "SR_validation",
                         "checkpoint_id"])
        for r in records:
            writer.writerow([
                r.iteration, r.start_day, repr(r.reward_before),
                "" if r.validation_sharpe is None else repr(r.validation_sharpe),
                r.checkpoint_id,
            ])
