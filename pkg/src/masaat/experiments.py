"""Experiment configuration, dataset wiring and the ablation harness.

Configs are TOML (or JSON) documents with fixed sections and a strict
schema: unknown keys anywhere are rejected so typos fail loudly instead of
silently falling back to defaults. ``config_echo`` produces a JSON document
that reloads to the identical configuration, which is what the CLI writes
next to every run for provenance.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from .backtest import MetricConfig, PolicyStrategy, run_backtest
from .baselines import make_baseline
from .data import (DEFAULT_CHANNELS, MarketFrame, SplitSpec, align,
                   load_directory, synthesize)
from .errors import ConfigError
from .model import MasaatPolicy, build_agents
from .nn import EncoderConfig
from .training import TrainerConfig, train

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class SyntheticSpec:
    assets: int
    days: int
    seed: int
    drift: tuple[float, ...]
    volatility: tuple[float, ...]
    start_price: float = 100.0

    def __post_init__(self):
        if self.assets < 2 or self.days < 2:
            raise ConfigError("synthetic data needs assets >= 2 and days >= 2")
        if len(self.drift) != self.assets or len(self.volatility) != self.assets:
            raise ConfigError("drift and volatility must list one value per asset")


@dataclass(frozen=True)
class DataSpec:
    source: str  # "csv" | "synthetic"
    csv_dir: str | None = None
    synthetic: SyntheticSpec | None = None

    def __post_init__(self):
        if self.source == "csv":
            if not self.csv_dir:
                raise ConfigError("data.source = 'csv' requires data.csv_dir")
        elif self.source == "synthetic":
            if self.synthetic is None:
                raise ConfigError("data.source = 'synthetic' requires [data.synthetic]")
        else:
            raise ConfigError(f"unknown data source {self.source!r}")


@dataclass(frozen=True)
class ModelSpec:
    window_len: int = 10
    embed_dim: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    ffn_hidden: int | None = None
    layernorm_epsilon: float = 1e-5
    dc_thresholds: tuple[float, ...] = (0.005, 0.01, 0.02)
    include_raw_price_agent: bool = True
    scale_factor: float | None = None  # None -> 1/sqrt(embed_dim)

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            embed_dim=self.embed_dim,
            num_heads=self.encoder_heads,
            num_layers=self.encoder_layers,
            ffn_hidden=self.ffn_hidden,
            layernorm_epsilon=self.layernorm_epsilon,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSpec
    model: ModelSpec
    trainer: TrainerConfig
    metrics: MetricConfig
    splits: SplitSpec | None = None  # None -> proportional 10:3:3


# ----------------------------------------------------------------------
# strict parsing


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def _floats(value: Any, n: int, where: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * n
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    raise ConfigError(f"{where} must be a number or a list of numbers")


def _parse_date(value: Any, where: str) -> date:
    if isinstance(value, date) and not isinstance(value, datetime):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{where}: bad date {value!r}") from None


def _parse_synthetic(section: dict) -> SyntheticSpec:
    _check_keys(section, {"assets", "days", "seed", "drift", "volatility",
                          "start_price"}, "data.synthetic")
    assets = int(section.get("assets", 0))
    return SyntheticSpec(
        assets=assets,
        days=int(section.get("days", 0)),
        seed=int(section.get("seed", 0)),
        drift=_floats(section.get("drift", 0.0), assets, "data.synthetic.drift"),
        volatility=_floats(section.get("volatility", 0.0), assets,
                           "data.synthetic.volatility"),
        start_price=float(section.get("start_price", 100.0)),
    )


def _parse_data(section: dict) -> DataSpec:
    _check_keys(section, {"source", "csv_dir", "synthetic"}, "data")
    synthetic = section.get("synthetic")
    return DataSpec(
        source=section.get("source", ""),
        csv_dir=section.get("csv_dir"),
        synthetic=_parse_synthetic(synthetic) if synthetic is not None else None,
    )


def _parse_model(section: dict) -> ModelSpec:
    _check_keys(section, {"window_len", "embed_dim", "encoder_layers",
                          "encoder_heads", "ffn_hidden", "layernorm_epsilon",
                          "dc_thresholds", "include_raw_price_agent",
                          "scale_factor"}, "model")
    defaults = ModelSpec()
    thresholds = section.get("dc_thresholds", list(defaults.dc_thresholds))
    if not isinstance(thresholds, (list, tuple)):
        raise ConfigError("model.dc_thresholds must be a list")
    scale = section.get("scale_factor")
    ffn = section.get("ffn_hidden")
    return ModelSpec(
        window_len=int(section.get("window_len", defaults.window_len)),
        embed_dim=int(section.get("embed_dim", defaults.embed_dim)),
        encoder_layers=int(section.get("encoder_layers", defaults.encoder_layers)),
        encoder_heads=int(section.get("encoder_heads", defaults.encoder_heads)),
        ffn_hidden=None if ffn is None else int(ffn),
        layernorm_epsilon=float(section.get("layernorm_epsilon",
                                            defaults.layernorm_epsilon)),
        dc_thresholds=tuple(float(t) for t in thresholds),
        include_raw_price_agent=bool(section.get("include_raw_price_agent", True)),
        scale_factor=None if scale is None else float(scale),
    )


def _parse_trainer(section: dict) -> TrainerConfig:
    _check_keys(section, {"max_iterations", "episode_len", "learning_rate",
                          "update_every", "seed", "initial_value"}, "trainer")
    defaults = TrainerConfig()
    return TrainerConfig(
        max_iterations=int(section.get("max_iterations", defaults.max_iterations)),
        episode_len=int(section.get("episode_len", defaults.episode_len)),
        window_len=2,  # replaced below; the model owns the window length
        learning_rate=float(section.get("learning_rate", defaults.learning_rate)),
        update_every=int(section.get("update_every", defaults.update_every)),
        seed=int(section.get("seed", defaults.seed)),
        initial_value=float(section.get("initial_value", defaults.initial_value)),
    )


def _parse_metrics(section: dict) -> MetricConfig:
    _check_keys(section, {"trading_days_per_year", "risk_free_rate",
                          "transaction_cost"}, "metrics")
    defaults = MetricConfig()
    return MetricConfig(
        trading_days_per_year=int(section.get("trading_days_per_year",
                                              defaults.trading_days_per_year)),
        risk_free_rate=float(section.get("risk_free_rate",
                                         defaults.risk_free_rate)),
        transaction_cost=float(section.get("transaction_cost",
                                           defaults.transaction_cost)),
    )


def _parse_splits(section: dict) -> SplitSpec:
    _check_keys(section, {"train", "validation", "test"}, "splits")
    spans = {}
    for part in ("train", "validation", "test"):
        if part not in section:
            raise ConfigError(f"splits section must define {part}")
        pair = section[part]
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"splits.{part} must be [start, end]")
        spans[part] = (_parse_date(pair[0], f"splits.{part}"),
                       _parse_date(pair[1], f"splits.{part}"))
    return SplitSpec(**spans)


def parse_config(doc: dict) -> ExperimentConfig:
    _check_keys(doc, {"data", "model", "trainer", "metrics", "splits"}, "config")
    if "data" not in doc:
        raise ConfigError("config must have a [data] section")
    model = _parse_model(doc.get("model", {}))
    trainer = _parse_trainer(doc.get("trainer", {}))
    trainer = replace(trainer, window_len=model.window_len)
    return ExperimentConfig(
        data=_parse_data(doc["data"]),
        model=model,
        trainer=trainer,
        metrics=_parse_metrics(doc.get("metrics", {})),
        splits=_parse_splits(doc["splits"]) if "splits" in doc else None,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(path.read_text(encoding="utf-8"))
        else:
            with path.open("rb") as fh:
                doc = tomllib.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path.name}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path.name}: config root must be a table")
    return parse_config(doc)


def config_echo(cfg: ExperimentConfig) -> dict:
    """JSON-ready document that ``parse_config`` loads back identically."""
    doc: dict[str, Any] = {
        "data": {"source": cfg.data.source},
        "model": {
            "window_len": cfg.model.window_len,
            "embed_dim": cfg.model.embed_dim,
            "encoder_layers": cfg.model.encoder_layers,
            "encoder_heads": cfg.model.encoder_heads,
            "layernorm_epsilon": cfg.model.layernorm_epsilon,
            "dc_thresholds": list(cfg.model.dc_thresholds),
            "include_raw_price_agent": cfg.model.include_raw_price_agent,
        },
        "trainer": {
            "max_iterations": cfg.trainer.max_iterations,
            "episode_len": cfg.trainer.episode_len,
            "learning_rate": cfg.trainer.learning_rate,
            "update_every": cfg.trainer.update_every,
            "seed": cfg.trainer.seed,
            "initial_value": cfg.trainer.initial_value,
        },
        "metrics": {
            "trading_days_per_year": cfg.metrics.trading_days_per_year,
            "risk_free_rate": cfg.metrics.risk_free_rate,
            "transaction_cost": cfg.metrics.transaction_cost,
        },
    }
    if cfg.model.ffn_hidden is not None:
        doc["model"]["ffn_hidden"] = cfg.model.ffn_hidden
    if cfg.model.scale_factor is not None:
        doc["model"]["scale_factor"] = cfg.model.scale_factor
    if cfg.data.csv_dir is not None:
        doc["data"]["csv_dir"] = cfg.data.csv_dir
    if cfg.data.synthetic is not None:
        doc["data"]["synthetic"] = {
            "assets": cfg.data.synthetic.assets,
            "days": cfg.data.synthetic.days,
            "seed": cfg.data.synthetic.seed,
            "drift": list(cfg.data.synthetic.drift),
            "volatility": list(cfg.data.synthetic.volatility),
            "start_price": cfg.data.synthetic.start_price,
        }
    if cfg.splits is not None:
        doc["splits"] = {
            part: [d.isoformat() for d in getattr(cfg.splits, part)]
            for part in ("train", "validation", "test")
        }
    return doc


# ----------------------------------------------------------------------
# wiring


def build_frame(cfg: ExperimentConfig) -> MarketFrame:
    if cfg.data.source == "synthetic":
        spec = cfg.data.synthetic
        return synthesize(spec.drift, spec.volatility, spec.days, spec.seed,
                          start_price=spec.start_price)
    assets = load_directory(cfg.data.csv_dir)
    return align(assets, min_days=2 * cfg.model.window_len,
                 channels=DEFAULT_CHANNELS)


def resolve_splits(cfg: ExperimentConfig, frame: MarketFrame) -> SplitSpec:
    return cfg.splits if cfg.splits is not None \
        else SplitSpec.proportional(frame.calendar)


def build_policy(cfg: ExperimentConfig, frame: MarketFrame,
                 seed: int | None = None) -> MasaatPolicy:
    agents = build_agents(list(cfg.model.dc_thresholds),
                          cfg.model.include_raw_price_agent)
    return MasaatPolicy(
        n_assets=frame.n_assets,
        n_channels=len(frame.channels),
        window_len=cfg.model.window_len,
        agents=agents,
        encoder=cfg.model.encoder_config(),
        scale_factor=cfg.model.scale_factor,
        seed=cfg.trainer.seed if seed is None else seed,
    )


def run_id(cfg: ExperimentConfig, when: datetime | None = None) -> str:
    """Timestamp plus a short hash of the effective config."""
    when = when or datetime.now(timezone.utc)
    digest = hashlib.sha256(
        json.dumps(config_echo(cfg), sort_keys=True).encode()).hexdigest()[:8]
    return f"{when.strftime('%Y%m%d-%H%M%S')}-{digest}"


# ----------------------------------------------------------------------
# ablation harness


ABLATION_COLUMNS = ("variant", "n_agents", "ar_pct", "mdd_pct", "sharpe")


def extend_thresholds(thresholds: Sequence[float], count: int) -> tuple[float, ...]:
    """Grow a threshold ladder by doubling the largest until ``count`` exist."""
    ladder = sorted(float(t) for t in thresholds)
    if not ladder:
        ladder = [0.005]
    while len(ladder) < count:
        ladder.append(min(ladder[-1] * 2.0, 0.99))
    return tuple(ladder[:count])


def ablation_variants(model: ModelSpec) -> dict[str, ModelSpec]:
    """Model variants mirroring the agent-composition study."""
    ladder = extend_thresholds(model.dc_thresholds, 5)
    return {
        "full": model,
        "no_raw_price": replace(model, include_raw_price_agent=False,
                                dc_thresholds=extend_thresholds(model.dc_thresholds, 3)),
        "no_dc": replace(model, dc_thresholds=(), include_raw_price_agent=True),
        "dc_agents_1": replace(model, dc_thresholds=ladder[:1]),
        "dc_agents_3": replace(model, dc_thresholds=ladder[:3]),
        "dc_agents_5": replace(model, dc_thresholds=ladder[:5]),
    }


def run_ablation(cfg: ExperimentConfig, out_csv: str | Path | None = None) -> list[dict]:
    """Train and test every ablation variant; one comparison row per variant."""
    frame = build_frame(cfg)
    splits = resolve_splits(cfg, frame)
    test_span = splits.indices(frame, "test")
    rows = []
    for name, model in ablation_variants(cfg.model).items():
        variant_cfg = replace(cfg, model=model,
                              trainer=replace(cfg.trainer,
                                              window_len=model.window_len))
        policy = build_policy(variant_cfg, frame)
        train(frame, splits, policy, variant_cfg.trainer, variant_cfg.metrics)
        report = run_backtest(frame, PolicyStrategy(policy), test_span,
                              variant_cfg.metrics)
        rows.append({
            "variant": name,
            "n_agents": len(policy.agents),
            "ar_pct": report.ar_pct,
            "mdd_pct": report.mdd_pct,
            "sharpe": report.sharpe,
        })
    if out_csv is not None:
        write_ablation_table(rows, out_csv)
    return rows


def write_ablation_table(rows: list[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(ABLATION_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else row[k])
                             for k in ABLATION_COLUMNS})


__all__ = [
    "ABLATION_COLUMNS", "DataSpec", "ExperimentConfig", "ModelSpec",
    "SyntheticSpec", "ablation_variants", "build_frame", "build_policy",
    "config_echo", "extend_thresholds", "load_config", "parse_config",
    "resolve_splits", "run_ablation", "run_id", "write_ablation_table",
    "make_baseline",
]
