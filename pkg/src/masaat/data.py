"""OHLC ingestion, calendar alignment, observation windows, synthetic series.

All containers are frozen after construction and safe for concurrent reads.
CSV schema (one file per asset, file stem = asset id):

    date,open,high,low,close

with ISO-8601 dates and positive decimal prices.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, ConfigError, IngestionError, RangeError

DEFAULT_CHANNELS: tuple[str, ...] = ("open", "high", "low", "close")
CSV_COLUMNS: tuple[str, ...] = ("date", "open", "high", "low", "close")


@dataclass(frozen=True)
class AssetSeries:
    """Price history of one asset: parallel channel arrays on its own calendar."""

    asset_id: str
    dates: tuple[date, ...]
    channels: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {name: len(v) for name, v in self.channels.items()}
        if len(set(lengths.values())) > 1:
            raise IngestionError(f"{self.asset_id}: channel lengths differ: {lengths}")
        if lengths and next(iter(lengths.values())) != len(self.dates):
            raise IngestionError(f"{self.asset_id}: channel length != number of dates")
        for i in range(1, len(self.dates)):
            if self.dates[i] <= self.dates[i - 1]:
                raise IngestionError(
                    f"{self.asset_id}: dates not strictly increasing at row {i + 1}")
        for name, values in self.channels.items():
            if np.any(values <= 0) or not np.all(np.isfinite(values)):
                bad = int(np.argmax((values <= 0) | ~np.isfinite(values)))
                raise IngestionError(
                    f"{self.asset_id}: non-positive or non-finite {name} at row {bad + 1}")

    def __len__(self) -> int:
        return len(self.dates)

    def restrict(self, calendar: Sequence[date]) -> "AssetSeries":
        index = {d: i for i, d in enumerate(self.dates)}
        picks = np.array([index[d] for d in calendar], dtype=int)
        return AssetSeries(
            asset_id=self.asset_id,
            dates=tuple(calendar),
            channels={k: v[picks].copy() for k, v in self.channels.items()},
        )


@dataclass(frozen=True)
class MarketFrame:
    """Two or more assets on one shared calendar, plus the stacked price tensor."""

    assets: tuple[AssetSeries, ...]
    calendar: tuple[date, ...]
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    prices: np.ndarray = field(init=False, repr=False)  # (N, M, T)

    def __post_init__(self):
        if len(self.assets) < 2:
            raise AlignmentError("a market frame needs at least 2 assets")
        if "close" not in self.channels:
            raise ConfigError("the close channel is required")
        for a in self.assets:
            if a.dates != self.calendar:
                raise AlignmentError(f"{a.asset_id} is not on the shared calendar")
        stacked = np.stack([
            np.stack([a.channels[c] for c in self.channels]) for a in self.assets
        ]).astype(np.float64)
        object.__setattr__(self, "prices", stacked)

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return tuple(a.asset_id for a in self.assets)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    @property
    def close_index(self) -> int:
        return self.channels.index("close")

    def closes(self) -> np.ndarray:
        """(N, T) close prices."""
        return self.prices[:, self.close_index, :]

    def relative_closes(self, t: int) -> np.ndarray:
        """Per-asset gross return close_t / close_{t-1}."""
        if t < 1 or t >= self.n_days:
            raise RangeError(f"day index {t} has no previous close")
        c = self.closes()
        return c[:, t] / c[:, t - 1]

    def locate(self, day: date) -> int:
        """Index of the first calendar day >= ``day``."""
        for i, d in enumerate(self.calendar):
            if d >= day:
                return i
        raise RangeError(f"{day} is after the last calendar day {self.calendar[-1]}")


@dataclass(frozen=True)
class ObservationWindow:
    """Normalised N x M x T_w slice ending at (and including) day ``end_index``.

    Every channel of every asset is divided by that asset's close on the end
    day, so the close channel always finishes at exactly 1.0.
    """

    tensor: np.ndarray
    end_index: int
    channels: tuple[str, ...]

    def __post_init__(self):
        if self.tensor.ndim != 3 or self.tensor.shape[2] < 2:
            raise ConfigError(f"window tensor must be N x M x T_w with T_w >= 2, "
                              f"got {self.tensor.shape}")
        if np.any(self.tensor <= 0) or not np.all(np.isfinite(self.tensor)):
            raise ConfigError("window values must be positive and finite")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.tensor.shape


@dataclass(frozen=True)
class SplitSpec:
    """Chronologically ordered, non-overlapping train/validation/test intervals."""

    train: tuple[date, date]
    validation: tuple[date, date]
    test: tuple[date, date]

    def __post_init__(self):
        spans = [self.train, self.validation, self.test]
        for lo, hi in spans:
            if lo > hi:
                raise ConfigError(f"split interval {lo}..{hi} is reversed")
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo <= hi:
                raise ConfigError("splits must be non-overlapping and chronological")

    @classmethod
    def proportional(cls, calendar: Sequence[date],
                     ratios: tuple[float, float, float] = (10.0, 3.0, 3.0)) -> "SplitSpec":
        """Scale the default 10y/3y/3y scheme onto whatever calendar exists."""
        total = sum(ratios)
        n = len(calendar)
        if n < 3:
            raise ConfigError("calendar too short to split three ways")
        a = max(1, int(round(n * ratios[0] / total)))
        b = max(1, int(round(n * ratios[1] / total)))
        a = min(a, n - 2)
        b = min(b, n - a - 1)
        return cls(
            train=(calendar[0], calendar[a - 1]),
            validation=(calendar[a], calendar[a + b - 1]),
            test=(calendar[a + b], calendar[-1]),
        )

    def indices(self, frame: MarketFrame, part: str) -> tuple[int, int]:
        """Inclusive (start, stop) day indices of one split within a frame."""
        lo, hi = getattr(self, part)
        start = frame.locate(lo)
        stop = start
        for i in range(start, frame.n_days):
            if frame.calendar[i] > hi:
                break
            stop = i
        if frame.calendar[start] > hi:
            raise RangeError(f"split {part} covers no trading days")
        return start, stop


def load_csv(path: str | Path) -> AssetSeries:
    """Parse one asset file, validating schema, ordering and positivity."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path.name}: empty file") from None
        header = [h.strip().lower() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise IngestionError(f"{path.name}: missing column(s) {missing}")
        extra = [c for c in header if c not in CSV_COLUMNS]
        if extra:
            raise IngestionError(f"{path.name}: unexpected column(s) {extra}")
        cols = {c: header.index(c) for c in CSV_COLUMNS}

        dates: list[date] = []
        values: dict[str, list[float]] = {c: [] for c in DEFAULT_CHANNELS}
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path.name}: wrong field count at row {row_no}")
            try:
                day = date.fromisoformat(row[cols["date"]].strip())
            except ValueError:
                raise IngestionError(
                    f"{path.name}: bad date {row[cols['date']]!r} at row {row_no}") from None
            if dates and day <= dates[-1]:
                raise IngestionError(
                    f"{path.name}: dates not strictly increasing at row {row_no}")
            dates.append(day)
            for c in DEFAULT_CHANNELS:
                try:
                    price = float(row[cols[c]])
                except ValueError:
                    raise IngestionError(
                        f"{path.name}: non-numeric {c} at row {row_no}") from None
                if not math.isfinite(price) or price <= 0:
                    raise IngestionError(
                        f"{path.name}: non-positive {c} at row {row_no}")
                values[c].append(price)

    if not dates:
        raise IngestionError(f"{path.name}: no data rows")
    return AssetSeries(
        asset_id=path.stem,
        dates=tuple(dates),
        channels={c: np.array(values[c], dtype=np.float64) for c in DEFAULT_CHANNELS},
    )


def write_csv(series: AssetSeries, path: str | Path) -> None:
    """Write one asset back out in the ingestion schema (round-trips exactly)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, d in enumerate(series.dates):
            writer.writerow([d.isoformat()] + [
                repr(float(series.channels[c][i])) for c in DEFAULT_CHANNELS])


def load_directory(directory: str | Path) -> list[AssetSeries]:
    """Load every ``*.csv`` in a directory, sorted by file name."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise IngestionError(f"no CSV files found under {directory}")
    return [load_csv(p) for p in paths]


def align(assets: Iterable[AssetSeries], min_days: int = 2,
          channels: tuple[str, ...] = DEFAULT_CHANNELS) -> MarketFrame:
    """Intersect all asset calendars and restrict every series to the result.

    Days missing from any asset are dropped rather than imputed. Callers that
    know their window length should pass ``min_days=2 * window_len`` so that
    an unusably short overlap fails here instead of mid-experiment.
    """
    assets = list(assets)
    if len(assets) < 2:
        raise AlignmentError("alignment needs at least 2 assets")
    shared = set(assets[0].dates)
    for a in assets[1:]:
        shared &= set(a.dates)
    if not shared:
        raise AlignmentError("asset calendars have no days in common")
    if len(shared) < min_days:
        raise AlignmentError(
            f"shared calendar has {len(shared)} days, fewer than required {min_days}")
    calendar = tuple(sorted(shared))
    return MarketFrame(
        assets=tuple(a.restrict(calendar) for a in assets),
        calendar=calendar,
        channels=channels,
    )


def window(frame: MarketFrame, t: int, window_len: int) -> ObservationWindow:
    """Observation slice over days t - window_len + 1 .. t, close-normalised."""
    if window_len < 2:
        raise ConfigError("window_len must be >= 2")
    start = t - window_len + 1
    if start < 0 or t >= frame.n_days:
        raise RangeError(
            f"window of {window_len} days ending at {t} exceeds the frame "
            f"(0..{frame.n_days - 1})")
    block = frame.prices[:, :, start:t + 1]
    anchor = frame.prices[:, frame.close_index, t][:, None, None]
    return ObservationWindow(tensor=block / anchor, end_index=t,
                             channels=frame.channels)


def _weekday_calendar(start: date, days: int) -> tuple[date, ...]:
    out: list[date] = []
    d = start
    while len(out) < days:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return tuple(out)


def synthesize(drifts: Sequence[float], vols: Sequence[float], days: int,
               seed: int, asset_ids: Sequence[str] | None = None,
               start_price: float = 100.0,
               start_date: date = date(2000, 1, 3)) -> MarketFrame:
    """Geometric-Brownian closes with derived OHLC, reproducible per seed.

    Daily close ratio is exp(mu + sigma * z); highs and lows are the close
    scaled up/down by half-sigma intraday noise, with the open placed
    between them. Zero volatility collapses every channel onto the close.
    """
    drifts = np.asarray(drifts, dtype=np.float64)
    vols = np.asarray(vols, dtype=np.float64)
    if drifts.shape != vols.shape or drifts.ndim != 1:
        raise ConfigError("drifts and vols must be 1-D sequences of equal length")
    if np.any(vols < 0):
        raise ConfigError("volatility must be non-negative")
    if days < 2:
        raise ConfigError("need at least 2 days")
    n = len(drifts)
    if asset_ids is None:
        asset_ids = [f"A{i:02d}" for i in range(n)]
    if len(asset_ids) != n:
        raise ConfigError("asset_ids length must match drifts")

    rng = np.random.default_rng(seed)
    calendar = _weekday_calendar(start_date, days)
    assets = []
    for i in range(n):
        z = rng.standard_normal(days - 1)
        log_ratios = drifts[i] + vols[i] * z
        closes = start_price * np.exp(np.concatenate([[0.0], np.cumsum(log_ratios)]))
        up = np.abs(rng.standard_normal(days)) * vols[i] * 0.5
        down = np.minimum(np.abs(rng.standard_normal(days)) * vols[i] * 0.5, 0.5)
        highs = closes * (1.0 + up)
        lows = closes * (1.0 - down)
        opens = lows + rng.uniform(0.0, 1.0, size=days) * (highs - lows)
        assets.append(AssetSeries(
            asset_id=str(asset_ids[i]),
            dates=calendar,
            channels={"open": opens, "high": highs, "low": lows, "close": closes},
        ))
    return MarketFrame(assets=tuple(assets), calendar=calendar)
