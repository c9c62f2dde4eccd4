"""Good-ID churn: trace ingestion, synthetic generation, and epoch analysis.

Traces are CSV files with header ``time_s,event,label`` (UTF-8, LF), events
``join``/``depart``, non-decreasing fractional-second timestamps.  Trace IDs
are all good; adversarial joins are layered on top by the adversary module.

The synthetic generator draws Poisson arrivals under a piecewise-constant
rate schedule and Weibull session times (scale in minutes), capping good
joins/departures per round at configurable fractions of the current good
population (excess churn is deferred to later rounds).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

JOIN = "join"
DEPART = "depart"


class TraceError(ValueError):
    """A churn trace violates the file format or ordering invariants."""


@dataclass(frozen=True, order=True)
class ChurnEvent:
    time: float
    kind: str
    label: str


@dataclass(frozen=True)
class SynthChurnConfig:
    """Synthetic churn parameters.

    ``join_rate`` is either a single rate (IDs/second) or a piecewise-
    constant schedule of (start_time_s, rate) pairs.  Session times are
    Weibull with ``session_scale_min`` in minutes.
    """

    join_rate: float | tuple[tuple[float, float], ...] = 1.0
    session_shape: float = 0.38
    session_scale_min: float = 42.2
    n_init: int = 1000
    duration_s: float = 10_000.0
    eps_a: float = 0.01
    eps_d: float = 0.01
    round_s: float = 1.0

    def __post_init__(self):
        if self.session_shape <= 0 or self.session_scale_min <= 0:
            raise ValueError("Weibull shape and scale must be positive")
        if self.n_init < 0 or self.duration_s <= 0:
            raise ValueError("n_init must be >= 0 and duration_s positive")
        for _, rate in self.schedule():
            if rate < 0:
                raise ValueError("join rates must be nonnegative")

    def schedule(self) -> tuple[tuple[float, float], ...]:
        if isinstance(self.join_rate, (int, float)):
            return ((0.0, float(self.join_rate)),)
        sched = tuple((float(t), float(r)) for t, r in self.join_rate)
        if not sched or sched[0][0] != 0.0:
            raise ValueError("rate schedule must start at t=0")
        if any(b[0] <= a[0] for a, b in zip(sched, sched[1:])):
            raise ValueError("rate schedule times must be increasing")
        return sched


def load_trace(path: str) -> list[ChurnEvent]:
    """Read and validate a churn trace file.

    Rejects malformed rows (with their line number), out-of-order times,
    departures of unknown or already-departed labels, and duplicate joins.
    """
    events: list[ChurnEvent] = []
    present: set[str] = set()
    last_time = -math.inf
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "event", "label"]:
            raise TraceError(f"{path}:1: expected header 'time_s,event,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise TraceError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            time_s, kind, label = row
            try:
                t = float(time_s)
            except ValueError:
                raise TraceError(f"{path}:{lineno}: bad timestamp {time_s!r}") from None
            if kind not in (JOIN, DEPART):
                raise TraceError(f"{path}:{lineno}: unknown event {kind!r}")
            if not label:
                raise TraceError(f"{path}:{lineno}: empty label")
            if t < last_time:
                raise TraceError(f"{path}:{lineno}: timestamps must be non-decreasing")
            last_time = t
            if kind == JOIN:
                if label in present:
                    raise TraceError(f"{path}:{lineno}: {label!r} joined twice")
                present.add(label)
            else:
                if label not in present:
                    raise TraceError(
                        f"{path}:{lineno}: departure of absent label {label!r}"
                    )
                present.discard(label)
            events.append(ChurnEvent(time=t, kind=kind, label=label))
    return events


def write_trace(events: list[ChurnEvent], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time_s", "event", "label"])
        for ev in events:
            writer.writerow([repr(float(ev.time)), ev.kind, ev.label])


def draw_session_s(rng: np.random.Generator, shape: float, scale_min: float) -> float:
    """One Weibull session length in seconds (scale parameter is minutes)."""
    return float(rng.weibull(shape)) * scale_min * 60.0


def _rate_at(schedule, t: float) -> float:
    rate = schedule[0][1]
    for start, r in schedule:
        if t >= start:
            rate = r
        else:
            break
    return rate


def generate_synth(cfg: SynthChurnConfig, rng_seed: int) -> list[ChurnEvent]:
    """Deterministic synthetic event sequence for a seed.

    Initial IDs (labels ``i0..``) are present at t=0 and only depart; Poisson
    arrivals (labels ``a0..``) join and later depart when their session ends
    within the horizon.  Per-round churn caps defer excess events to the
    next round boundary.
    """
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    raw: list[ChurnEvent] = []
    schedule = cfg.schedule()

    for i in range(cfg.n_init):
        end = draw_session_s(rng, cfg.session_shape, cfg.session_scale_min)
        if end <= cfg.duration_s:
            raw.append(ChurnEvent(time=end, kind=DEPART, label=f"i{i}"))

    t = 0.0
    serial = 0
    while True:
        rate = _rate_at(schedule, t)
        if rate <= 0.0:
            nxt = next((s for s, _ in schedule if s > t), None)
            if nxt is None:
                break
            t = nxt
            continue
        gap = float(rng.exponential(1.0 / rate))
        boundary = next((s for s, _ in schedule if s > t), math.inf)
        if t + gap > boundary:
            # Re-draw in the next schedule segment; exponential memorylessness
            # makes restarting at the boundary distribution-correct.
            t = boundary
            continue
        t += gap
        if t > cfg.duration_s:
            break
        label = f"a{serial}"
        serial += 1
        raw.append(ChurnEvent(time=t, kind=JOIN, label=label))
        end = t + draw_session_s(rng, cfg.session_shape, cfg.session_scale_min)
        if end <= cfg.duration_s:
            raw.append(ChurnEvent(time=end, kind=DEPART, label=label))

    raw.sort(key=lambda ev: (ev.time, ev.kind, ev.label))
    return _apply_round_caps(raw, cfg)


def _apply_round_caps(events: list[ChurnEvent], cfg: SynthChurnConfig) -> list[ChurnEvent]:
    # Defer events beyond the per-round caps to the next round boundary;
    # a departure never overtakes its own (possibly deferred) join.
    from collections import deque

    queue = deque(sorted(events, key=lambda ev: (ev.time, ev.kind, ev.label)))
    out: list[ChurnEvent] = []
    carry: list[ChurnEvent] = []
    good_pop = cfg.n_init
    joined: set[str] = {f"i{k}" for k in range(cfg.n_init)}
    round_s = cfg.round_s
    window_start = 0.0

    while queue or carry:
        if not carry:
            window_start = math.floor(queue[0].time / round_s) * round_s
        window_end = window_start + round_s
        batch = carry
        carry = []
        while queue and queue[0].time < window_end:
            batch.append(queue.popleft())
        batch.sort(key=lambda ev: (ev.time, ev.kind, ev.label))
        cap_a = max(1, math.floor(cfg.eps_a * good_pop))
        cap_d = max(1, math.floor(cfg.eps_d * good_pop))
        joins = departs = 0
        for ev in batch:
            if ev.kind == JOIN:
                if joins >= cap_a:
                    carry.append(ChurnEvent(window_end, ev.kind, ev.label))
                    continue
                joins += 1
                good_pop += 1
                joined.add(ev.label)
            else:
                if ev.label not in joined or departs >= cap_d:
                    carry.append(ChurnEvent(window_end, ev.kind, ev.label))
                    continue
                departs += 1
                good_pop -= 1
                joined.discard(ev.label)
            out.append(ev)
        window_start = window_end
    out.sort(key=lambda ev: (ev.time, ev.kind, ev.label))
    return out


# -- epoch analysis ---------------------------------------------------

@dataclass(frozen=True)
class EpochRecord:
    """One epoch: the shortest span over which the good set turned over by
    a 3/4 fraction.  ``rho`` is good joins per second; ``rho_min``/``rho_max``
    are the extremal inter-join rates inside the epoch."""

    index: int
    start: float
    end: float
    rho: float
    rho_min: float
    rho_max: float
    joins: int


@dataclass(frozen=True)
class EpochSegmentation:
    records: tuple[EpochRecord, ...]
    unterminated: bool


TURNOVER_FRACTION = 0.75


def epoch_oracle(
    events: list[ChurnEvent],
    initial_good: set[str] | None = None,
    t0: float = 0.0,
) -> EpochSegmentation:
    """Greedy left-to-right epoch segmentation over a good-only event stream.

    Epoch i ends at the earliest instant where |G_cur - G_prev| >=
    (3/4)|G_cur|, with G_prev frozen at the previous epoch end.  A trailing
    span that never satisfies the condition is flagged, not emitted.
    """
    g_cur: set[str] = set(initial_good or ())
    g_prev = frozenset(g_cur)
    diff = 0  # |g_cur - g_prev|, maintained incrementally
    epochs: list[EpochRecord] = []
    start = t0
    join_times: list[float] = []
    events_since_close = 0

    for ev in events:
        events_since_close += 1
        if ev.kind == JOIN:
            if ev.label in g_cur:
                continue
            g_cur.add(ev.label)
            if ev.label not in g_prev:
                diff += 1
            join_times.append(ev.time)
        else:
            if ev.label not in g_cur:
                continue
            g_cur.discard(ev.label)
            if ev.label not in g_prev:
                diff -= 1
        if g_cur and diff >= TURNOVER_FRACTION * len(g_cur):
            end = ev.time
            length = end - start
            rho = len(join_times) / length if length > 0 else math.inf
            rho_min, rho_max = _inter_join_rates(join_times)
            epochs.append(
                EpochRecord(
                    index=len(epochs) + 1,
                    start=start,
                    end=end,
                    rho=rho,
                    rho_min=rho_min,
                    rho_max=rho_max,
                    joins=len(join_times),
                )
            )
            g_prev = frozenset(g_cur)
            diff = 0
            start = end
            join_times = []
            events_since_close = 0

    return EpochSegmentation(
        records=tuple(epochs), unterminated=events_since_close > 0
    )


def _inter_join_rates(join_times: list[float]) -> tuple[float, float]:
    """Extremal rates between successive distinct join instants.

    Joins sharing a timestamp count as one burst: the rate over the gap
    ending at a burst of k joins is k / gap, keeping second-granularity
    traces finite.
    """
    if len(join_times) < 2:
        return math.nan, math.nan
    bursts: list[tuple[float, int]] = []
    for t in join_times:
        if bursts and bursts[-1][0] == t:
            bursts[-1] = (t, bursts[-1][1] + 1)
        else:
            bursts.append((t, 1))
    if len(bursts) < 2:
        return math.nan, math.nan
    rates = [
        bursts[i][1] / (bursts[i][0] - bursts[i - 1][0])
        for i in range(1, len(bursts))
    ]
    return min(rates), max(rates)


@dataclass(frozen=True)
class AssumptionConstants:
    """Empirical smoothness constants extracted from an epoch segmentation.

    a1 constants bound consecutive-epoch rate ratios; a2 constants bound
    within-epoch inter-join rates relative to the epoch rate.  They are
    widened to straddle 1 so they can be used directly in the estimator
    sandwich formulas.
    """

    a1_low: float
    a1_high: float
    a2_low: float
    a2_high: float
    epochs: tuple[EpochRecord, ...]

    @property
    def je_low(self) -> float:
        from .metrics import c_je_low

        return c_je_low(self.a1_low, self.a1_high, self.a2_low, self.a2_high)

    @property
    def je_high(self) -> float:
        from .metrics import c_je_high

        return c_je_high(self.a1_low, self.a1_high, self.a2_low, self.a2_high)


def validate_assumptions(epochs: tuple[EpochRecord, ...] | list[EpochRecord]) -> AssumptionConstants:
    """Extremal A1 ratio and A2 rate-envelope constants over the epochs."""
    epochs = tuple(epochs)
    if len(epochs) < 2:
        raise ValueError(f"need at least 2 epochs, got {len(epochs)}")
    ratios = [
        b.rho / a.rho for a, b in zip(epochs, epochs[1:]) if a.rho > 0
    ]
    a1_low = min(1.0, min(ratios))
    a1_high = max(1.0, max(ratios))
    a2_ratios = [
        (e.rho_min / e.rho, e.rho_max / e.rho)
        for e in epochs
        if e.joins >= 2 and e.rho > 0 and not math.isnan(e.rho_min)
    ]
    if not a2_ratios:
        raise ValueError("no epoch has enough joins to measure the A2 envelope")
    a2_low = min(1.0, min(lo for lo, _ in a2_ratios))
    a2_high = max(1.0, max(hi for _, hi in a2_ratios))
    return AssumptionConstants(
        a1_low=a1_low, a1_high=a1_high, a2_low=a2_low, a2_high=a2_high, epochs=epochs
    )
