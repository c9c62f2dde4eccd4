"""Cost ledgers, ground-truth population tracking, and run analysis.

Every abstract-cost charge lands in exactly one (side, category) cell:
good/adversary x entrance/purge.  Adversary entrance spend is booked in
the iteration whose admission consumed the solution.  The ground-truth
tracker is the only component allowed to see good/bad labels; protocol
logic stays blind to them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field


@dataclass(slots=True)
class IterationRecord:
    """One ledger row.  ``iterations`` > 1 marks an aggregated stretch of
    identical purge cycles (adversary-flood fast path)."""

    index: int
    t_start: float
    t_end: float
    good_entrance: float = 0.0
    good_purge: float = 0.0
    adv_entrance: float = 0.0
    adv_purge: float = 0.0
    g_a: int = 0
    g_d: int = 0
    b_a: int = 0
    b_d_silent: int = 0
    s_prev_size: int = 0
    s_end_size: int = 0
    bad_fraction_max: float = 0.0
    iterations: int = 1
    purged: bool = False
    s_end: frozenset | None = None

    @property
    def length(self) -> float:
        return self.t_end - self.t_start

    @property
    def good_total(self) -> float:
        return self.good_entrance + self.good_purge

    @property
    def adv_total(self) -> float:
        return self.adv_entrance + self.adv_purge


class CostLedger:
    """Per-iteration and cumulative spend accounting for one run."""

    def __init__(self, s0: frozenset | None = None, keep_sets: bool = True):
        self.records: list[IterationRecord] = []
        self.s0 = s0
        self.keep_sets = keep_sets
        self._open: IterationRecord | None = None

    # -- building -----------------------------------------------------
    def open_iteration(self, index: int, t_start: float, s_prev_size: int) -> None:
        assert self._open is None, "previous iteration not closed"
        self._open = IterationRecord(
            index=index, t_start=t_start, t_end=t_start, s_prev_size=s_prev_size
        )

    @property
    def current(self) -> IterationRecord:
        assert self._open is not None, "no open iteration"
        return self._open

    def charge(self, side: str, category: str, amount: float) -> None:
        rec = self.current
        if side == "good":
            if category == "entrance":
                rec.good_entrance += amount
            else:
                rec.good_purge += amount
        else:
            if category == "entrance":
                rec.adv_entrance += amount
            else:
                rec.adv_purge += amount

    def count_join(self, good: bool, n: int = 1) -> None:
        if good:
            self.current.g_a += n
        else:
            self.current.b_a += n

    def count_depart(self, good: bool, silent: bool = False, n: int = 1) -> None:
        if good:
            self.current.g_d += n
        elif silent:
            self.current.b_d_silent += n

    def observe_fraction(self, fraction: float) -> None:
        rec = self.current
        if fraction > rec.bad_fraction_max:
            rec.bad_fraction_max = fraction

    def close_iteration(
        self,
        t_end: float,
        s_end_size: int,
        s_end: frozenset | None = None,
        purged: bool = True,
    ) -> IterationRecord:
        rec = self.current
        rec.t_end = t_end
        rec.s_end_size = s_end_size
        rec.purged = purged
        if self.keep_sets and s_end is not None:
            rec.s_end = s_end
        self.records.append(rec)
        self._open = None
        return rec

    def add_aggregate(self, rec: IterationRecord) -> None:
        """Append a pre-built row covering ``rec.iterations`` purge cycles."""
        assert self._open is None, "aggregate rows go between open iterations"
        self.records.append(rec)

    # -- totals -------------------------------------------------------
    def total(self, attr: str) -> float:
        return sum(getattr(r, attr) for r in self.records)

    @property
    def good_spend(self) -> float:
        return self.total("good_entrance") + self.total("good_purge")

    @property
    def adv_spend(self) -> float:
        return self.total("adv_entrance") + self.total("adv_purge")

    @property
    def purge_count(self) -> int:
        return sum(r.iterations for r in self.records if r.purged)


@dataclass(frozen=True)
class SpendRates:
    a_rate: float
    t_rate: float
    j_rate: float
    delta_rate: float | None


def spend_rates(ledger: CostLedger, first: int = 0, last: int | None = None) -> SpendRates:
    """Aggregate rates over a contiguous range of ledger records.

    A = good spend / elapsed, T = adversary spend whose solutions were used
    in the range / elapsed, J = good joins / elapsed.  The turnover rate
    Delta = |S_start \\ S_end| / elapsed is reported when both boundary
    membership snapshots were retained (for the full range the start set is
    the bootstrap set), else None.
    """
    if last is None:
        last = len(ledger.records) - 1
    if not ledger.records or first < 0 or last >= len(ledger.records) or first > last:
        raise ValueError(f"invalid record range [{first}, {last}]")
    recs = ledger.records[first : last + 1]
    elapsed = sum(r.length for r in recs)
    if elapsed <= 0:
        raise ValueError("range has zero elapsed time")
    start_set = ledger.s0 if first == 0 else ledger.records[first - 1].s_end
    end_set = recs[-1].s_end
    delta = None
    if start_set is not None and end_set is not None:
        delta = len(start_set - end_set) / elapsed
    return SpendRates(
        a_rate=sum(r.good_total for r in recs) / elapsed,
        t_rate=sum(r.adv_total for r in recs) / elapsed,
        j_rate=sum(r.g_a for r in recs) / elapsed,
        delta_rate=delta,
    )


class GroundTruth:
    """Actual (silent-departure-aware) population, invisible to the protocol.

    Keeps insertion-ordered lists alongside the sets so committee sampling
    and purge funding stay O(k) and deterministic.
    """

    def __init__(self):
        self.good: set[str] = set()
        self.bad: set[str] = set()
        self.good_list: list[str] = []
        self._good_pos: dict[str, int] = {}
        self.bad_list: list[str] = []
        self._bad_pos: dict[str, int] = {}
        self.phantom_bad = 0  # flood joins not yet materialized as labels

    def add(self, label: str, good: bool) -> None:
        if good:
            self.good.add(label)
            self._good_pos[label] = len(self.good_list)
            self.good_list.append(label)
        else:
            self.bad.add(label)
            self._bad_pos[label] = len(self.bad_list)
            self.bad_list.append(label)

    def remove(self, label: str) -> None:
        if label in self.good:
            self.good.discard(label)
            self._list_remove(self.good_list, self._good_pos, label)
        elif label in self.bad:
            self.bad.discard(label)
            self._list_remove(self.bad_list, self._bad_pos, label)

    @staticmethod
    def _list_remove(lst: list[str], pos: dict[str, int], label: str) -> None:
        i = pos.pop(label)
        last = lst[-1]
        lst[i] = last
        if last != label:
            pos[last] = i
        lst.pop()

    def is_good(self, label: str) -> bool:
        return label in self.good

    @property
    def good_count(self) -> int:
        return len(self.good)

    @property
    def bad_count(self) -> int:
        return len(self.bad) + self.phantom_bad

    def bad_fraction(self) -> float:
        total = self.good_count + self.bad_count
        return self.bad_count / total if total else 0.0


@dataclass(frozen=True)
class PopulationCheck:
    passed: bool
    time: float | None = None
    fraction: float | None = None


class PopulationMonitor:
    """Records the bad-fraction envelope at event boundaries.

    ``bounds`` are thresholds whose first crossing time is tracked online,
    so a post-run check can report when a bound was first reached.
    """

    def __init__(self, bounds: tuple[float, ...] = ()):
        self.bounds = tuple(bounds)
        self.first_crossing: dict[float, float] = {}
        self.max_fraction = 0.0
        self.max_time = 0.0
        self.committee_violations: list[float] = []

    def observe(self, fraction: float, now: float) -> None:
        if fraction > self.max_fraction:
            self.max_fraction = fraction
            self.max_time = now
        for b in self.bounds:
            if fraction >= b and b not in self.first_crossing:
                self.first_crossing[b] = now

    def committee_violation(self, now: float) -> None:
        self.committee_violations.append(now)


def check_population(monitor: PopulationMonitor, bound: float) -> PopulationCheck:
    """Pass iff the observed bad fraction stayed strictly below ``bound``."""
    if monitor.max_fraction < bound:
        return PopulationCheck(True)
    time = monitor.first_crossing.get(bound, monitor.max_time)
    return PopulationCheck(False, time=time, fraction=monitor.max_fraction)


def effective_alpha(alpha: float, delta_rounds: float) -> float:
    """Power fraction equivalent to alpha under a delta-bounded message delay:
    (2*alpha*delta + alpha) / (2*alpha*delta + 1)."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    if delta_rounds < 0:
        raise ValueError("delta_rounds must be nonnegative")
    return (2.0 * alpha * delta_rounds + alpha) / (2.0 * alpha * delta_rounds + 1.0)


# -- analysis constants ----------------------------------------------

def c_je_low(a1_low: float, a1_high: float, a2_low: float, a2_high: float) -> float:
    """Lower sandwich constant for the join-rate estimate:
    (5/6) * c(A1,low)^2 * c(A2,low) / c(A1,high)."""
    return (5.0 / 6.0) * a1_low ** 2 * a2_low / a1_high


def c_je_high(a1_low: float, a1_high: float, a2_low: float, a2_high: float) -> float:
    """Upper sandwich constant: 5 * c(A1,high)^2 * c(A2,high) / c(A1,low)."""
    return 5.0 * a1_high ** 2 * a2_high / a1_low


def bad_join_rate_constant(cje_high: float) -> float:
    """Constant bounding the bad join rate: sqrt(2 * c(JE,high))."""
    return math.sqrt(2.0 * cje_high)


def good_spend_constant(a1_high: float, a2_high: float, cje_low: float) -> float:
    """Per-iteration good-spend constant: 12/11 + c(A1,h)*c(A2,h)/(11*c(JE,low))."""
    return 12.0 / 11.0 + (a1_high * a2_high) / (11.0 * cje_low)


def iteration_good_rates(records, epochs) -> list[float]:
    """Average good join rate per iteration, from epoch overlap weighting.

    For each ledger record, overlap the [t_start, t_end) span with the epoch
    segmentation and average the per-epoch rates weighted by overlap length.
    Iterations not covered by any epoch get rate 0.
    """
    out = []
    for rec in records:
        length = rec.t_end - rec.t_start
        if length <= 0:
            out.append(0.0)
            continue
        acc = 0.0
        for ep in epochs:
            lo = max(rec.t_start, ep.start)
            hi = min(rec.t_end, ep.end)
            if hi > lo:
                acc += (hi - lo) / length * ep.rho
        out.append(acc)
    return out


# -- CSV emission ----------------------------------------------------

_CSV_FIELDS = [
    "iteration",
    "t_start",
    "t_end",
    "length_s",
    "cycles",
    "good_entrance",
    "good_purge",
    "adv_entrance",
    "adv_purge",
    "g_a",
    "g_d",
    "b_a",
    "b_d_silent",
    "s_prev_size",
    "s_end_size",
    "bad_fraction_max",
    "purged",
]


def emit_csv(ledger: CostLedger, path: str, metadata: dict | None = None) -> None:
    """Write one row per ledger record, preceded by '#' metadata comments.

    Output is byte-stable for a fixed ledger: floats use repr round-tripping
    and rows follow record order.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# sybilsim run ledger; one row per iteration")
        fh.write(" (cycles > 1 marks an aggregated purge cascade)\n")
        for key in sorted(metadata or {}):
            fh.write(f"# {key}={metadata[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_FIELDS)
        for r in ledger.records:
            writer.writerow(
                [
                    r.index,
                    repr(float(r.t_start)),
                    repr(float(r.t_end)),
                    repr(float(r.length)),
                    r.iterations,
                    repr(float(r.good_entrance)),
                    repr(float(r.good_purge)),
                    repr(float(r.adv_entrance)),
                    repr(float(r.adv_purge)),
                    r.g_a,
                    r.g_d,
                    r.b_a,
                    r.b_d_silent,
                    r.s_prev_size,
                    r.s_end_size,
                    repr(float(r.bad_fraction_max)),
                    int(r.purged),
                ]
            )


def read_ledger_csv(path: str) -> tuple[dict, list[IterationRecord]]:
    """Parse a ledger CSV back into records (round-trip of :func:`emit_csv`)."""
    metadata: dict[str, str] = {}
    records: list[IterationRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for line in fh:
            if line.startswith("#"):
                text = line[1:].strip()
                if "=" in text:
                    key, _, value = text.partition("=")
                    metadata[key.strip()] = value
                continue
            rows.append(line)
        reader = csv.DictReader(rows)
        for row in reader:
            records.append(
                IterationRecord(
                    index=int(row["iteration"]),
                    t_start=float(row["t_start"]),
                    t_end=float(row["t_end"]),
                    good_entrance=float(row["good_entrance"]),
                    good_purge=float(row["good_purge"]),
                    adv_entrance=float(row["adv_entrance"]),
                    adv_purge=float(row["adv_purge"]),
                    g_a=int(row["g_a"]),
                    g_d=int(row["g_d"]),
                    b_a=int(row["b_a"]),
                    b_d_silent=int(row["b_d_silent"]),
                    s_prev_size=int(row["s_prev_size"]),
                    s_end_size=int(row["s_end_size"]),
                    bad_fraction_max=float(row["bad_fraction_max"]),
                    iterations=int(row["cycles"]),
                    purged=bool(int(row["purged"])),
                )
            )
    return metadata, records
