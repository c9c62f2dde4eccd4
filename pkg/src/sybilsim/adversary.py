"""Adversary strategies: spending a budget rate T on bad-ID injection.

Budget accrues continuously at ``spend_rate`` and every charge draws on the
accumulated unspent balance, so ledgered adversary spend can never exceed
the integral of T over the run.  The adversary reads public protocol state
(current entrance difficulty, the join-rate estimate) before acting, and is
told about each purge before deciding which bad IDs to keep funding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

STRATEGIES = ("none", "burst", "uniform_optimal", "sustain")


@dataclass(frozen=True)
class AdversaryConfig:
    strategy: str = "none"
    spend_rate: float = 0.0  # T, cost units per second
    pay_purges: bool = False
    alpha: float = 0.0  # fraction of total compute; caps per-round purge solving
    burst_interval: float = 100.0
    burst_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.spend_rate < 0:
            raise ValueError("spend_rate must be nonnegative")
        if not 0.0 <= self.alpha < 0.5:
            raise ValueError("alpha must be in [0, 1/2)")
        if self.burst_interval <= 0:
            raise ValueError("burst_interval must be positive")

    @property
    def pays_purges(self) -> bool:
        # uniform_optimal always abandons its IDs at a purge; sustain always keeps them.
        if self.strategy == "sustain":
            return True
        if self.strategy == "uniform_optimal":
            return False
        return self.pay_purges


@dataclass(frozen=True)
class ProtocolView:
    """Public protocol state the adversary may read before acting."""

    flat_cost: bool  # entrance difficulty fixed at 1
    next_difficulty: int  # difficulty the next join would pay right now
    j_tilde: float | None = None  # join-rate estimate, when the protocol has one


@dataclass(frozen=True)
class JoinPlan:
    """Either an immediate batch (count/cost) or a sustained rate."""

    count: int = 0
    cost: float = 0.0
    rate: float = 0.0


def burst_size(next_difficulty: int, budget: float) -> tuple[int, float]:
    """Largest k with k*d0 + k(k-1)/2 <= budget, and its exact cost.

    Successive joins inside one estimation window pay d0, d0+1, ... so a
    burst's cost is an arithmetic series.
    """
    if budget < next_difficulty:
        return 0, 0.0
    b = 2 * next_difficulty - 1
    k = int((math.sqrt(b * b + 8.0 * budget) - b) // 2)
    cost = k * next_difficulty + k * (k - 1) // 2
    while cost > budget:  # float slop guard
        k -= 1
        cost = k * next_difficulty + k * (k - 1) // 2
    return k, float(cost)


def solve_uniform_rate(spend_rate: float, view: ProtocolView) -> float:
    """Bad-join rate J solving J * f(J) = T for the current cost model.

    f(J) = 1 against a flat entrance cost; against a windowed cost the
    per-join difficulty is about J/j_tilde + 1.  Solved by bisection.
    """
    if spend_rate <= 0:
        return 0.0
    if view.flat_cost or not view.j_tilde or view.j_tilde <= 0:
        return spend_rate
    j_tilde = view.j_tilde

    def spend(rate: float) -> float:
        return rate * (rate / j_tilde + 1.0)

    lo, hi = 0.0, max(spend_rate, math.sqrt(spend_rate * j_tilde) * 2.0 + j_tilde)
    while spend(hi) < spend_rate:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if spend(mid) < spend_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def plan_bad_joins(cfg: AdversaryConfig, view: ProtocolView, budget_available: float) -> JoinPlan:
    """Strategy semantics at one decision instant.

    none: nothing.  burst/sustain: as many joins as the budget affords right
    now.  uniform_optimal: a sustained rate balancing entrance spend against
    the budget rate.
    """
    if budget_available < 0:
        raise ValueError("budget_available must be nonnegative")
    if cfg.strategy == "none":
        return JoinPlan()
    if cfg.strategy in ("burst", "sustain"):
        if view.flat_cost:
            count = int(budget_available)
            return JoinPlan(count=count, cost=float(count))
        count, cost = burst_size(view.next_difficulty, budget_available)
        return JoinPlan(count=count, cost=cost)
    return JoinPlan(rate=solve_uniform_rate(cfg.spend_rate, view))


class Adversary:
    """Budget-tracking driver around :func:`plan_bad_joins`.

    The engine asks for the next action instant, then admits the planned
    joins through the protocol, which charges this budget as it goes.
    """

    def __init__(self, cfg: AdversaryConfig):
        self.cfg = cfg
        self.budget = 0.0
        self.spent = 0.0
        self._accrued_to = 0.0
        self._join_credit = 0.0
        self._last_emit = 0.0
        self._burst_idx = 0
        self._rate_cache: tuple[tuple, float] | None = None

    # -- budget -------------------------------------------------------
    def accrue(self, now: float) -> None:
        if now > self._accrued_to:
            self.budget += self.cfg.spend_rate * (now - self._accrued_to)
            self._accrued_to = now

    def spend(self, amount: float) -> None:
        assert amount <= self.budget + 1e-6, "overspent adversary budget"
        self.budget -= amount
        self.spent += amount

    # -- scheduling ---------------------------------------------------
    def next_action_time(self, now: float, view: ProtocolView) -> float:
        if self.cfg.strategy == "none" or self.cfg.spend_rate == 0.0:
            return math.inf
        if self.cfg.strategy in ("burst", "sustain"):
            if self.cfg.burst_times is not None:
                while (
                    self._burst_idx < len(self.cfg.burst_times)
                    and self.cfg.burst_times[self._burst_idx] < now
                ):
                    self._burst_idx += 1
                if self._burst_idx >= len(self.cfg.burst_times):
                    return math.inf
                return self.cfg.burst_times[self._burst_idx]
            k = math.floor(now / self.cfg.burst_interval) + 1
            return k * self.cfg.burst_interval
        # uniform_optimal: emit batches often enough to resolve the window.
        rate = self._uniform_rate(view)
        if rate <= 0:
            return math.inf
        tick = max(1.0 / rate, min(1.0, 0.25 / view.j_tilde if view.j_tilde else 1.0))
        return self._last_emit + tick

    def _uniform_rate(self, view: ProtocolView) -> float:
        cached = self._rate_cache
        if cached is not None and cached[0] == (view.flat_cost, view.j_tilde):
            return cached[1]
        rate = solve_uniform_rate(self.cfg.spend_rate, view)
        self._rate_cache = ((view.flat_cost, view.j_tilde), rate)
        return rate

    def planned_joins(self, now: float, view: ProtocolView) -> int | None:
        """Joins to submit at this instant; None means as many as the budget
        affords (the protocol caps admission by this budget either way)."""
        self.accrue(now)
        if self.cfg.strategy == "none":
            return 0
        if self.cfg.strategy in ("burst", "sustain"):
            self._burst_idx += 1
            return None
        rate = self._uniform_rate(view)
        self._join_credit += rate * (now - self._last_emit)
        self._last_emit = now
        count = int(self._join_credit)
        self._join_credit -= count
        return count

    # -- purges ---------------------------------------------------------
    def fund_purge(self, good_responders: int, bad_candidates: int) -> int:
        """Bad IDs kept alive through a purge.

        Capped by the unspent budget and by the adversary's per-round share
        of compute: with an alpha fraction of total power, at most
        alpha/(1-alpha) puzzles per good responder can be solved inside the
        one-round purge deadline.
        """
        if not self.cfg.pays_purges or bad_candidates <= 0:
            return 0
        cap = bad_candidates
        if self.cfg.alpha > 0.0:
            cap = min(
                cap, math.floor(good_responders * self.cfg.alpha / (1.0 - self.cfg.alpha))
            )
        funded = min(cap, int(self.budget))
        if funded > 0:
            self.spend(float(funded))
        return funded
