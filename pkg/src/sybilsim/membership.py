"""Membership bookkeeping shared by both purge protocols.

Holds the identity universe, the committee's view of the current and
last-purge ID sets, committee sampling, and the trusted bootstrap that
stands in for the heavyweight initialization protocol (modeled as an
oracle: it may resample until the initial committee has a good majority).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SimulationFailure(RuntimeError):
    """The run cannot continue meaningfully (e.g. population too small)."""


@dataclass(frozen=True)
class Identity:
    """One ID.  ``is_good`` is ground truth for the harness and metrics
    only; protocol logic never reads it."""

    label: str
    key: bytes = b""
    is_good: bool = True
    join_time: float = 0.0


@dataclass
class SystemView:
    """The committee's membership state.

    ``s_cur`` may overcount reality: bad IDs that depart silently stay in
    it until the next purge.  ``n_a``/``n_d`` count accepted joins and
    announced departures since the last purge.
    """

    s_cur: set[str] = field(default_factory=set)
    s_prev: frozenset[str] = frozenset()
    committee: set[str] = field(default_factory=set)
    iteration: int = 1
    n_a: int = 0
    n_d: int = 0
    clock: float = 0.0


@dataclass(frozen=True)
class BootstrapResult:
    identities: tuple[Identity, ...]
    committee: frozenset[str]
    j0: float


def committee_size(n0: int, c_comm: float = 3.0) -> int:
    return math.ceil(c_comm * math.log(n0))


def sample_distinct(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """k distinct indices from range(n), uniform, in O(k) (Floyd's method)."""
    if k > n:
        raise SimulationFailure(f"cannot sample {k} from population of {n}")
    chosen: set[int] = set()
    out: list[int] = []
    for j in range(n - k, n):
        t = int(rng.integers(0, j + 1))
        if t in chosen:
            t = j
        chosen.add(t)
        out.append(t)
    return out


def bootstrap(
    n0: int,
    alpha: float,
    init_duration: float,
    rng: np.random.Generator,
    c_comm: float = 3.0,
) -> BootstrapResult:
    """Trusted initialization: n0 IDs with exactly floor(alpha*n0) bad ones,
    an all-known committee with a good majority, and the initial join-rate
    estimate j0 = n0 / init_duration.
    """
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"alpha must be in [0, 1/2), got {alpha}")
    if alpha > 0.0 and n0 < 8.0 / alpha:
        raise ValueError(f"n0 must be at least 8/alpha = {8.0 / alpha:.0f}, got {n0}")
    if n0 < 2:
        raise ValueError(f"n0 must be at least 2, got {n0}")
    if init_duration <= 0:
        raise ValueError("init_duration must be positive")

    n_bad = int(alpha * n0)
    identities = tuple(
        Identity(
            label=f"s{i}",
            key=f"pk-s{i}".encode(),
            is_good=(i >= n_bad),
            join_time=0.0,
        )
        for i in range(n0)
    )
    size = committee_size(n0, c_comm)
    # Bootstrap is an oracle, so resampling until a good majority is fair game.
    for _ in range(10_000):
        idx = sample_distinct(rng, n0, size)
        good = sum(1 for i in idx if identities[i].is_good)
        if good * 2 > size:
            committee = frozenset(identities[i].label for i in idx)
            break
    else:  # pragma: no cover - alpha < 1/2 makes this unreachable in practice
        raise SimulationFailure("could not bootstrap a good-majority committee")
    return BootstrapResult(
        identities=identities, committee=committee, j0=n0 / init_duration
    )


def apply_join(view: SystemView, identity: Identity) -> bool:
    """Admit one ID.  Duplicate labels are rejected (returns False)."""
    if identity.label in view.s_cur:
        return False
    view.s_cur.add(identity.label)
    view.n_a += 1
    return True


def apply_depart(view: SystemView, label: str, announced: bool = True) -> bool:
    """Process a departure.

    Announced departures (all good IDs announce) remove the label and count
    toward n_d.  Silent departures leave the view untouched: the committee
    only learns of them at the next purge.  Unknown labels are ignored.
    """
    if not announced:
        return False
    if label not in view.s_cur:
        return False
    view.s_cur.discard(label)
    view.committee.discard(label)
    view.n_d += 1
    return True


def sample_committee(
    view: SystemView,
    n0: int,
    c_comm: float,
    rng: np.random.Generator,
    population: list[str] | None = None,
) -> set[str]:
    """Uniform committee sample (without replacement) from the post-purge set.

    ``population`` lets callers pass an ordered list of s_cur for O(k)
    sampling; otherwise one is built from the view.
    """
    size = committee_size(n0, c_comm)
    pop = population if population is not None else sorted(view.s_cur)
    if len(pop) < size:
        raise SimulationFailure(
            f"population {len(pop)} too small for committee of {size}"
        )
    idx = sample_distinct(rng, len(pop), size)
    committee = {pop[i] for i in idx}
    view.committee = committee
    return committee
