"""Hash puzzles with tunable difficulty, and the abstract cost model.

A puzzle of difficulty ``h`` asks for a fixed number of distinct nonces
whose hashes, bound to the solver's public key and a freshness seed
(an entrance timestamp or a purge random string), all fall below a
threshold that shrinks linearly in ``h``.  Solving then takes about
``h * (1 - delta) * mu`` hash evaluations in expectation, while
verification costs one hash per nonce.

The simulator itself never hashes: it charges :func:`abstract_cost`
instead.  Real hashing is exercised by this module's tests and the
``bench-puzzle`` CLI subcommand.
"""
from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

HASH_BITS = 256
_HASH_SPACE = 1 << HASH_BITS

ENTRANCE = "entrance"
PURGE = "purge"

PURGE_SEED_BYTES = 32  # fixed-width purge randomness, dominates desk-scale needs

REJECT_WRONG_COUNT = "wrong-count"
REJECT_ABOVE_THRESHOLD = "above-threshold"
REJECT_KEY_MISMATCH = "key-mismatch"
REJECT_SEED_MISMATCH = "seed-mismatch"
REJECT_STALE_TIMESTAMP = "stale-timestamp"


class ParameterError(ValueError):
    """A puzzle parameter is outside its documented domain."""


class BudgetExhausted(RuntimeError):
    """Raised by :func:`solve` when the evaluation budget runs out."""

    def __init__(self, evaluations: int):
        super().__init__(f"evaluation budget exhausted after {evaluations} hashes")
        self.evaluations = evaluations


@dataclass(frozen=True)
class PuzzleParams:
    """Difficulty-independent puzzle tuning.

    ``mu`` is the number of hash evaluations a well-provisioned ID performs
    per round; ``delta`` is the slack constant in (0, 1/2); ``cap_c`` scales
    the number of sub-solutions a puzzle requires (``cap_c * ln(mu)``).
    """

    mu: int
    delta: float = 0.1
    cap_c: float = 2.0
    hash_bits: int = HASH_BITS

    def __post_init__(self):
        if self.mu < 2 ** 10:
            raise ParameterError(f"mu must be at least 2^10, got {self.mu}")
        if not 0.0 < self.delta < 0.5:
            raise ParameterError(f"delta must be in (0, 1/2), got {self.delta}")
        if self.cap_c < 1.0:
            raise ParameterError(f"cap_c must be >= 1, got {self.cap_c}")
        if self.cap_c * math.log(self.mu) < 1.0:
            raise ParameterError("cap_c * ln(mu) must be at least 1")
        if self.hash_bits != HASH_BITS:
            raise ParameterError("only 256-bit hashes are supported")

    @property
    def solution_count(self) -> int:
        """Number of distinct sub-solutions a puzzle requires."""
        return math.ceil(self.cap_c * math.log(self.mu))


@dataclass(frozen=True)
class PuzzleSpec:
    """One puzzle instance: difficulty, bound key, and freshness seed.

    ``seed`` is an integer timestamp (seconds) for entrance puzzles and a
    32-byte random string for purge puzzles.
    """

    difficulty: int
    key: bytes
    seed: int | bytes
    kind: str = ENTRANCE

    def __post_init__(self):
        if self.difficulty < 1:
            raise ParameterError(f"difficulty must be >= 1, got {self.difficulty}")
        if not self.key:
            raise ParameterError("key must be nonempty")
        if self.kind == ENTRANCE:
            if not isinstance(self.seed, int) or self.seed < 0:
                raise ParameterError("entrance seed must be a nonnegative integer timestamp")
        elif self.kind == PURGE:
            if not isinstance(self.seed, (bytes, bytearray)) or len(self.seed) != PURGE_SEED_BYTES:
                raise ParameterError(f"purge seed must be {PURGE_SEED_BYTES} bytes")
        else:
            raise ParameterError(f"unknown puzzle kind {self.kind!r}")

    def seed_bytes(self) -> bytes:
        if self.kind == ENTRANCE:
            return int(self.seed).to_bytes(8, "big")
        return bytes(self.seed)


@dataclass(frozen=True)
class PuzzleSolution:
    """A multi-solution certificate: the nonces plus the binding it claims.

    The key/seed/kind fields mirror the join or purge-response message the
    solution travels in; verification compares them against the spec before
    re-deriving and hashing each input.
    """

    nonces: tuple[int, ...]
    key: bytes
    seed: int | bytes
    kind: str


@dataclass(frozen=True)
class SolveResult:
    solution: PuzzleSolution
    evaluations: int


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = Verdict(True)


def threshold(params: PuzzleParams, h: int) -> float:
    """Per-hash success probability for a puzzle of difficulty ``h``.

    tau(h) = (cap_c * ln mu) / (h * (1 - delta) * mu), so the expected
    total number of evaluations to collect all sub-solutions is
    h * (1 - delta) * mu.  Scales as tau(1) / h.
    """
    if not isinstance(h, int) or h < 1:
        raise ParameterError(f"difficulty must be a positive integer, got {h!r}")
    return (params.cap_c * math.log(params.mu)) / (h * (1.0 - params.delta) * params.mu)


def _target_int(params: PuzzleParams, h: int) -> int:
    # Hash digests compare as integers in [0, 2^256); the real-valued
    # threshold maps onto that range.
    return int(threshold(params, h) * _HASH_SPACE)


def _base_hasher(spec: PuzzleSpec):
    hasher = hashlib.sha256()
    hasher.update(b"E" if spec.kind == ENTRANCE else b"P")
    hasher.update(spec.key)
    hasher.update(spec.seed_bytes())
    return hasher


def _hash_nonce(base, nonce: int) -> int:
    h = base.copy()
    h.update(nonce.to_bytes(8, "big"))
    return int.from_bytes(h.digest(), "big")


def solve(
    spec: PuzzleSpec,
    params: PuzzleParams,
    rng_seed: int,
    max_evaluations: int | None = None,
) -> SolveResult:
    """Search nonces until the required number of sub-solutions is found.

    Nonces are 64-bit counters starting from a seeded random offset, so a
    given (spec, params, rng_seed) always replays identically.  Raises
    :class:`BudgetExhausted` if ``max_evaluations`` runs out first.
    """
    target = _target_int(params, spec.difficulty)
    need = params.solution_count
    base = _base_hasher(spec)
    nonce = random.Random(rng_seed).getrandbits(64)
    found: list[int] = []
    evaluations = 0
    while len(found) < need:
        if max_evaluations is not None and evaluations >= max_evaluations:
            raise BudgetExhausted(evaluations)
        if _hash_nonce(base, nonce) < target:
            found.append(nonce)
        evaluations += 1
        nonce = (nonce + 1) & 0xFFFFFFFFFFFFFFFF
    solution = PuzzleSolution(
        nonces=tuple(found), key=spec.key, seed=spec.seed, kind=spec.kind
    )
    return SolveResult(solution=solution, evaluations=evaluations)


def verify(
    spec: PuzzleSpec,
    sol: PuzzleSolution,
    params: PuzzleParams,
    now: float = 0.0,
    margin: float = 120.0,
) -> Verdict:
    """Check a solution against a spec.

    Accepts iff the solution carries exactly the required number of distinct
    nonces, is bound to the spec's key and seed, is fresh (entrance kind
    only: |timestamp - now| <= margin), and every derived input hashes below
    the difficulty threshold.
    """
    need = params.solution_count
    if len(sol.nonces) != need or len(set(sol.nonces)) != need:
        return Verdict(False, REJECT_WRONG_COUNT)
    if sol.key != spec.key:
        return Verdict(False, REJECT_KEY_MISMATCH)
    if sol.kind != spec.kind or sol.seed != spec.seed:
        return Verdict(False, REJECT_SEED_MISMATCH)
    if spec.kind == ENTRANCE and abs(float(spec.seed) - now) > margin:
        return Verdict(False, REJECT_STALE_TIMESTAMP)
    target = _target_int(params, spec.difficulty)
    base = _base_hasher(spec)
    for nonce in sol.nonces:
        if _hash_nonce(base, nonce) >= target:
            return Verdict(False, REJECT_ABOVE_THRESHOLD)
    return ACCEPT


def abstract_cost(h: int) -> int:
    """Cost units charged for solving a puzzle of difficulty ``h``: exactly ``h``."""
    if not isinstance(h, int) or h < 1:
        raise ParameterError(f"difficulty must be a positive integer, got {h!r}")
    return h
