"""Average-coherence evaluation and the stochastic pilot pattern search.

The search walks pattern space by single-element replacement, accepts
strictly improving candidates, and tracks state occupation
probabilities with a decreasing step size; the pattern of the
most-occupied state is the reported optimum.  Because the objective
only involves the partial Fourier rows, the result is independent of
train position, speed and pilot amplitude by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PilotPattern:
    """Strictly increasing pilot subcarrier indices."""

    num_subcarriers: int
    indices: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("empty pattern")
        if np.unique(idx).size != idx.size:
            raise ValueError("pilot indices must be unique")
        if idx.min() < 0 or idx.max() >= self.num_subcarriers:
            raise ValueError("pilot indices out of range")
        object.__setattr__(self, "indices", np.sort(idx))

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class CoherenceParams:
    delta: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def average_coherence(matrix: np.ndarray, params: CoherenceParams) -> float:
    """Mean of the normalized column cross-correlations at or above delta.

    Returns 0 when no pair qualifies; a zero column makes the
    normalization undefined and raises.
    """
    norms = np.linalg.norm(matrix, axis=0)
    if np.any(norms == 0):
        raise ValueError("degenerate column")
    normalized = matrix / norms
    gram = np.abs(normalized.conj().T @ normalized)
    off = ~np.eye(gram.shape[0], dtype=bool)
    vals = gram[off]
    qualifying = vals[vals >= params.delta]
    return float(qualifying.mean()) if qualifying.size else 0.0


def delay_rows(pattern: PilotPattern, num_taps: int) -> np.ndarray:
    """Partial Fourier rows selected by the pattern (pilot measurement block
    up to the constant pilot amplitude)."""
    k = pattern.indices[:, None]
    ell = np.arange(num_taps)[None, :]
    return np.exp(-2j * np.pi * k * ell / pattern.num_subcarriers)


def pattern_coherence(pattern: PilotPattern, num_taps: int, params: CoherenceParams) -> float:
    return average_coherence(delay_rows(pattern, num_taps), params)


def mutate(
    pattern: PilotPattern, position_in_pattern: int, rng: np.random.Generator
) -> PilotPattern:
    """Replace one element with a uniformly drawn unused subcarrier."""
    K = pattern.num_subcarriers
    if len(pattern) >= K:
        raise ValueError("no free subcarrier to swap in")
    used = set(int(i) for i in pattern.indices)
    complement = np.array(sorted(set(range(K)) - used), dtype=np.int64)
    newcomer = int(complement[rng.integers(complement.size)])
    indices = pattern.indices.copy()
    indices[position_in_pattern] = newcomer
    return PilotPattern(num_subcarriers=K, indices=indices)


def equidistant_pattern(num_subcarriers: int, num_pilots: int) -> PilotPattern:
    """Evenly spaced pilots, rounding collisions pushed to the next free slot."""
    if num_pilots > num_subcarriers:
        raise ValueError("too many pilots")
    chosen: list[int] = []
    taken = set()
    for i in range(num_pilots):
        idx = int(round(i * num_subcarriers / num_pilots)) % num_subcarriers
        while idx in taken:
            idx = (idx + 1) % num_subcarriers
        chosen.append(idx)
        taken.add(idx)
    return PilotPattern(num_subcarriers=num_subcarriers, indices=np.array(sorted(chosen)))


@dataclass
class SearchState:
    """Bookkeeping of the stochastic search.

    ``occupancy`` holds the state occupation probabilities (state s is
    the step at which its pattern was accepted; 0 is the initial
    pattern); ``kappa`` is the current state, ``iota`` the champion.
    """

    occupancy: np.ndarray
    current: PilotPattern
    candidate: PilotPattern | None
    best: PilotPattern
    step: int
    kappa: int
    iota: int
    accepted_values: list[float] = field(default_factory=list)
    best_values: list[float] = field(default_factory=list)


def design_pilots(
    num_subcarriers: int,
    num_taps: int,
    num_pilots: int,
    num_sweeps: int,
    params: CoherenceParams,
    rng: np.random.Generator,
    initial: PilotPattern | None = None,
    return_state: bool = False,
):
    """Run the full search: ``num_sweeps`` passes over the pattern positions.

    Each step mutates the position given by the step index modulo the
    pattern length, accepts only strict coherence decreases, updates the
    occupation probabilities with step size 1/(m+1), and promotes the
    current pattern to champion once its occupation mass leads.
    """
    if not num_pilots < num_subcarriers:
        raise ValueError("need spare subcarriers to search over")
    if num_sweeps < 1:
        raise ValueError("need at least one sweep")
    current = initial if initial is not None else equidistant_pattern(num_subcarriers, num_pilots)
    mu_current = pattern_coherence(current, num_taps, params)
    total_steps = num_sweeps * num_pilots
    state = SearchState(
        occupancy=np.zeros(total_steps + 1),
        current=current,
        candidate=None,
        best=current,
        step=0,
        kappa=0,
        iota=0,
        accepted_values=[mu_current],
        best_values=[mu_current],
    )
    state.occupancy[0] = 1.0
    mu_best = mu_current
    for m in range(total_steps):
        position = m % num_pilots
        candidate = mutate(state.current, position, rng)
        state.candidate = candidate
        mu_candidate = pattern_coherence(candidate, num_taps, params)
        if mu_candidate < mu_current:
            state.current = candidate
            mu_current = mu_candidate
            state.kappa = m + 1
            state.accepted_values.append(mu_candidate)
        eta = 1.0 / (m + 1)
        state.occupancy *= 1.0 - eta
        state.occupancy[state.kappa] += eta
        if state.occupancy[state.kappa] > state.occupancy[state.iota]:
            state.best = state.current
            state.iota = state.kappa
            mu_best = mu_current
            state.best_values.append(mu_best)
        state.step = m + 1
    if return_state:
        return state.best, state
    return state.best
