"""Pilot-domain sparse recovery of the delay-domain channel coefficients.

The interference-eliminated pilot observations of each cell form an
independent block, so the block-diagonal joint system decouples and all
solvers run per block: minimum-norm least squares, orthogonal matching
pursuit, and basis-pursuit denoising via ADMM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bem import FreqBasis, PartialFourier
from .channel import FreqChannel
from .ofdm import TxFrame

LS_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class MeasurementSystem:
    """Per-cell pilot measurement blocks and their observations."""

    blocks: dict[int, np.ndarray]
    observations: dict[int, np.ndarray]
    num_taps: int

    def __post_init__(self) -> None:
        for cell, block in self.blocks.items():
            obs = self.observations[cell]
            if block.shape != (obs.size, self.num_taps):
                raise ValueError("block dimension mismatch")

    @property
    def cells(self) -> list[int]:
        return sorted(self.blocks)

    def full_matrix(self) -> np.ndarray:
        """Assembled block-diagonal measurement matrix."""
        rows = sum(self.blocks[c].shape[0] for c in self.cells)
        cols = self.num_taps * len(self.cells)
        full = np.zeros((rows, cols), dtype=complex)
        r = 0
        for i, cell in enumerate(self.cells):
            block = self.blocks[cell]
            full[r : r + block.shape[0], i * self.num_taps : (i + 1) * self.num_taps] = block
            r += block.shape[0]
        return full

    def full_observation(self) -> np.ndarray:
        return np.concatenate([self.observations[c] for c in self.cells])


def build_measurement(
    frames: dict[int, TxFrame],
    pilot_patterns: dict[int, np.ndarray],
    fourier: PartialFourier,
    observations: dict[int, np.ndarray],
) -> MeasurementSystem:
    """Assemble diag(x(w)) F_L(w, :) blocks and pilot-row observations.

    ``observations`` maps each cell to its full interference-eliminated
    K-vector; only the pilot rows are kept.  Cells absent from
    ``observations`` are simply not estimated (their coefficients are
    zero by convention).
    """
    blocks: dict[int, np.ndarray] = {}
    obs: dict[int, np.ndarray] = {}
    for cell in sorted(observations):
        w = np.asarray(pilot_patterns[cell], dtype=np.int64)
        if w.size and (w.min() < 0 or w.max() >= fourier.num_subcarriers):
            raise ValueError("pilot pattern outside subcarrier range")
        vec = observations[cell]
        if vec.size != fourier.num_subcarriers:
            raise ValueError("observation dimension mismatch")
        blocks[cell] = frames[cell].symbols[w, None] * fourier.rows(w)
        obs[cell] = vec[w]
    return MeasurementSystem(blocks=blocks, observations=obs, num_taps=fourier.num_taps)


@dataclass
class EstimateResult:
    """Recovered per-cell coefficients plus solver bookkeeping."""

    coefficients: dict[int, np.ndarray]
    supports: dict[int, np.ndarray]
    solver_meta: dict[int, dict]

    def coefficient(self, cell: int, num_taps: int) -> np.ndarray:
        """Coefficients for ``cell``, zeros if that cell was not estimated."""
        if cell in self.coefficients:
            return self.coefficients[cell]
        return np.zeros(num_taps, dtype=complex)


def solve_ls(system: MeasurementSystem) -> EstimateResult:
    """Pseudo-inverse (minimum-norm) solution per block.

    Underdetermined blocks return the minimum-norm solution; a block
    whose conditioning exceeds the limit is flagged, not rejected.
    """
    coeffs, supports, meta = {}, {}, {}
    for cell in system.cells:
        block = system.blocks[cell]
        y = system.observations[cell]
        sol, _, rank, svals = np.linalg.lstsq(block, y, rcond=None)
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else math.inf
        coeffs[cell] = sol
        supports[cell] = np.flatnonzero(np.abs(sol) > 0)
        meta[cell] = {
            "iterations": 1,
            "residual_norm": float(np.linalg.norm(y - block @ sol)),
            "rank": int(rank),
            "condition_warning": bool(cond > LS_CONDITION_LIMIT or rank < min(block.shape)),
        }
    return EstimateResult(coefficients=coeffs, supports=supports, solver_meta=meta)


def _omp_block(
    block: np.ndarray,
    y: np.ndarray,
    sparsity: int | None,
    residual_tol: float | None,
    max_atoms: int,
) -> tuple[np.ndarray, np.ndarray, dict]:
    num_taps = block.shape[1]
    col_norms = np.linalg.norm(block, axis=0)
    col_norms[col_norms == 0] = 1.0
    support: list[int] = []
    residual = y.copy()
    sol_support = np.zeros(0, dtype=complex)
    limit = sparsity if sparsity is not None and residual_tol is None else max_atoms
    floor = sparsity or 0
    # a residual at numerical zero never justifies further atoms
    exact_floor = 1e-12 * max(1.0, float(np.linalg.norm(y)))
    while len(support) < limit:
        res_norm = np.linalg.norm(residual)
        if res_norm <= exact_floor:
            break
        if (
            residual_tol is not None
            and len(support) >= floor
            and res_norm <= residual_tol
        ):
            break
        scores = np.abs(block.conj().T @ residual) / col_norms
        scores[support] = -1.0
        support.append(int(np.argmax(scores)))
        sub = block[:, support]
        sol_support, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ sol_support
    coeff = np.zeros(num_taps, dtype=complex)
    coeff[support] = sol_support
    res_norm = float(np.linalg.norm(residual))
    meta = {
        "iterations": len(support),
        "residual_norm": res_norm,
        "low_confidence": bool(
            residual_tol is not None and res_norm > max(residual_tol, exact_floor)
        ),
    }
    return coeff, np.array(sorted(support)), meta


def solve_omp(
    system: MeasurementSystem,
    sparsity: int | None = None,
    residual_tol: float | None = None,
    max_atoms: int | None = None,
) -> EstimateResult:
    """Greedy per-block recovery.

    With only ``sparsity`` given, selection stops at that many atoms.
    With only ``residual_tol``, it stops at the tolerance, capped at
    ``max_atoms`` (low-confidence flag if the cap is hit first).  With
    both, the sparsity acts as a floor and selection continues while the
    residual exceeds the tolerance, up to the cap; this rescues greedy
    misses whose residual stays above the noise floor.
    """
    if sparsity is None and residual_tol is None:
        raise ValueError("need a sparsity target or a residual tolerance")
    coeffs, supports, meta = {}, {}, {}
    for cell in system.cells:
        block = system.blocks[cell]
        cap = max_atoms if max_atoms is not None else min(block.shape)
        coeffs[cell], supports[cell], meta[cell] = _omp_block(
            block, system.observations[cell], sparsity, residual_tol, cap
        )
    return EstimateResult(coefficients=coeffs, supports=supports, solver_meta=meta)


def omp_residual_tol(num_pilots: int, sparsity: int, noise_std: float) -> float:
    """Discrepancy-based stopping level: expected residual norm after the
    true support is fitted, plus two standard deviations of slack."""
    dof = max(1, num_pilots - sparsity)
    return noise_std * (math.sqrt(dof) + 2.0)


def bpdn_epsilon(num_measurements: int, noise_std: float) -> float:
    """Discrepancy-principle residual radius for basis-pursuit denoising."""
    m = num_measurements
    return noise_std * math.sqrt(m) * math.sqrt(1.0 + 2.0 * math.sqrt(2.0) / math.sqrt(m))


def _soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    mag = np.abs(v)
    scale = np.maximum(mag - kappa, 0.0) / np.where(mag > 0, mag, 1.0)
    return v * scale


def bpdn_gram_inverse(block: np.ndarray) -> np.ndarray:
    """Precomputed (I + A^H A)^-1 on the column-normalized block."""
    scale = float(np.linalg.norm(block, axis=0).mean())
    scaled = block / scale
    num_taps = block.shape[1]
    return np.linalg.inv(np.eye(num_taps) + scaled.conj().T @ scaled)


def _bpdn_block(
    block: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    rho: float,
    max_iter: int,
    tol: float,
    gram_inv: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    if np.linalg.norm(y) <= epsilon:
        return np.zeros(block.shape[1], dtype=complex), {
            "iterations": 0,
            "residual_norm": float(np.linalg.norm(y)),
            "converged": True,
        }
    # normalize columns so a unit rho is well scaled, then undo at the end
    scale = float(np.linalg.norm(block, axis=0).mean())
    a = block / scale
    y_s = y / scale
    eps_s = epsilon / scale
    num_taps = block.shape[1]
    if gram_inv is None:
        gram_inv = np.linalg.inv(np.eye(num_taps) + a.conj().T @ a)
    ah = a.conj().T
    c = np.zeros(num_taps, dtype=complex)
    z = np.zeros(num_taps, dtype=complex)
    wvar = y_s.copy()
    u_z = np.zeros(num_taps, dtype=complex)
    u_w = np.zeros(y.size, dtype=complex)
    prev_obj = math.inf
    converged = False
    iterations = max_iter
    y_norm = max(1.0, float(np.linalg.norm(y_s)))
    for it in range(1, max_iter + 1):
        c = gram_inv @ ((z - u_z) + ah @ (wvar - u_w))
        bc = a @ c
        z_old, w_old = z, wvar
        z = _soft_threshold(c + u_z, 1.0 / rho)
        v = bc + u_w
        dev = v - y_s
        dev_norm = np.linalg.norm(dev)
        wvar = y_s + dev * min(1.0, eps_s / dev_norm) if dev_norm > 0 else v
        u_z = u_z + c - z
        u_w = u_w + bc - wvar
        obj = float(np.sum(np.abs(z)))
        primal = max(np.linalg.norm(c - z), np.linalg.norm(bc - wvar))
        dual = rho * max(np.linalg.norm(z - z_old), np.linalg.norm(wvar - w_old))
        if abs(prev_obj - obj) <= tol * max(obj, 1e-12) and primal <= 1e-6 * y_norm:
            converged = True
            iterations = it
            break
        # residual balancing keeps the splitting well conditioned
        if it % 10 == 0 and dual > 0:
            if primal > 10.0 * dual:
                rho *= 2.0
                u_z /= 2.0
                u_w /= 2.0
            elif dual > 10.0 * primal:
                rho /= 2.0
                u_z *= 2.0
                u_w *= 2.0
        prev_obj = obj
    res = float(np.linalg.norm(y - block @ z))
    return z, {"iterations": iterations, "residual_norm": res, "converged": converged}


def solve_bpdn(
    system: MeasurementSystem,
    epsilon: float,
    rho: float = 20.0,
    max_iter: int = 2000,
    tol: float = 1e-8,
    factor_cache: dict[int, np.ndarray] | None = None,
) -> EstimateResult:
    """l1-minimization subject to a residual ball, solved per block by ADMM.

    Convergence requires both a relative objective change below ``tol``
    and small splitting residuals; hitting the iteration cap returns the
    current iterate with a warning flag.  ``factor_cache`` lets repeated
    solves against fixed blocks reuse the Cholesky factor.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    coeffs, supports, meta = {}, {}, {}
    for cell in system.cells:
        block = system.blocks[cell]
        gram_inv = None
        if factor_cache is not None:
            if cell not in factor_cache:
                factor_cache[cell] = bpdn_gram_inverse(block)
            gram_inv = factor_cache[cell]
        sol, info = _bpdn_block(
            block, system.observations[cell], epsilon, rho, max_iter, tol, gram_inv
        )
        coeffs[cell] = sol
        supports[cell] = np.flatnonzero(np.abs(sol) > 1e-8 * max(1.0, np.abs(sol).max()))
        meta[cell] = info
    return EstimateResult(coefficients=coeffs, supports=supports, solver_meta=meta)


def reconstruct(
    result: EstimateResult,
    basis_images: FreqBasis,
    dominant_indices: dict[int, int],
    fourier: PartialFourier,
) -> dict[int, FreqChannel]:
    """Rebuild dense frequency-domain channel estimates from coefficients."""
    out: dict[int, FreqChannel] = {}
    for cell, q in dominant_indices.items():
        coeff = result.coefficient(cell, fourier.num_taps)
        response = fourier.response(coeff)
        matrix = basis_images.d_matrices[q] @ np.diag(response)
        out[cell] = FreqChannel(matrix=matrix)
    return out


def mse(true_channels: list[np.ndarray], estimates: list[np.ndarray]) -> float:
    """Average squared Frobenius error normalized by K^2 per realization."""
    if len(true_channels) != len(estimates):
        raise ValueError("mismatched realization counts")
    if not true_channels:
        raise ValueError("need at least one realization")
    total = 0.0
    for h, h_hat in zip(true_channels, estimates):
        if h.shape != h_hat.shape:
            raise ValueError("shape mismatch")
        total += float(np.linalg.norm(h - h_hat) ** 2) / (h.shape[0] ** 2)
    return total / len(true_channels)
