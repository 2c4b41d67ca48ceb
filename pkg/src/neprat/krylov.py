"""Rational Krylov iteration on an assembled pencil, with true-residual Ritz pairs.

Each step applies one shift-and-invert solve through the block-UL machinery,
orthogonalizes with one reorthogonalization pass, and extracts Ritz pairs from
the projected Hessenberg pencil.  Residuals are always recomputed on the
original nonlinear problem, not on the linearization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import PoleShiftError, RecoveryFailureError
from .linearization import ul_factorize

logger = logging.getLogger(__name__)

BREAKDOWN_REL = 1e-14


@dataclass
class KrylovState:
    """Orthonormal basis and Hessenberg pair of a rational Krylov run."""

    V: np.ndarray                 # dim x (j+1)
    hbar: np.ndarray              # (j+1) x j
    kbar: np.ndarray              # (j+1) x j
    shifts: np.ndarray            # shift used at each step
    iterations: int
    breakdown: bool = False

    def orthonormality_defect(self):
        g = self.V.conj().T @ self.V
        return float(np.linalg.norm(g - np.eye(g.shape[0])))

    def recurrence_residual(self, pencil):
        """Relative residual of A V hbar = B V kbar for the pencil (A, B)."""
        lhs = np.column_stack([pencil.apply(v, "A") for v in (self.V @ self.hbar).T])
        rhs = np.column_stack([pencil.apply(v, "B") for v in (self.V @ self.kbar).T])
        denom = max(np.linalg.norm(rhs), 1e-300)
        return float(np.linalg.norm(lhs - rhs) / denom)


@dataclass
class RitzPair:
    value: complex
    vector: np.ndarray
    residual: float
    converged: bool
    first_converged_iteration: int = None


def residual_norm(problem, lam, x, variant="relative"):
    """Residual of a candidate eigenpair, measured on the nonlinear problem.

    ``relative`` is ||A(lam) x||_2 / (||A(lam)||_1 ||x||_2); ``absolute`` is
    plain ||A(lam) x||_2 (with x normalized), which stays meaningful for
    1 x 1 problems where the relative form degenerates to one.
    """
    x = np.asarray(x, dtype=complex).ravel()
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("residual of a zero vector is undefined")
    a_mat = problem.evaluate(lam)
    num = float(np.linalg.norm(a_mat @ x))
    if variant == "absolute":
        return num / nx
    one_norm = float(np.abs(a_mat).sum(axis=0).max())
    return num / (one_norm * nx) if one_norm > 0 else 0.0


def _start_vector(dim, v1, seed):
    if v1 is not None:
        v = np.asarray(v1, dtype=complex).ravel()
        if v.size != dim:
            raise ValueError("start vector has wrong length")
    else:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def rational_krylov(pencil, shifts, v1=None, max_iter=30, tol=1e-10,
                    track=0, seed=0, residual_variant="relative"):
    """Run the shift-and-invert rational Krylov iteration.

    Shifts are applied cyclically in the given order; the continuation vector
    at step j is the j-th unit vector, i.e. the previous iteration vector.
    After every step the projected generalized eigenproblem is solved, Ritz
    vectors are lifted and reduced to problem space, and the true nonlinear
    residual is attached.  Iteration stops at ``max_iter``, on numerical
    breakdown, or once ``track`` pairs have converged below ``tol`` (if
    ``track`` > 0).

    Returns (state, history) where history[j] lists the Ritz pairs after
    iteration j+1.
    """
    shifts = [complex(s) for s in np.atleast_1d(np.asarray(shifts, dtype=complex))]
    if not shifts:
        raise ValueError("need at least one shift")
    problem = pencil.problem
    dim = pencil.dim

    factor_cache = {}
    rejected = []
    for s in set(shifts):
        try:
            factor_cache[s] = ul_factorize(pencil, s)
        except PoleShiftError as exc:
            rejected.append((s, exc))
    if len(rejected) == len(set(shifts)):
        raise PoleShiftError(
            "every requested shift collides with a pole: "
            + "; ".join(str(e) for _, e in rejected))
    for s, exc in rejected:
        logger.warning("dropping shift %s: %s", s, exc)
    shifts = [s for s in shifts if s in factor_cache]

    v = _start_vector(dim, v1, seed)
    V = v[:, None]
    hbar = np.zeros((max_iter + 1, max_iter), dtype=complex)
    kbar = np.zeros((max_iter + 1, max_iter), dtype=complex)
    used_shifts = []
    history = []
    breakdown = False

    j = 0
    while j < max_iter:
        sigma = shifts[j % len(shifts)]
        used_shifts.append(sigma)
        w = V[:, -1]
        vhat = factor_cache[sigma].solve(pencil.apply(w, "B"))
        norm_in = np.linalg.norm(vhat)
        h = V.conj().T @ vhat
        vtil = vhat - V @ h
        h2 = V.conj().T @ vtil
        vtil = vtil - V @ h2
        h += h2
        hlast = np.linalg.norm(vtil)
        hbar[: j + 1, j] = h
        hbar[j + 1, j] = hlast
        kbar[: j + 2, j] = sigma * hbar[: j + 2, j]
        kbar[j, j] += 1.0
        j += 1
        if hlast <= BREAKDOWN_REL * norm_in:
            # the subspace became invariant; the dropped bottom entry is
            # negligible, so Ritz extraction still uses this column
            breakdown = True
            logger.info("rational Krylov breakdown at iteration %d", j)
        else:
            V = np.hstack([V, (vtil / hlast)[:, None]])
        pairs = _ritz_pairs(pencil, problem, V, hbar[:, :j], kbar[:, :j],
                            tol, residual_variant)
        history.append(pairs)
        if breakdown or (track and sum(p.converged for p in pairs) >= track):
            break

    cols = V.shape[1]
    state = KrylovState(V=V, hbar=hbar[:cols, :j], kbar=kbar[:cols, :j],
                        shifts=np.array(used_shifts), iterations=j,
                        breakdown=breakdown)
    _mark_first_crossings(history, tol)
    return state, history


def _ritz_pairs(pencil, problem, V, hbar, kbar, tol, residual_variant):
    j = hbar.shape[1]
    h_sq = hbar[:j, :]
    k_sq = kbar[:j, :]
    try:
        values, vectors = scipy.linalg.eig(k_sq, h_sq)
    except scipy.linalg.LinAlgError:
        return []
    pairs = []
    rows = min(V.shape[1], j + 1)
    lift = V[:, :rows] @ hbar[:rows, :]
    for idx in range(values.size):
        lam = values[idx]
        if not np.isfinite(lam):
            continue
        z = lift @ vectors[:, idx]
        try:
            x = pencil.recover_eigenvector(z)
        except RecoveryFailureError:
            continue
        try:
            rho = residual_norm(problem, lam, x, variant=residual_variant)
        except Exception:
            continue
        pairs.append(RitzPair(value=complex(lam), vector=x, residual=rho,
                              converged=bool(rho <= tol)))
    pairs.sort(key=lambda p: (p.value.real, p.value.imag))
    return pairs


def _match_nearest(pairs, lam):
    if not pairs:
        return None
    dists = [abs(p.value - lam) for p in pairs]
    return pairs[int(np.argmin(dists))]


def _trace_back(history, pair):
    """Ancestors of a final pair by nearest-value matching, oldest first."""
    chain = []
    lam = pair.value
    for it in range(len(history) - 1, -1, -1):
        anc = _match_nearest(history[it], lam)
        if anc is None:
            continue
        chain.append((it + 1, anc))
        lam = anc.value
    chain.reverse()
    return chain


def _mark_first_crossings(history, tol):
    """Backfill the iteration at which each final pair first crossed tol."""
    if not history:
        return
    for pair in history[-1]:
        crossing = None
        for it, anc in _trace_back(history, pair):
            if anc.residual <= tol:
                crossing = it
                break
        pair.first_converged_iteration = crossing


def convergence_history(history, top=5):
    """Per-iteration residual rows for the fastest-converging Ritz pairs.

    Pairs are identified in the final iteration (smallest final residual
    first) and traced backwards by nearest-value matching.  Returns rows
    (iteration, pair_id, value, residual).
    """
    if not history:
        raise ValueError("history is empty")
    final = sorted(history[-1], key=lambda p: p.residual)[:top]
    rows = []
    for pair_id, pair in enumerate(final):
        for it, anc in _trace_back(history, pair):
            rows.append((it, pair_id, anc.value, anc.residual))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows
