"""Greedy adaptive rational fitting of one or many scalar functions.

The single-function and set-valued fitters share one core loop: pick the
active sample with the worst residual as the next support point, remove its
rows from the Loewner least-squares matrix, append the new column, and take
the weight vector as the right singular vector of the small QR factor for the
smallest singular value.  The tall orthonormal factor is updated incrementally
(rows removed, Gram-Schmidt appended columns) with a Cholesky-based
reorthogonalization, so only small matrices are ever decomposed.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg

from .errors import InvalidSamplesError, NumericalDegeneracyError
from .rational import BarycentricRational
from .sampling import SampleSet

logger = logging.getLogger(__name__)

DEFAULT_WEIGHT_FLOOR = 1e-13


class LoewnerAccumulator:
    """Incrementally maintained QR factorization of a tall Loewner matrix.

    State:
        q_basis: stored tall factor; the orthonormal basis is q_basis @ s_accum.
        h_small: m x m upper-triangular small factor, kept current with every
            row-removal compensation, so that the represented matrix is
            q_basis @ s_accum @ h_small.
        s_accum: accumulated inverse-Cholesky product that re-orthonormalizes
            q_basis without ever touching its long columns.
        row_labels: caller bookkeeping, one entry per current row.
    """

    def __init__(self, row_labels):
        self.row_labels = list(row_labels)
        n = len(self.row_labels)
        self.q_basis = np.zeros((n, 0), dtype=complex)
        self.h_small = np.zeros((0, 0), dtype=complex)
        self.s_accum = np.zeros((0, 0), dtype=complex)
        self.rebuilds = 0

    @property
    def num_columns(self):
        return self.h_small.shape[0]

    @property
    def num_rows(self):
        return self.q_basis.shape[0]

    def orthonormal_basis(self):
        return self.q_basis @ self.s_accum

    def small_matrix(self):
        """The small factor whose right singular vectors match the full matrix."""
        return self.h_small

    def reconstruct(self):
        """Densely reassemble the represented Loewner matrix (testing/fallback)."""
        return self.q_basis @ (self.s_accum @ self.h_small)

    def _remove_rows(self, removed):
        m = self.num_columns
        removed = np.asarray(removed, dtype=int)
        keep = np.setdiff1d(np.arange(self.num_rows), removed)
        if m == 0:
            self.q_basis = self.q_basis[keep]
            return True
        q_removed = self.q_basis[removed] @ self.s_accum
        gram = np.eye(m, dtype=complex) - q_removed.conj().T @ q_removed
        try:
            chol = scipy.linalg.cholesky(gram, lower=False)
        except scipy.linalg.LinAlgError:
            return False
        if np.abs(np.diag(chol)).min() < 1e-7:
            # nearly all mass in some direction was removed; the inverse
            # Cholesky update would be too ill-conditioned to trust
            return False
        self.q_basis = self.q_basis[keep]
        self.h_small = chol @ self.h_small
        self.s_accum = self.s_accum @ np.linalg.inv(chol)
        return True

    def _append_column(self, column):
        m = self.num_columns
        c = np.asarray(column, dtype=complex).ravel()
        if c.size != self.num_rows:
            raise ValueError("column length does not match current row count")
        h = np.zeros(m, dtype=complex)
        for _ in range(2):  # classical Gram-Schmidt with one reorthogonalization
            proj = self.s_accum.conj().T @ (self.q_basis.conj().T @ c)
            c = c - self.q_basis @ (self.s_accum @ proj)
            h += proj
        beta = np.linalg.norm(c)
        q_new = c / beta if beta > 0 else c
        self.q_basis = np.hstack([self.q_basis, q_new[:, None]])
        h_next = np.zeros((m + 1, m + 1), dtype=complex)
        h_next[:m, :m] = self.h_small
        h_next[:m, m] = h
        h_next[m, m] = beta
        self.h_small = h_next
        s_next = np.zeros((m + 1, m + 1), dtype=complex)
        s_next[:m, :m] = self.s_accum
        s_next[m, m] = 1.0
        self.s_accum = s_next

    def _rebuild(self, removed, column):
        self.rebuilds += 1
        logger.warning(
            "Loewner QR update lost orthogonality; refactorizing %d x %d explicitly",
            self.num_rows, self.num_columns + 1,
        )
        explicit = self.reconstruct()
        keep = np.setdiff1d(np.arange(self.num_rows), np.asarray(removed, dtype=int))
        explicit = np.hstack([explicit[keep], np.asarray(column, complex).reshape(-1, 1)])
        q, h = scipy.linalg.qr(explicit, mode="economic")
        self.q_basis = q
        self.h_small = h
        self.s_accum = np.eye(h.shape[0], dtype=complex)

    def push(self, new_column, removed_rows=()):
        """Remove the given rows, then orthogonalize and append one column."""
        removed = list(removed_rows)
        if removed:
            labels = np.asarray(self.row_labels, dtype=object)
            self.row_labels = list(np.delete(labels, removed))
        if self._remove_rows(removed):
            self._append_column(new_column)
        else:
            self._rebuild(removed, new_column)
        return self

    def solve_weights(self):
        """Unit-norm weight vector minimizing the stacked linearized residual."""
        h = self.h_small
        if h.size == 0:
            raise NumericalDegeneracyError("accumulator holds no columns")
        if not np.any(h):
            raise NumericalDegeneracyError("all-zero least-squares factor")
        _, _, vh = np.linalg.svd(h)
        return _fix_phase(vh[-1].conj())


def push_support(acc, new_column, removed_rows=()):
    """Functional wrapper around :meth:`LoewnerAccumulator.push`."""
    return acc.push(new_column, removed_rows)


def solve_weights(acc):
    """Functional wrapper around :meth:`LoewnerAccumulator.solve_weights`."""
    return acc.solve_weights()


def _fix_phase(w):
    # make the largest-magnitude entry real and positive for reproducibility
    i = int(np.argmax(np.abs(w)))
    piv = w[i]
    if piv == 0:
        raise NumericalDegeneracyError("zero weight vector")
    return w * (abs(piv) / piv)


def _values_on(func, points):
    try:
        vals = np.asarray(func(points), dtype=complex)
        if vals.shape == points.shape:
            return vals
    except Exception:
        pass
    return np.array([complex(func(p)) for p in points], dtype=complex)


def _as_sample_set(samples):
    if isinstance(samples, SampleSet):
        return samples
    return SampleSet(np.asarray(samples))


def set_valued_aaa(funcs, samples, tol=1e-13, max_degree=100, cleanup=True,
                   weight_floor=DEFAULT_WEIGHT_FLOOR):
    """Fit several scalar functions with shared support points and weights.

    Every function is scaled by the reciprocal of its maximum modulus on the
    sample set before fitting; the greedy step picks the active sample where
    the largest scaled residual over all functions is attained (lowest index
    on ties), and the shared weight vector minimizes the 2-norm of the stacked
    linearized residual under a unit-norm constraint.  Iteration stops once
    every function's scaled maximum deviation over the active samples is at
    most ``tol``, or with ``converged=False`` once ``max_degree + 1`` support
    points have been used.

    Sample points at which any function is non-finite are rejected up front;
    a function that vanishes identically on the samples is dropped from the
    fit (with a warning) and represented by a zero row.

    Args:
        funcs: list of callables of one complex argument (array-aware or not).
        samples: a :class:`SampleSet` or an array of complex points.
        tol: relative target for the maximum pointwise deviation.
        max_degree: cap on the number of poles (= support points - 1).
        cleanup: run :func:`remove_doublets` on the result.
        weight_floor: relative weight threshold used by the cleanup pass.

    Returns:
        A :class:`BarycentricRational` with one values row per input function.
    """
    sample_set = _as_sample_set(samples)
    if len(funcs) < 1:
        raise InvalidSamplesError("need at least one function")
    pts = sample_set.points
    raw = np.vstack([_values_on(g, pts) for g in funcs])

    finite = np.isfinite(raw).all(axis=0)
    if finite.sum() < 2:
        raise InvalidSamplesError("fewer than 2 sample points with finite values")
    if not finite.all():
        logger.warning("rejecting %d sample points with non-finite values",
                       int((~finite).sum()))
    pts = pts[finite]
    raw = raw[:, finite]

    s, npts = raw.shape
    scale = np.max(np.abs(raw), axis=1)
    zero_funcs = scale == 0
    if zero_funcs.any():
        logger.warning("dropping %d identically-zero function(s) from the fit",
                       int(zero_funcs.sum()))
    scale = np.where(zero_funcs, 1.0, scale)
    scaled = raw / scale[:, None]
    fit_rows = np.flatnonzero(~zero_funcs)
    if fit_rows.size == 0:
        r = BarycentricRational(pts[:1], np.array([1.0]), scaled[:, :1], scale,
                                converged=True)
        r.error_history = np.zeros(1)
        r.weight_history = [np.array([1.0 + 0j])]
        return r

    gh = scaled[fit_rows]
    sf = fit_rows.size
    active = np.ones(npts, dtype=bool)
    approx = np.tile(gh.mean(axis=1)[:, None], (1, npts))
    acc = LoewnerAccumulator([(int(f), int(k)) for f in fit_rows for k in range(npts)])
    support_idx = []
    weights = None
    weight_history = []
    error_history = []
    converged = False

    while True:
        residual = np.abs(gh - approx)
        residual[:, ~active] = -1.0
        k_next = int(np.argmax(residual.max(axis=0)))
        support_idx.append(k_next)
        active_idx = np.flatnonzero(active)
        pos = int(np.searchsorted(active_idx, k_next))
        n_act = active_idx.size
        removed = [f * n_act + pos for f in range(sf)]
        active[k_next] = False
        active_idx = np.flatnonzero(active)

        diff = pts[active_idx] - pts[k_next]
        column = np.concatenate([(gh[f, active_idx] - gh[f, k_next]) / diff
                                 for f in range(sf)])
        m = len(support_idx)
        if m == 1 and not np.any(column):
            # constant functions: the residual is already identically zero
            weights = np.array([1.0 + 0j])
            acc.push(column, removed)
        else:
            acc.push(column, removed)
            weights = acc.solve_weights()
        weight_history.append(weights.copy())

        zj = pts[support_idx]
        fj = gh[:, support_idx]
        cauchy = 1.0 / (pts[active_idx, None] - zj[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            num = cauchy @ (weights[None, :] * fj).T
            den = cauchy @ weights
            vals = num / den[:, None]
        vals[~np.isfinite(vals)] = np.inf
        approx = np.zeros_like(gh)
        approx[:, active_idx] = vals.T
        approx[:, support_idx] = fj

        if active_idx.size:
            step_err = float(np.abs(gh[:, active_idx] - approx[:, active_idx]).max())
        else:
            step_err = 0.0
        error_history.append(step_err)
        if step_err <= tol:
            converged = True
            break
        if m >= max_degree + 1 or not active_idx.size:
            break

    values = np.zeros((s, len(support_idx)), dtype=complex)
    values[fit_rows] = gh[:, support_idx]
    result = BarycentricRational(pts[support_idx], weights, values, scale,
                                 converged=converged)
    result.error_history = np.asarray(error_history)
    result.weight_history = weight_history
    if cleanup:
        result = remove_doublets(result, SampleSet(pts), weight_floor)
    return result


def aaa(func, samples, tol=1e-13, max_degree=100, cleanup=True,
        weight_floor=DEFAULT_WEIGHT_FLOOR):
    """Fit a single scalar function; see :func:`set_valued_aaa`."""
    return set_valued_aaa([func], samples, tol=tol, max_degree=max_degree,
                          cleanup=cleanup, weight_floor=weight_floor)


def remove_doublets(r, samples, weight_floor=DEFAULT_WEIGHT_FLOOR):
    """Drop support points with negligible weights and re-solve the weights.

    Support points whose weight magnitude falls below ``weight_floor`` times
    the largest weight magnitude are deleted (they signal spurious
    pole-zero pairs) and the weight vector is recomputed from the explicit
    Loewner matrix over the remaining samples.  At most one pass is made; if
    the pass would delete every support point the input is returned unchanged.
    """
    sample_set = _as_sample_set(samples)
    wmax = np.abs(r.weights).max()
    keep = np.abs(r.weights) >= weight_floor * wmax
    if keep.all():
        return r
    if not keep.any():
        logger.warning("doublet cleanup would remove every support point; skipped")
        return r
    logger.info("doublet cleanup removing %d support point(s)", int((~keep).sum()))
    support = r.support[keep]
    values = r.values[:, keep]
    pts = sample_set.points
    active = ~np.isin(pts, support)
    fit_rows = np.flatnonzero(np.any(values != 0, axis=1))
    if support.size == 1 or not active.any():
        weights = np.array([1.0 + 0j] * support.size)
        weights /= np.linalg.norm(weights)
    else:
        cauchy = 1.0 / (pts[active, None] - support[None, :])
        rows = []
        for f in fit_rows:
            gh_act = _scaled_samples(r, f, pts[active])
            rows.append((gh_act[:, None] - values[f][None, :]) * cauchy)
        loewner = np.vstack(rows)
        _, _, vh = np.linalg.svd(loewner, full_matrices=False)
        weights = _fix_phase(vh[-1].conj())
    out = BarycentricRational(support, weights, values, r.scale,
                              converged=r.converged)
    out.error_history = r.error_history
    out.weight_history = r.weight_history
    return out


def _scaled_samples(r, function_index, pts):
    # Scaled function values on arbitrary points; only used by the cleanup
    # pass, which re-fits on sample points where the original samples are no
    # longer stored.  Falls back to the current interpolant, which matches the
    # function to fit tolerance on the fit set.
    from .rational import eval_barycentric

    return np.asarray(eval_barycentric(r, function_index, pts),
                      dtype=complex) / r.scale[function_index]
