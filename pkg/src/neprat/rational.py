"""Barycentric rational functions, their state-space realizations, and poles.

A fit of ``s`` scalar functions with a shared support set is stored as one
:class:`BarycentricRational` whose ``values`` matrix has one row per function.
Rows hold the *scaled* samples used during fitting; the per-function ``scale``
factor is reapplied on evaluation so callers always see the original function.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import PoleEvaluationError


@dataclass
class BarycentricRational:
    """Shared-support barycentric rational interpolant of one or more functions.

    Fields:
        support: complex support points ``z_j`` (length m, pairwise distinct).
        weights: complex weights ``w_j`` with unit 2-norm after every solve.
        values:  (s, m) matrix of scaled samples; row i holds g_i(z_j)/scale[i].
        scale:   per-function positive scaling applied before fitting.
    """

    support: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    scale: np.ndarray = None
    converged: bool = True
    error_history: np.ndarray = field(default=None, repr=False)
    weight_history: list = field(default=None, repr=False)

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=complex).ravel()
        self.weights = np.asarray(self.weights, dtype=complex).ravel()
        self.values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        m = self.support.size
        if m < 1:
            raise ValueError("need at least one support point")
        if self.weights.size != m or self.values.shape[1] != m:
            raise ValueError("support/weights/values size mismatch")
        if len(np.unique(self.support)) != m:
            raise ValueError("support points must be pairwise distinct")
        if self.scale is None:
            self.scale = np.ones(self.values.shape[0])
        else:
            self.scale = np.asarray(self.scale, dtype=float).ravel()
            if self.scale.size != self.values.shape[0]:
                raise ValueError("scale length must equal the number of functions")

    @property
    def num_functions(self):
        return self.values.shape[0]

    @property
    def num_support(self):
        return self.support.size

    @property
    def num_poles(self):
        return self.support.size - 1

    def evaluate(self, lam, function_index=0):
        return eval_barycentric(self, function_index, lam)

    def evaluate_all(self, lam):
        """Evaluate every function; returns shape (s,) for scalar lam, else (s, npts)."""
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
        out = np.vstack([_eval_vector(self, i, lam_arr) for i in range(self.num_functions)])
        return out[:, 0] if np.isscalar(lam) or np.ndim(lam) == 0 else out


def _eval_vector(r, i, lam_arr):
    C = lam_arr[:, None] - r.support[None, :]
    hit_rows, hit_cols = np.nonzero(C == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if hit_rows.size:
            C[hit_rows, hit_cols] = 1.0
        C = 1.0 / C
        num = C @ (r.weights * r.values[i])
        den = C @ r.weights
        out = r.scale[i] * num / den
    if hit_rows.size:
        out[hit_rows] = r.scale[i] * r.values[i, hit_cols]
    bad = ~np.isfinite(out)
    if bad.any():
        raise PoleEvaluationError(
            f"barycentric denominator vanished at {lam_arr[bad][0]}"
        )
    return out


def eval_barycentric(r, function_index, lam):
    """Evaluate function ``function_index`` of ``r`` at scalar or array ``lam``.

    At a support point the stored (rescaled) sample is returned exactly;
    elsewhere the quotient of the weighted partial fractions is used.  A zero
    denominator away from the support raises :class:`PoleEvaluationError`.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
    out = _eval_vector(r, function_index, lam_arr)
    if np.isscalar(lam) or np.ndim(lam) == 0:
        return complex(out[0])
    return out


@dataclass
class StateSpaceRational:
    """Realization r(lam) = a^T (E - lam F)^{-1} b of a barycentric rational.

    E carries the weight row and a bidiagonal of support points; F has a zero
    first row and a -1/+1 bidiagonal; b is the first unit vector.  E and F may
    be shared between several functions fitted on one support set.
    """

    a: np.ndarray
    b: np.ndarray
    E: np.ndarray
    F: np.ndarray

    @property
    def size(self):
        return self.a.size

    def evaluate(self, lam):
        lam = complex(lam)
        try:
            x = np.linalg.solve(self.E - lam * self.F, self.b)
        except np.linalg.LinAlgError as exc:
            raise PoleEvaluationError(f"realization pencil singular at {lam}") from exc
        return complex(self.a @ x)

    def resolvent(self, lam):
        """The vector (E - lam F)^{-1} b."""
        return np.linalg.solve(self.E - lam * self.F, self.b)


def realization_pencil(r):
    """The (E, F, b) triple shared by all functions of a fit."""
    m = r.num_support
    z, w = r.support, r.weights
    E = np.zeros((m, m), dtype=complex)
    F = np.zeros((m, m), dtype=complex)
    E[0, :] = w
    for j in range(1, m):
        E[j, j - 1] = -z[j - 1]
        E[j, j] = z[j]
        F[j, j - 1] = -1.0
        F[j, j] = 1.0
    b = np.zeros(m, dtype=complex)
    b[0] = 1.0
    return E, F, b


def to_state_space(r, function_index=0, pencil=None):
    """Convert one function of a barycentric fit to its state-space form."""
    E, F, b = realization_pencil(r) if pencil is None else pencil
    a = r.values[function_index] * r.weights * r.scale[function_index]
    return StateSpaceRational(a=a.astype(complex), b=b, E=E, F=F)


def poles(r):
    """Finite poles of a barycentric rational, via the arrowhead eigenproblem.

    Returns an empty array for a single support point.  Spurious infinite
    eigenvalues of the (m+1) x (m+1) pencil are discarded, as are eigenvalues
    whose magnitude exceeds 1e13 times the support-set span.
    """
    m = r.num_support
    if m < 2:
        return np.zeros(0, dtype=complex)
    z, w = r.support, r.weights
    E = np.zeros((m + 1, m + 1), dtype=complex)
    E[0, 1:] = w
    E[1:, 0] = 1.0
    E[np.arange(1, m + 1), np.arange(1, m + 1)] = z
    B = np.eye(m + 1, dtype=complex)
    B[0, 0] = 0.0
    ev = scipy.linalg.eigvals(E, B)
    span = max(np.abs(z - z.mean()).max() * 2.0, np.abs(z).max(), 1.0)
    ev = ev[np.isfinite(ev)]
    ev = ev[np.abs(ev) < 1e13 * span]
    return ev[np.lexsort((ev.imag, ev.real))]
