"""Nonlinear eigenvalue problems split into a polynomial part plus scalar-weighted terms.

A problem is A(lam) = P(lam) + sum_i (C_i - lam D_i) g_i(lam), where P is a
matrix polynomial expressed in a degree-graded basis with an associated
(k-1) x k basis pencil, and each g_i is a scalar nonlinearity.  Rational
surrogates replace each g_i by a barycentric interpolant fitted on a sampled
region; fits may be shared between terms (grouped fitting), in which case the
terms also share one state-space realization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .aaa import set_valued_aaa
from .errors import EvaluationError, InvalidSamplesError
from .rational import (BarycentricRational, StateSpaceRational,
                       eval_barycentric, poles, realization_pencil,
                       to_state_space)
from .sampling import Region

logger = logging.getLogger(__name__)

_RANK_TOL = 1e-12


@dataclass
class PolynomialPart:
    """P(lam) = sum_i (A_i - lam B_i) f_i(lam) over a monomial or Chebyshev basis.

    The basis functions satisfy (M - lam N) f(lam) = 0 with a basis pencil of
    full row rank k-1 for every lam, and f_0 = 1.
    """

    coefficients_a: list
    coefficients_b: list
    basis: str = "monomial"
    interval: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if self.basis not in ("monomial", "chebyshev"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if len(self.coefficients_a) != len(self.coefficients_b):
            raise ValueError("need matching A and B coefficient lists")
        if not self.coefficients_a:
            raise ValueError("polynomial part needs at least one coefficient")
        self.coefficients_a = [np.atleast_2d(np.asarray(a)) for a in self.coefficients_a]
        self.coefficients_b = [np.atleast_2d(np.asarray(b)) for b in self.coefficients_b]
        n = self.coefficients_a[0].shape[0]
        for mat in self.coefficients_a + self.coefficients_b:
            if mat.shape != (n, n):
                raise ValueError("all coefficients must be square of one size")
        self._check_pencil_rank()

    @property
    def k(self):
        return len(self.coefficients_a)

    @property
    def n(self):
        return self.coefficients_a[0].shape[0]

    def _chebyshev_map(self):
        a, b = self.interval
        return 2.0 / (b - a), -(a + b) / (b - a)

    def basis_pencil(self):
        """The (k-1) x k pencil (M, N) encoding the basis recurrence."""
        k = self.k
        M = np.zeros((k - 1, k), dtype=complex)
        N = np.zeros((k - 1, k), dtype=complex)
        if self.basis == "monomial":
            # rows: lam*f_{i-1} - f_i = 0
            for i in range(1, k):
                M[i - 1, i] = -1.0
                N[i - 1, i - 1] = -1.0
            return M, N
        c1, c0 = self._chebyshev_map()
        # t = c1*lam + c0;  T_1 = t*T_0;  T_i = 2t*T_{i-1} - T_{i-2}
        if k >= 2:
            M[0, 0] = -c0
            M[0, 1] = 1.0
            N[0, 0] = c1
        for i in range(2, k):
            M[i - 1, i - 2] = 1.0
            M[i - 1, i - 1] = -2.0 * c0
            M[i - 1, i] = 1.0
            N[i - 1, i - 1] = 2.0 * c1
        return M, N

    def _check_pencil_rank(self):
        if self.k == 1:
            return
        M, N = self.basis_pencil()
        scale = max(abs(self.interval[0]), abs(self.interval[1]), 1.0)
        for probe in (0.318309 + 0.577215j, -1.414213 + 0.693147j, 2.718281 - 0.301029j):
            mu = probe * scale
            smin = np.linalg.svd(M - mu * N, compute_uv=False)[-1]
            if smin <= 1e-12 * max(1.0, abs(mu)):
                raise ValueError(f"basis pencil rank-deficient at {mu}")

    def basis_values(self, lam):
        """f(lam); shape (k,) for scalar lam, else (k, npts)."""
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
        out = np.empty((self.k, lam_arr.size), dtype=complex)
        out[0] = 1.0
        if self.basis == "monomial":
            for i in range(1, self.k):
                out[i] = out[i - 1] * lam_arr
        else:
            c1, c0 = self._chebyshev_map()
            t = c1 * lam_arr + c0
            if self.k > 1:
                out[1] = t
            for i in range(2, self.k):
                out[i] = 2.0 * t * out[i - 1] - out[i - 2]
        return out[:, 0] if np.ndim(lam) == 0 else out

    def evaluate(self, lam):
        lam = complex(lam)
        f = self.basis_values(lam)
        out = np.zeros_like(self.coefficients_a[0], dtype=complex)
        for i in range(self.k):
            out += (self.coefficients_a[i] - lam * self.coefficients_b[i]) * f[i]
        return out


@dataclass
class NonlinearTerm:
    """One contribution (C - lam D) g(lam), optionally with low-rank factors.

    When factors are present, C - lam D = (C_tall - lam D_tall) Zstar^* with
    Zstar having orthonormal columns spanning row(C) + row(D).
    """

    C: np.ndarray
    D: np.ndarray
    g: object
    C_tall: np.ndarray = None
    D_tall: np.ndarray = None
    Zstar: np.ndarray = None

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=complex))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=complex))
        if self.C.shape != self.D.shape or self.C.shape[0] != self.C.shape[1]:
            raise ValueError("C and D must be square matrices of one size")

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def has_factors(self):
        return self.Zstar is not None

    @property
    def rank_width(self):
        return self.Zstar.shape[1] if self.has_factors else self.n

    def coefficient(self, lam):
        return self.C - complex(lam) * self.D


def low_rank_factorize(term, rank_tol=_RANK_TOL):
    """Attach an orthonormal row-space factorization to a term.

    Computes Zstar with orthonormal columns spanning row(C) + row(D) via an
    SVD of [C^*, D^*] truncated at ``rank_tol`` times the largest singular
    value, and sets C_tall = C Zstar, D_tall = D Zstar.  A zero term gets
    width zero; full-rank terms simply get width n.
    """
    stacked = np.hstack([term.C.conj().T, term.D.conj().T])
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        width = 0
    else:
        width = int(np.count_nonzero(s > rank_tol * s[0]))
    z = u[:, :width]
    return NonlinearTerm(C=term.C, D=term.D, g=term.g,
                         C_tall=term.C @ z, D_tall=term.D @ z, Zstar=z)


@dataclass
class ApproxSettings:
    mode: str = "set-valued"
    tol: float = 1e-13
    max_degree: int = 100
    groups: list = None


@dataclass
class NepProblem:
    """A(lam) = P(lam) + sum_i (C_i - lam D_i) g_i(lam) on a sampled region."""

    poly: PolynomialPart
    terms: list
    region: Region
    name: str = ""
    approx: ApproxSettings = field(default_factory=ApproxSettings)

    def __post_init__(self):
        for i, t in enumerate(self.terms):
            if t.n != self.poly.n:
                raise ValueError(f"term {i} size {t.n} != polynomial size {self.poly.n}")

    @property
    def n(self):
        return self.poly.n

    def evaluate(self, lam):
        """Dense A(lam); scalar-function failures carry the term index."""
        lam = complex(lam)
        out = self.poly.evaluate(lam)
        for i, t in enumerate(self.terms):
            try:
                gval = complex(np.asarray(t.g(lam)).item())
            except Exception as exc:
                raise EvaluationError(f"term {i}: {exc}", term_index=i) from exc
            if not np.isfinite(gval):
                raise EvaluationError(f"term {i}: non-finite value at {lam}",
                                      term_index=i)
            out = out + t.coefficient(lam) * gval
        return out

    def one_norm(self, lam):
        return float(np.abs(self.evaluate(lam)).sum(axis=0).max())


def evaluate_nep(problem, lam):
    """Functional alias for :meth:`NepProblem.evaluate`."""
    return problem.evaluate(lam)


@dataclass
class FitGroup:
    """Terms fitted together: one shared support/weight set and realization."""

    term_indices: list
    rational: BarycentricRational
    _pencil: tuple = field(default=None, repr=False)

    def realization_pencil(self):
        if self._pencil is None:
            self._pencil = realization_pencil(self.rational)
        return self._pencil

    def realization(self, row):
        return to_state_space(self.rational, row, pencil=self.realization_pencil())

    @property
    def num_poles(self):
        return self.rational.num_poles


@dataclass
class ApproximationReport:
    e_f: float
    e_m: float
    degrees: list
    converged: bool
    skipped_test_points: int = 0


@dataclass
class RationalNep:
    """Rational surrogate R(lam) of a problem, with grouped fits and error report."""

    problem: NepProblem
    groups: list
    report: ApproximationReport = None

    def __post_init__(self):
        self._row_of_term = {}
        for gi, grp in enumerate(self.groups):
            for row, ti in enumerate(grp.term_indices):
                self._row_of_term[ti] = (gi, row)

    @property
    def n(self):
        return self.problem.n

    def group_of_term(self, term_index):
        gi, row = self._row_of_term[term_index]
        return self.groups[gi], row

    def term_rational_value(self, term_index, lam):
        grp, row = self.group_of_term(term_index)
        return eval_barycentric(grp.rational, row, lam)

    def term_realization(self, term_index):
        grp, row = self.group_of_term(term_index)
        return grp.realization(row)

    def evaluate(self, lam, path="barycentric"):
        """Dense R(lam).  ``path`` selects the barycentric or state-space route."""
        lam = complex(lam)
        out = self.problem.poly.evaluate(lam)
        for ti, term in enumerate(self.problem.terms):
            if path == "barycentric":
                rv = self.term_rational_value(ti, lam)
            else:
                rv = self.term_realization(ti).evaluate(lam)
            out = out + term.coefficient(lam) * rv
        return out

    def poles(self):
        """Poles of every fit group, in group order."""
        return [poles(grp.rational) for grp in self.groups]

    def all_poles(self):
        gp = self.poles()
        return np.concatenate(gp) if gp else np.zeros(0, dtype=complex)

    # sizes of the three linearization variants
    def full_size(self):
        ell_sum = sum(grp.rational.num_support for grp in self.groups
                      for _ in grp.term_indices)
        return (self.problem.poly.k + ell_sum) * self.n

    def collapsed_size(self):
        ell_sum = sum(grp.rational.num_support for grp in self.groups)
        return (self.problem.poly.k + ell_sum) * self.n

    def trimmed_size(self):
        rho = sum(grp.rational.num_support * self.problem.terms[ti].rank_width
                  for grp in self.groups for ti in grp.term_indices)
        return self.problem.poly.k * self.n + rho


def _resolve_groups(problem, mode, groups):
    count = len(problem.terms)
    if mode == "per-function":
        return [[i] for i in range(count)]
    if mode == "set-valued":
        return [list(range(count))]
    if mode == "grouped":
        if not groups:
            raise InvalidSamplesError("grouped mode requires an explicit partition")
        seen = sorted(i for g in groups for i in g)
        if seen != list(range(count)):
            raise InvalidSamplesError("groups must partition the term indices")
        return [list(g) for g in groups]
    raise InvalidSamplesError(f"unknown approximation mode {mode!r}")


def approximate(problem, mode=None, tol=None, max_degree=None, groups=None,
                sample_points=None, test_points=None):
    """Fit rational surrogates for every scalar nonlinearity of a problem.

    ``per-function`` fits each term independently, ``set-valued`` fits all
    terms on one shared support set, and ``grouped`` runs one shared fit per
    explicitly given group of term indices.  Defaults come from the problem's
    :class:`ApproxSettings`.  The returned surrogate carries an error report
    computed on fresh test points of the region.
    """
    settings = problem.approx
    mode = settings.mode if mode is None else mode
    tol = settings.tol if tol is None else tol
    max_degree = settings.max_degree if max_degree is None else max_degree
    groups = settings.groups if groups is None else groups

    pts = problem.region.sample_points() if sample_points is None else np.asarray(
        sample_points, dtype=complex)
    fits = []
    converged = True
    for indices in _resolve_groups(problem, mode, groups):
        funcs = [problem.terms[i].g for i in indices]
        rational = set_valued_aaa(funcs, pts, tol=tol, max_degree=max_degree)
        converged = converged and rational.converged
        if not rational.converged:
            logger.warning("fit of terms %s stopped at %d poles without reaching %.1e",
                           indices, rational.num_poles, tol)
        fits.append(FitGroup(term_indices=list(indices), rational=rational))
    surrogate = RationalNep(problem=problem, groups=fits)
    if test_points is None:
        test_points = problem.region.test_points(1000)
    e_f, e_m, skipped = approximation_errors(problem, surrogate, test_points)
    surrogate.report = ApproximationReport(
        e_f=e_f, e_m=e_m,
        degrees=[grp.num_poles for grp in fits],
        converged=converged,
        skipped_test_points=skipped,
    )
    return surrogate


def approximation_errors(problem, surrogate, test_points):
    """Summed relative scalar error and matrix-function error on test points.

    The scalar error aggregates, per function, the squared deviations
    |g_j(s_i) - r_j(s_i)|^2 normalized by the squared magnitudes of g_j over
    the test set; the matrix error aggregates ||A(s) - R(s)||_1^2 relative to
    ||A(s)||_1^2 pointwise.  Points where evaluation fails are skipped and
    counted.
    """
    test_points = np.asarray(test_points, dtype=complex).ravel()
    skipped = 0
    num = np.zeros(len(problem.terms))
    den = np.zeros(len(problem.terms))
    em_sum = 0.0
    usable = []
    for s in test_points:
        try:
            a_mat = problem.evaluate(s)
            r_mat = surrogate.evaluate(s)
        except Exception:
            skipped += 1
            continue
        usable.append(s)
        a1 = np.abs(a_mat).sum(axis=0).max()
        d1 = np.abs(a_mat - r_mat).sum(axis=0).max()
        if a1 > 0:
            em_sum += (d1 / a1) ** 2
    for ti, term in enumerate(problem.terms):
        for s in usable:
            gval = complex(np.asarray(term.g(s)).item())
            rval = surrogate.term_rational_value(ti, s)
            num[ti] += abs(gval - rval) ** 2
            den[ti] += abs(gval) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    e_f = float(np.sqrt(ratios.sum()))
    e_m = float(np.sqrt(em_sum))
    return e_f, e_m, skipped
