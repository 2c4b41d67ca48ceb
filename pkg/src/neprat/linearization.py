"""Block linearizations of rational surrogates and their structured shifted solves.

The pencil couples the polynomial basis pencil with one state-space block per
fitted rational term.  Three layouts are supported:

  * ``full``      -- one block of width n per term (identity row-space factor);
  * ``collapsed`` -- one block per fit group, with the group's coefficient
    rows summed, exploiting shared support sets;
  * ``trimmed``   -- one block of width k_i per term, where k_i is the rank of
    the stacked row spaces of C_i and D_i.

Shifted solves go through a block-UL factorization whose only large
factorization is of the n x n matrix R(mu); everything else is k x k or
ell x ell work applied across Kronecker structure.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (DimensionGuardError, PoleShiftError, RecoveryFailureError,
                     ShiftIsEigenvalueError)

logger = logging.getLogger(__name__)

POLE_GUARD_REL = 1e-10


@dataclass
class TailBlock:
    """One realization block: (E, F, b) pencil data plus its coupling rows."""

    E: np.ndarray
    F: np.ndarray
    b: np.ndarray
    WC: np.ndarray      # n x (ell*width) coefficient rows, constant part
    WD: np.ndarray      # n x (ell*width) coefficient rows, lam part
    Zstar: np.ndarray   # n x width orthonormal row-space factor
    term_indices: list

    @property
    def ell(self):
        return self.b.size

    @property
    def width(self):
        return self.Zstar.shape[1]

    @property
    def size(self):
        return self.ell * self.width

    def resolvent(self, lam):
        return np.linalg.solve(self.E - lam * self.F, self.b)

    def coupling(self, x):
        """Apply the constant bottom-left coupling -(b kron I_w) Zstar^* to x."""
        return np.kron(-self.b, self.Zstar.conj().T @ x)


@dataclass
class CorkPencil:
    """Assembled linearization of a rational surrogate."""

    rational: object
    variant: str
    blocks: list
    _poles: np.ndarray = field(default=None, repr=False)

    @property
    def problem(self):
        return self.rational.problem

    @property
    def n(self):
        return self.problem.n

    @property
    def k(self):
        return self.problem.poly.k

    @property
    def dim(self):
        return self.n * self.k + sum(bl.size for bl in self.blocks)

    @property
    def tail_size(self):
        return sum(bl.size for bl in self.blocks)

    def poles(self):
        if self._poles is None:
            self._poles = self.rational.all_poles()
        return self._poles

    def guard_shift(self, mu):
        """Reject shifts too close to a pole of any fitted rational."""
        mu = complex(mu)
        pol = self.poles()
        if pol.size:
            guard = POLE_GUARD_REL * self.problem.region.diameter
            dist = np.abs(pol - mu)
            j = int(np.argmin(dist))
            if dist[j] < guard:
                for gi, grp_poles in enumerate(self.rational.poles()):
                    if grp_poles.size and np.min(np.abs(grp_poles - mu)) < guard:
                        terms = self.rational.groups[gi].term_indices
                        raise PoleShiftError(
                            f"shift {mu} is within {guard:.3e} of pole {pol[j]} "
                            f"of the fit for terms {terms}",
                            shift=mu, pole=pol[j], term_index=terms[0])
        return mu

    # -- dense assembly (verification paths) --------------------------------

    def matrices(self):
        """Dense (Abig, Bbig) with the pencil equal to Abig - lam * Bbig."""
        n, k, dim = self.n, self.k, self.dim
        poly = self.problem.poly
        A = np.zeros((dim, dim), dtype=complex)
        B = np.zeros((dim, dim), dtype=complex)
        A[:n, :n * k] = np.hstack(poly.coefficients_a)
        B[:n, :n * k] = np.hstack(poly.coefficients_b)
        M, N = poly.basis_pencil()
        if k > 1:
            A[n:n * k, :n * k] = np.kron(M, np.eye(n))
            B[n:n * k, :n * k] = np.kron(N, np.eye(n))
        offset = n * k
        for bl in self.blocks:
            sz = bl.size
            A[:n, offset:offset + sz] = bl.WC
            B[:n, offset:offset + sz] = bl.WD
            A[offset:offset + sz, :n] = np.kron(-bl.b[:, None],
                                                bl.Zstar.conj().T)
            A[offset:offset + sz, offset:offset + sz] = np.kron(
                bl.E, np.eye(bl.width))
            B[offset:offset + sz, offset:offset + sz] = np.kron(
                bl.F, np.eye(bl.width))
            offset += sz
        return A, B

    def assemble(self, lam):
        A, B = self.matrices()
        return A - complex(lam) * B

    # -- structured matrix-vector products ----------------------------------

    def _split(self, vec):
        n, k = self.n, self.k
        head = vec[:n * k]
        tails = []
        offset = n * k
        for bl in self.blocks:
            tails.append(vec[offset:offset + bl.size])
            offset += bl.size
        return head, tails

    def apply(self, vec, which="A"):
        """Structured product Abig @ vec or Bbig @ vec."""
        n, k = self.n, self.k
        poly = self.problem.poly
        coeffs = poly.coefficients_a if which == "A" else poly.coefficients_b
        head, tails = self._split(np.asarray(vec, dtype=complex))
        hm = head.reshape(k, n)
        out_top = np.zeros(n, dtype=complex)
        for i in range(k):
            out_top += coeffs[i] @ hm[i]
        for bl, tail in zip(self.blocks, tails):
            W = bl.WC if which == "A" else bl.WD
            out_top += W @ tail
        M, N = poly.basis_pencil()
        basis_pencil = M if which == "A" else N
        out_mid = (basis_pencil @ hm).ravel() if k > 1 else np.zeros(0, complex)
        out_tails = []
        for bl, tail in zip(self.blocks, tails):
            tm = tail.reshape(bl.ell, bl.width)
            block_pencil = bl.E if which == "A" else bl.F
            piece = (block_pencil @ tm).ravel()
            if which == "A":
                piece = piece + bl.coupling(hm[0])
            out_tails.append(piece)
        return np.concatenate([out_top, out_mid] + out_tails)

    # -- eigenvector maps ----------------------------------------------------

    def expand_eigenvector(self, x, lam):
        """Map an n-vector to pencil space along the structured null direction."""
        lam = complex(lam)
        x = np.asarray(x, dtype=complex).ravel()
        f = self.problem.poly.basis_values(lam)
        parts = [np.kron(f, x)]
        for bl in self.blocks:
            try:
                resolvent = bl.resolvent(lam)
            except np.linalg.LinAlgError as exc:
                raise PoleShiftError(
                    f"{lam} is a pole of the realization for terms {bl.term_indices}",
                    shift=lam, term_index=bl.term_indices[0]) from exc
            parts.append(np.kron(resolvent, bl.Zstar.conj().T @ x))
        return np.concatenate(parts)

    def recover_eigenvector(self, z):
        """Leading n-block of a pencil-space vector, normalized deterministically."""
        z = np.asarray(z, dtype=complex).ravel()
        head = z[:self.n]
        norm = np.linalg.norm(head)
        if norm < 1e-12 * np.linalg.norm(z):
            raise RecoveryFailureError("leading block is numerically zero")
        head = head / norm
        j = int(np.argmax(np.abs(head)))
        phase = head[j] / abs(head[j])
        return head / phase


def expand_eigenvector(pencil, x, lam):
    return pencil.expand_eigenvector(x, lam)


def recover_eigenvector(pencil, z):
    return pencil.recover_eigenvector(z)


def build_pencil(rational, variant="trimmed"):
    """Assemble the linearization of a rational surrogate.

    ``full`` and ``trimmed`` get one tail block per term (sharing (E, F, b)
    arrays within a fit group); ``collapsed`` gets one block per group with
    summed coefficient rows.  Terms without stored low-rank factors enter the
    trimmed variant with an identity factor of width n.
    """
    problem = rational.problem
    n = problem.n
    blocks = []
    if variant == "collapsed":
        singles = sum(1 for grp in rational.groups if len(grp.term_indices) == 1)
        if singles == len(rational.groups) and len(rational.groups) > 1:
            logger.info("collapsed variant with singleton fit groups only; "
                        "layout matches the full variant")
        for grp in rational.groups:
            E, F, b = grp.realization_pencil()
            ell = b.size
            WC = np.zeros((n, ell * n), dtype=complex)
            WD = np.zeros((n, ell * n), dtype=complex)
            for row, ti in enumerate(grp.term_indices):
                term = problem.terms[ti]
                a = grp.realization(row).a
                WC += np.kron(a[None, :], term.C)
                WD += np.kron(a[None, :], term.D)
            blocks.append(TailBlock(E=E, F=F, b=b, WC=WC, WD=WD,
                                    Zstar=np.eye(n, dtype=complex),
                                    term_indices=list(grp.term_indices)))
    elif variant in ("full", "trimmed"):
        for grp in rational.groups:
            E, F, b = grp.realization_pencil()
            for row, ti in enumerate(grp.term_indices):
                term = problem.terms[ti]
                a = grp.realization(row).a
                if variant == "trimmed" and term.has_factors:
                    c_tall, d_tall, zstar = term.C_tall, term.D_tall, term.Zstar
                else:
                    c_tall, d_tall = term.C, term.D
                    zstar = np.eye(n, dtype=complex)
                if zstar.shape[1] == 0:
                    logger.info("term %d has zero coefficients; dropped from pencil", ti)
                    continue
                blocks.append(TailBlock(
                    E=E, F=F, b=b,
                    WC=np.kron(a[None, :], c_tall),
                    WD=np.kron(a[None, :], d_tall),
                    Zstar=np.asarray(zstar, dtype=complex),
                    term_indices=[ti]))
    else:
        raise ValueError(f"unknown pencil variant {variant!r}")
    return CorkPencil(rational=rational, variant=variant, blocks=blocks)


# -- block-UL factorization ---------------------------------------------------

@dataclass
class ULFactors:
    """Factorized shifted pencil, ready for repeated structured solves."""

    pencil: CorkPencil
    mu: complex
    order: list            # basis-column permutation, pivot first
    alpha: complex
    r_lu: tuple            # LU of R(mu)
    m1_lu: tuple           # LU of the retained (k-1) x (k-1) basis pencil
    block_lus: list        # LU of each E_g - mu F_g
    top_blocks: list       # A_i - mu B_i in permuted order (pivot first)
    w_blocks: list         # WC_g - mu WD_g per tail block
    m0: np.ndarray         # dropped basis-pencil column at mu, length k-1

    @property
    def pivot(self):
        return self.order[0]

    def _solve_m1(self, rhs_mat):
        if self.m1_lu is None:
            return rhs_mat
        return scipy.linalg.lu_solve(self.m1_lu, rhs_mat)

    def _solve_blocks(self, tails):
        out = []
        for bl, lu, tail in zip(self.pencil.blocks, self.block_lus, tails):
            tm = tail.reshape(bl.ell, bl.width)
            out.append(scipy.linalg.lu_solve(lu, tm).ravel())
        return out

    def _coupling_into_tails(self, x):
        return [bl.coupling(x) for bl in self.pencil.blocks]

    def solve(self, rhs):
        """Solve (Abig - mu Bbig) v = rhs with one n x n solve plus small solves."""
        pencil = self.pencil
        n, k = pencil.n, pencil.k
        rhs = np.asarray(rhs, dtype=complex).ravel()
        if rhs.size != pencil.dim:
            raise ValueError("right-hand side has wrong length")
        rhs0 = rhs[:n]
        rhs1 = rhs[n:n * k]
        tails_in = pencil._split(rhs)[1]

        # apply U(mu)^{-1}: subtract G12 @ G22^{-1} applied to the lower part
        if k > 1:
            t1 = self._solve_m1(rhs1.reshape(k - 1, n))
        else:
            t1 = np.zeros((0, n), dtype=complex)
        coup = self._coupling_into_tails(t1[0] if self._pivot_shifts_f0() else
                                         np.zeros(n, complex))
        adjusted = [tail - c for tail, c in zip(tails_in, coup)]
        t2 = self._solve_blocks(adjusted)
        y0 = rhs0.copy()
        for i in range(1, k):
            y0 -= self.top_blocks[i] @ t1[i - 1]
        for w_blk, tail in zip(self.w_blocks, t2):
            y0 -= w_blk @ tail

        # apply L(mu)^{-1} by forward substitution
        w0 = self.alpha * scipy.linalg.lu_solve(self.r_lu, y0)
        if k > 1:
            w1 = self._solve_m1(rhs1.reshape(k - 1, n) - np.outer(self.m0, w0))
        else:
            w1 = np.zeros((0, n), dtype=complex)
        z_source = w0 if not self._pivot_shifts_f0() else w1[0]
        coup = self._coupling_into_tails(z_source)
        w2 = self._solve_blocks([tail - c for tail, c in zip(tails_in, coup)])

        # undo the column permutation on the basis blocks
        head = np.zeros((k, n), dtype=complex)
        head[self.order[0]] = w0
        for i in range(1, k):
            head[self.order[i]] = w1[i - 1]
        return np.concatenate([head.ravel()] + w2)

    def _pivot_shifts_f0(self):
        # True when column 0 (the f_0 block, where the constant coupling
        # lives) sits among the retained columns rather than at the pivot
        return self.order[0] != 0

    # -- dense assembly for verification -------------------------------------

    def permutation_matrix(self):
        pencil = self.pencil
        n, k = pencil.n, pencil.k
        pi = np.zeros((k, k))
        pi[self.order, np.arange(k)] = 1.0
        P = np.eye(pencil.dim, dtype=complex)
        P[:n * k, :n * k] = np.kron(pi, np.eye(n))
        return P

    def assemble_factors(self):
        """Dense (U, L) with L(mu) @ P == U @ L; verification use only."""
        pencil = self.pencil
        n = pencil.n
        dim = pencil.dim
        LP = pencil.assemble(self.mu) @ self.permutation_matrix()
        G12 = LP[:n, n:]
        G21 = LP[n:, :n]
        G22 = LP[n:, n:]
        U = np.eye(dim, dtype=complex)
        if dim > n:
            U[:n, n:] = G12 @ np.linalg.inv(G22)
        L = np.zeros((dim, dim), dtype=complex)
        L[:n, :n] = self.pencil.rational.evaluate(self.mu) / self.alpha
        L[n:, :n] = G21
        L[n:, n:] = G22
        return U, L


def _select_pivot(M, N, mu):
    """Column whose removal leaves the best-conditioned retained pencil."""
    k = M.shape[1]
    if k == 1:
        return 0
    pencil = M - mu * N
    best_c, best_s = 0, -1.0
    for c in range(k):
        sub = np.delete(pencil, c, axis=1)
        smin = np.linalg.svd(sub, compute_uv=False)[-1]
        if smin > best_s + 1e-15 * abs(best_s):
            best_c, best_s = c, smin
    if best_s <= 0:
        raise ShiftIsEigenvalueError(f"basis pencil singular for every pivot at {mu}")
    return best_c


def ul_factorize(pencil, mu):
    """Factor the shifted pencil in block-UL form.

    The basis columns are permuted so the retained (k-1) x (k-1) pencil is
    well conditioned, alpha(mu) is the basis function of the pivot column,
    and R(mu) is factorized densely.  Shifts at a pole of a fitted rational
    or at an eigenvalue of R raise dedicated errors.
    """
    mu = pencil.guard_shift(mu)
    problem = pencil.problem
    poly = problem.poly
    n, k = pencil.n, pencil.k

    M, N = poly.basis_pencil()
    pivot = _select_pivot(M, N, mu)
    order = [pivot] + [c for c in range(k) if c != pivot]
    f_mu = poly.basis_values(mu)
    alpha = complex(f_mu[pivot])
    if alpha == 0 or not np.isfinite(alpha):
        raise ShiftIsEigenvalueError(f"alpha(mu) vanished for pivot {pivot} at {mu}")

    if k > 1:
        pencil_mu = (M - mu * N)[:, order]
        m0 = pencil_mu[:, 0]
        m1 = pencil_mu[:, 1:]
        m1_lu = scipy.linalg.lu_factor(m1)
    else:
        m0 = np.zeros(0, dtype=complex)
        m1_lu = None

    block_lus = []
    for bl in pencil.blocks:
        lu = scipy.linalg.lu_factor(bl.E - mu * bl.F)
        diag = np.abs(np.diag(lu[0]))
        if diag.size and diag.min() <= 1e-14 * max(diag.max(), 1e-300):
            raise PoleShiftError(
                f"realization pencil for terms {bl.term_indices} singular at {mu}",
                shift=mu, term_index=bl.term_indices[0])
        block_lus.append(lu)

    r_mu = pencil.rational.evaluate(mu)
    r_lu = scipy.linalg.lu_factor(r_mu)
    diag = np.abs(np.diag(r_lu[0]))
    if diag.min() <= 1e-14 * max(diag.max(), 1e-300):
        raise ShiftIsEigenvalueError(
            f"R(mu) is singular to machine precision at mu = {mu}")

    top_blocks = [poly.coefficients_a[c] - mu * poly.coefficients_b[c]
                  for c in order]
    w_blocks = [bl.WC - mu * bl.WD for bl in pencil.blocks]
    return ULFactors(pencil=pencil, mu=mu, order=order, alpha=alpha,
                     r_lu=r_lu, m1_lu=m1_lu, block_lus=block_lus,
                     top_blocks=top_blocks, w_blocks=w_blocks, m0=m0)


def solve_shifted(factors, rhs):
    """Functional wrapper around :meth:`ULFactors.solve`."""
    return factors.solve(rhs)


def determinant_identity_gap(pencil, mu, factors=None):
    """Relative gap in the log-magnitude determinant identity at mu.

    Compares |alpha|^n |det pencil(mu)| against |det R(mu)| times the retained
    basis-pencil determinant to the n-th power times each block determinant to
    the power of its Kronecker width.  Requires dense assembly.
    """
    if factors is None:
        factors = ul_factorize(pencil, mu)
    n = pencil.n
    _, ld_pencil = np.linalg.slogdet(pencil.assemble(mu))
    _, ld_r = np.linalg.slogdet(pencil.rational.evaluate(mu))
    lhs = n * np.log(abs(factors.alpha)) + ld_pencil
    rhs = ld_r
    if factors.m1_lu is not None:
        rhs += n * np.sum(np.log(np.abs(np.diag(factors.m1_lu[0]))))
    for bl, lu in zip(pencil.blocks, factors.block_lus):
        rhs += bl.width * np.sum(np.log(np.abs(np.diag(lu[0]))))
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def dense_eigenvalues(pencil, max_dim=2000):
    """All finite eigenvalues of the pencil by a dense generalized solve."""
    if pencil.dim > max_dim:
        raise DimensionGuardError(
            f"pencil dimension {pencil.dim} exceeds dense guard {max_dim}")
    A, B = pencil.matrices()
    ev = scipy.linalg.eigvals(A, B)
    return ev[np.isfinite(ev)]
