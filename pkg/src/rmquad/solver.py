"""Deterministic SPD solves: banded Cholesky after reverse Cuthill-McKee, or PCG."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import cg

from .assembly import SparseSystem

log = logging.getLogger(__name__)

# Above this many stored band entries the direct path falls back to PCG.
MAX_BAND_ENTRIES = 400_000_000
# Iterative refinement steps after the direct solve (stops once the residual stalls).
REFINEMENT_STEPS = 3


class SolverError(RuntimeError):
    pass


class NotPositiveDefiniteError(SolverError):
    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite: Cholesky breakdown at pivot {pivot}")
        self.pivot = pivot


@dataclass
class Solution:
    displacement: np.ndarray  # (n_u,), constrained entries are 0
    rotation: np.ndarray  # (n_theta,)
    residual: float  # ||A x - b|| / ||b||, or ||A x|| when b = 0
    method: str
    info: dict
    shear: np.ndarray | None = None  # coefficients of grad u^h - theta^h, shear basis only


@dataclass
class BandedCholesky:
    """Upper banded Cholesky factor of P A P^T with P the RCM permutation."""

    factor: np.ndarray
    perm: np.ndarray
    bandwidth: int

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dpbtrs(self.factor, b[self.perm], lower=0)
        if info != 0:
            raise SolverError(f"banded triangular solve failed (info={info})")
        out = np.empty_like(x)
        out[self.perm] = x
        return out


def cholesky_factor(A: sp.spmatrix) -> BandedCholesky:
    A = sp.csr_matrix(A)
    n = A.shape[0]
    perm = np.asarray(reverse_cuthill_mckee(A, symmetric_mode=True), dtype=np.int64)
    Ap = A[perm][:, perm].tocoo()
    upper = Ap.row <= Ap.col
    r, c, v = Ap.row[upper], Ap.col[upper], Ap.data[upper]
    bw = int((c - r).max()) if len(r) else 0
    if (bw + 1) * n > MAX_BAND_ENTRIES:
        raise MemoryError(f"band storage too large (bandwidth {bw}, n {n})")
    ab = np.zeros((bw + 1, n))
    ab[bw + r - c, c] = v
    factor, info = lapack.dpbtrf(ab, lower=0, overwrite_ab=1)
    if info > 0:
        # info is the 1-based leading minor; report the original DOF index
        raise NotPositiveDefiniteError(int(perm[info - 1]))
    if info < 0:
        raise SolverError(f"dpbtrf argument error {info}")
    return BandedCholesky(factor, perm, bw)


def solve_spd_matrix(A: sp.spmatrix, b: np.ndarray, method: str = "cholesky"):
    """Solve A x = b; returns (x, relative residual, info dict)."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    info: dict = {}
    if method == "cholesky":
        try:
            fac = cholesky_factor(A)
        except MemoryError as exc:
            log.warning("%s; falling back to PCG", exc)
            method = "cg"
        else:
            x = fac.solve(b)
            info["bandwidth"] = fac.bandwidth
            r = b - A @ x
            steps = 0
            for _ in range(REFINEMENT_STEPS):
                x_new = x + fac.solve(r)
                r_new = b - A @ x_new
                if np.linalg.norm(r_new) >= np.linalg.norm(r):
                    break
                x, r = x_new, r_new
                steps += 1
            info["refinement_steps"] = steps
    if method == "cg":
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotPositiveDefiniteError(int(np.flatnonzero(d <= 0)[0]))
        M = sp.diags(1.0 / d)
        iters = []
        x, status = cg(A, b, rtol=1e-12, atol=0.0, maxiter=50 * A.shape[0], M=M,
                       callback=lambda _: iters.append(1))
        if status != 0:
            raise SolverError(f"conjugate gradient did not converge (status {status})")
        info["iterations"] = len(iters)
    elif method != "cholesky":
        raise ValueError(f"unknown solver method {method!r}")
    r = A @ x - b
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
    return x, res, method, info


def solve_spd(system: SparseSystem, method: str = "cholesky") -> Solution:
    x, res, used, info = solve_spd_matrix(system.A, system.b, method)
    full = system.expand(x)
    n_u = system.dofmap.n_u
    shear = system.shear_coefficients(x) if system.shear_basis else None
    return Solution(full[:n_u], full[n_u:], res, used, info, shear)
