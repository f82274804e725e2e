'''Spectrum and rate diagnostics: materialize the Hessian operators as
dense symmetric matrices over vectorized N x N perturbations, compute
preconditioned spectra and condition numbers, and estimate empirical
contraction rates from solver traces.

Coordinates are flattened row-major: the perturbation entry (i, j) maps to
index i*N + j, matching ndarray.ravel().
'''

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotSpdError, UndefinedRateError
from .lbfgs import two_loop_direction
from .likelihood import _pair_blocks
from .linalg import sym_eig

MAX_MATERIALIZE_N = 64
MAX_PRECONDITIONER_N = 16


@dataclass
class SpectrumReport:
    '''Sorted eigenvalues of a preconditioned Hessian plus its extremes and
    condition number kappa = lambda_M / lambda_m (inf when lambda_m <= 0).'''

    eigenvalues: np.ndarray
    lambda_m: float
    lambda_M: float
    kappa: float


def _report_from(eigenvalues):
    lam_m = float(eigenvalues[0])
    lam_M = float(eigenvalues[-1])
    kappa = lam_M / lam_m if lam_m > 0.0 else float("inf")
    return SpectrumReport(eigenvalues=eigenvalues, lambda_m=lam_m,
                          lambda_M=lam_M, kappa=kappa)


def materialize_full_hessian(H):
    '''Dense symmetric N^2 x N^2 matrix of the exact relative Hessian.

    The raw operator acts as (H E)_ij = kappa_i E_ji + sum_l m_ijl E_il;
    its quadratic form only sees the symmetric part, so the returned matrix
    holds (H_(ij),(kl) + H_(kl),(ij)) / 2.
    '''
    kappa = np.asarray(H.kappa, dtype=np.float64)
    moments = np.asarray(H.moments, dtype=np.float64)
    N = kappa.shape[0]
    if N > MAX_MATERIALIZE_N:
        raise DimensionError(
            f"refusing to materialize an N^2 x N^2 operator for N = {N} "
            f"(limit {MAX_MATERIALIZE_N})")
    A = np.zeros((N * N, N * N))
    for i in range(N):
        A[i * N:(i + 1) * N, i * N:(i + 1) * N] = moments[i]
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    A[(ii * N + jj).ravel(), (jj * N + ii).ravel()] += np.repeat(kappa, N)
    return 0.5 * (A + A.T)


def materialize_simple_hessian(coeffs, lambda_floor=1e-2):
    '''Dense SPD matrix of the regularized block-diagonal approximation,
    identical in content to what solve_regularized inverts.'''
    kappa = np.asarray(coeffs.kappa, dtype=np.float64)
    h = np.asarray(coeffs.h, dtype=np.float64)
    N = kappa.shape[0]
    if N > MAX_MATERIALIZE_N:
        raise DimensionError(
            f"refusing to materialize an N^2 x N^2 operator for N = {N} "
            f"(limit {MAX_MATERIALIZE_N})")
    M = np.zeros((N * N, N * N))
    diag_idx = np.arange(N) * N + np.arange(N)
    M[diag_idx, diag_idx] = np.maximum(np.diagonal(h) + kappa, lambda_floor)
    if N > 1:
        iu, ju, blocks = _pair_blocks(coeffs)
        vals, vecs = np.linalg.eigh(blocks)
        vals = np.maximum(vals, lambda_floor)
        recon = vecs @ (vals[:, :, None] * vecs.transpose(0, 2, 1))
        p = iu * N + ju
        q = ju * N + iu
        M[p, p] = recon[:, 0, 0]
        M[q, q] = recon[:, 1, 1]
        # assign one computed off-diagonal to both slots: exact symmetry
        M[p, q] = recon[:, 0, 1]
        M[q, p] = recon[:, 0, 1]
    return M


def materialize_preconditioner_inverse(mem, coeffs, lambda_floor=1e-2):
    '''Dense inverse of the L-BFGS preconditioner implied by a memory.

    Column k holds the (negated) two-loop output on the k-th canonical basis
    matrix; the result is symmetrized to absorb rounding. O(N^4) work, so
    refused beyond N = 16.
    '''
    N = np.asarray(coeffs.kappa).shape[0]
    if N > MAX_PRECONDITIONER_N:
        raise DimensionError(
            f"refusing the O(N^4) preconditioner materialization for N = {N} "
            f"(limit {MAX_PRECONDITIONER_N})")
    M = np.empty((N * N, N * N))
    basis = np.zeros((N, N))
    for k in range(N * N):
        basis.flat[k] = 1.0
        M[:, k] = -two_loop_direction(mem, basis, coeffs, lambda_floor).ravel()
        basis.flat[k] = 0.0
    return 0.5 * (M + M.T)


def preconditioned_spectrum(H, H_hat):
    '''Spectrum of H preconditioned by SPD H_hat.

    Computed as the eigenvalues of L^-1 H L^-T where H_hat = L L^T, which
    shares its spectrum with H_hat^(-1/2) H H_hat^(-1/2) and with the
    generalized problem H v = lambda H_hat v.
    '''
    H = np.asarray(H, dtype=np.float64)
    H_hat = np.asarray(H_hat, dtype=np.float64)
    if H.shape != H_hat.shape or H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(
            f"operator shapes must match and be square, got {H.shape} and {H_hat.shape}")
    try:
        L = np.linalg.cholesky(H_hat)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"preconditioner is not positive definite: {exc}") from None
    A = scipy.linalg.solve_triangular(L, H, lower=True)
    B = scipy.linalg.solve_triangular(L, A.T, lower=True).T
    vals, _ = sym_eig(0.5 * (B + B.T))
    return _report_from(vals)


def antisym_basis(N):
    '''Orthonormal basis of vectorized antisymmetric matrices, one column
    per pair i < j: vec(E_ij - E_ji) / sqrt(2).'''
    iu, ju = np.triu_indices(N, k=1)
    P = iu.shape[0]
    B = np.zeros((N * N, P))
    cols = np.arange(P)
    B[iu * N + ju, cols] = 1.0 / np.sqrt(2.0)
    B[ju * N + iu, cols] = -1.0 / np.sqrt(2.0)
    return B


def constrained_spectrum(H, H_hat):
    '''preconditioned_spectrum restricted to the antisymmetric subspace the
    whiteness-constrained iteration moves in; N(N-1)/2 eigenvalues.'''
    H = np.asarray(H, dtype=np.float64)
    n2 = H.shape[0]
    N = int(round(np.sqrt(n2)))
    if N * N != n2:
        raise DimensionError(f"operator size {n2} is not a perfect square")
    B = antisym_basis(N)
    return preconditioned_spectrum(B.T @ H @ B, B.T @ np.asarray(H_hat) @ B)


def measure_rate(trace, L_star):
    '''Empirical per-iteration contraction of the loss gap.

    For successive records, the ratio (L_{n+1} - L_star) / (L_n - L_star)
    measures how much of the remaining gap survives one iteration; the
    estimate is 1 minus the median ratio over the last half of the trace
    (earlier iterations are warm-up). Accepts a list of IterationRecord or a
    plain sequence of loss values.

    Raises UndefinedRateError when fewer than 5 records sit above L_star or
    no ratio is defined in the measurement window.
    '''
    losses = np.asarray(
        [r.loss if hasattr(r, "loss") else float(r) for r in trace], dtype=np.float64)
    gaps = losses - L_star
    if int(np.sum(gaps > 0.0)) < 5:
        raise UndefinedRateError(
            "need at least 5 trace records with loss above the target")
    ratios = np.full(losses.shape[0] - 1, np.nan)
    ok = gaps[:-1] > 0.0
    ratios[ok] = gaps[1:][ok] / gaps[:-1][ok]
    window = ratios[losses.shape[0] // 2:]
    window = window[np.isfinite(window)]
    if window.size == 0:
        raise UndefinedRateError("no measurable loss gap in the trace tail")
    return float(1.0 - np.median(window))
