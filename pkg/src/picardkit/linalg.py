'''Dense linear-algebra kernels: matrix exponential, symmetric eigensolve,
SPD solve, whitening and PCA reduction.

Everything here works on float64 numpy arrays and is deterministic for a
fixed input. Signals follow the (channels, samples) = (N, T) convention.
'''

import numpy as np
import scipy.linalg

from .errors import DegenerateDataError, DimensionError, ContractError, NotSpdError


def sup_norm(M):
    '''Largest entry magnitude, max_ij |M_ij|. Zero for empty input.'''
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(M)))


def frobenius_inner(A, B):
    '''Frobenius inner product sum_ij A_ij B_ij.'''
    return float(np.sum(A * B))


def frobenius_norm(A):
    return float(np.linalg.norm(A))


def _require_square(M, name):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def matrix_exp(M):
    '''Matrix exponential exp(M) of a square matrix.

    Parameters
    ----------
    M : ndarray, shape (N, N)

    Returns
    -------
    ndarray, shape (N, N)
        exp(M). Satisfies det(exp(M)) = exp(trace(M)), so the result is
        always invertible; exp of an antisymmetric matrix is orthogonal.
    '''
    M = _require_square(M, "matrix_exp input")
    return scipy.linalg.expm(M)


def sym_eig(S, sym_tol=1e-10):
    '''Full eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    S : ndarray, shape (N, N)
        Symmetric within `sym_tol` in sup norm (relative for matrices with
        entries larger than one).
    sym_tol : float

    Returns
    -------
    eigenvalues : ndarray, shape (N,)
        In ascending order.
    eigenvectors : ndarray, shape (N, N)
        Orthonormal, one eigenvector per column, matching eigenvalue order.
    '''
    S = _require_square(S, "sym_eig input")
    asym = sup_norm(S - S.T)
    if asym > sym_tol * max(1.0, sup_norm(S)):
        raise ContractError(f"matrix is not symmetric: sup|S - S^T| = {asym:.3e}")
    # symmetrize exactly so LAPACK sees one triangle's worth of rounding
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    return vals, vecs


def solve_spd(S, b):
    '''Solve S x = b for symmetric positive definite S via Cholesky.

    Raises NotSpdError if the factorization hits a non-positive pivot.
    Accepts a vector or a matrix of stacked right-hand sides.
    '''
    S = _require_square(S, "solve_spd matrix")
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != S.shape[0]:
        raise DimensionError(
            f"right-hand side has leading dimension {b.shape[0]}, expected {S.shape[0]}")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"matrix is not positive definite: {exc}") from None
    z = scipy.linalg.solve_triangular(L, b, lower=True)
    return scipy.linalg.solve_triangular(L.T, z, lower=False)


class WhiteningResult:
    '''Container for the byproducts of whitening.

    Attributes
    ----------
    whitener : ndarray, shape (N, N)
        The symmetric matrix C^(-1/2) that was applied to the centered data.
    mean : ndarray, shape (N,)
        Per-channel mean removed before whitening.
    covariance_eigenvalues : ndarray, shape (N,)
        Eigenvalues of the sample covariance, descending.
    '''

    def __init__(self, whitener, mean, covariance_eigenvalues):
        self.whitener = whitener
        self.mean = mean
        self.covariance_eigenvalues = covariance_eigenvalues


def whiten(X, rank_rtol=1e-12):
    '''Center and whiten a signal matrix with the symmetric (ZCA) whitener.

    Parameters
    ----------
    X : ndarray, shape (N, T)
        Input signals, T > N.
    rank_rtol : float
        A covariance eigenvalue below rank_rtol times the largest one means
        the data is rank deficient and whitening refuses to proceed.

    Returns
    -------
    Z : ndarray, shape (N, T)
        Whitened signals: (1/T) Z Z^T = I to rounding.
    result : WhiteningResult
    '''
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-d signal matrix, got shape {X.shape}")
    N, T = X.shape
    if T <= N:
        raise DimensionError(f"need more samples than channels, got N={N}, T={T}")
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    C = (Xc @ Xc.T) / T
    vals, vecs = np.linalg.eigh(C)
    lam_max = vals[-1]
    if lam_max <= 0.0:
        raise DegenerateDataError("covariance has no positive eigenvalue")
    if vals[0] <= rank_rtol * lam_max:
        raise DegenerateDataError(
            f"covariance eigenvalue {vals[0]:.6e} is below {rank_rtol:g} of the "
            f"largest ({lam_max:.6e}); data is rank deficient")
    whitener = (vecs * (1.0 / np.sqrt(vals))) @ vecs.T
    Z = whitener @ Xc
    return Z, WhiteningResult(whitener, mean, vals[::-1].copy())


def pca_reduce(X, k):
    '''Project onto the top-k principal components of the sample covariance.

    Parameters
    ----------
    X : ndarray, shape (N, T)
    k : int
        1 <= k <= N.

    Returns
    -------
    ndarray, shape (k, T)
        Component order is by descending eigenvalue; each projection
        direction has its largest-magnitude entry made positive so the
        output does not depend on eigensolver sign choices.
    '''
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-d signal matrix, got shape {X.shape}")
    N, T = X.shape
    if not 1 <= k <= N:
        raise DimensionError(f"k must be in [1, {N}], got {k}")
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    C = (Xc @ Xc.T) / T
    vals, vecs = np.linalg.eigh(C)
    top = vecs[:, ::-1][:, :k]
    flip = np.sign(top[np.argmax(np.abs(top), axis=0), np.arange(k)])
    flip[flip == 0.0] = 1.0
    return (top * flip).T @ Xc
