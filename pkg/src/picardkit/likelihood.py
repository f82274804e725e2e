'''Negative log-likelihood of the linear unmixing model and its relative
derivatives.

For an unmixing matrix W and signals X, with Y = W X and per-channel source
densities p_i, the objective is

    L(W) = -log|det W| + sum_i mean_t [-log p_i(Y_it)]

Derivatives are taken in the relative frame: perturb W to exp(E) W and expand
in the matrix E. The gradient in that frame is G_ij = E_hat[psi_i(y_i) y_j] -
delta_ij where psi = -(log p)'. The second-order term has the tensor form
produced by `full_hessian`; `approx_hessian` keeps only the cheap
sample-moment coefficients that make the operator block diagonal over
coordinate pairs {(i,j),(j,i)}, and `solve_regularized` inverts that
approximation with its eigenvalues clamped away from zero.
'''

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, SingularityError

_LOG_2 = math.log(2.0)
_TINY_LOG_DET = math.log(1e-300)


@dataclass(frozen=True)
class ScoreModel:
    '''A source density in the three forms the solver consumes.

    neglogp(y) = -log p(y) up to an additive constant fixed so that the
    built-in models agree with their closed forms exactly, psi = (neglogp)',
    psi_prime = psi'. All three are vectorized over ndarrays.
    '''

    name: str
    neglogp: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    psi_prime: Callable[[np.ndarray], np.ndarray]
    psi_pair: Optional[Callable[[np.ndarray], tuple]] = field(default=None, repr=False)

    def psi_and_derivative(self, y):
        '''(psi(y), psi'(y)), fused when the model provides a cheaper path.'''
        if self.psi_pair is not None:
            return self.psi_pair(y)
        return self.psi(y), self.psi_prime(y)


def _logcosh_neglogp(y):
    # log cosh y = log(e^y + e^-y) - log 2, stable for large |y|
    return np.logaddexp(y, -y) - _LOG_2


def _logcosh_pair(y):
    th = np.tanh(y)
    return th, 1.0 - th * th


def log_cosh_score():
    '''Sub-Gaussian-robust default: -log p(y) = log cosh y, psi = tanh.'''
    return ScoreModel(
        name="logcosh",
        neglogp=_logcosh_neglogp,
        psi=np.tanh,
        psi_prime=lambda y: 1.0 - np.tanh(y) ** 2,
        psi_pair=_logcosh_pair,
    )


def cubic_score():
    '''Quartic model: -log p(y) = y^4 / 4, psi = y^3.'''
    return ScoreModel(
        name="cubic",
        neglogp=lambda y: 0.25 * y ** 4,
        psi=lambda y: y ** 3,
        psi_prime=lambda y: 3.0 * y ** 2,
    )


def gaussian_score():
    '''Gaussian model: -log p(y) = y^2 / 2, psi = y. Useful only for tests;
    a Gaussian likelihood cannot separate sources.'''
    return ScoreModel(
        name="gaussian",
        neglogp=lambda y: 0.5 * y ** 2,
        psi=lambda y: np.array(y, copy=True),
        psi_prime=lambda y: np.ones_like(y),
    )


_SCORES = {
    "logcosh": log_cosh_score,
    "cubic": cubic_score,
    "gaussian": gaussian_score,
}


def get_score(name):
    '''Look up a built-in score model by name.'''
    try:
        return _SCORES[name]()
    except KeyError:
        raise KeyError(
            f"unknown score model {name!r}, expected one of {sorted(_SCORES)}") from None


def _check_signals(Y, name="Y"):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise DimensionError(f"{name} must be 2-d (channels, samples), got shape {Y.shape}")
    return Y


def _log_abs_det(W):
    sign, logabsdet = np.linalg.slogdet(W)
    if sign == 0.0 or logabsdet < _TINY_LOG_DET:
        raise SingularityError("unmixing matrix is singular to working precision")
    return logabsdet


def loss_given_sources(W, Y, score):
    '''Objective value when Y = W X has already been computed.'''
    return float(-_log_abs_det(W) + score.neglogp(Y).mean(axis=1).sum())


def loss(W, X, score):
    '''Negative average log-likelihood of W for the signals X.

    Parameters
    ----------
    W : ndarray, shape (N, N)
        Must be invertible.
    X : ndarray, shape (N, T)
        Finite entries.
    score : ScoreModel

    Returns
    -------
    float
    '''
    W = np.asarray(W, dtype=np.float64)
    X = _check_signals(X, "X")
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[1] != X.shape[0]:
        raise DimensionError(f"shape mismatch: W {W.shape} against X {X.shape}")
    if not np.isfinite(X).all():
        raise DimensionError("X contains non-finite entries")
    return loss_given_sources(W, W @ X, score)


def relative_gradient(Y, score):
    '''Gradient of the objective in the relative frame at the current Y.

    G_ij = mean_t[psi_i(Y_it) Y_jt] - delta_ij. Depends on W and X only
    through Y, which is what makes the iteration equivariant.
    '''
    Y = _check_signals(Y)
    N, T = Y.shape
    G = (score.psi(Y) @ Y.T) / T
    G[np.diag_indices(N)] -= 1.0
    return G


@dataclass
class HessianTensor:
    '''Sample moments that determine the exact relative Hessian.

    kappa[i] = E_hat[psi_i(y_i) y_i]; moments[i, j, l] = E_hat[psi'_i(y_i)
    y_j y_l], exactly symmetric in (j, l). The full operator acts on a matrix
    E as (H E)_ij = kappa_i E_ji + sum_l moments[i, j, l] E_il.
    '''

    kappa: np.ndarray
    moments: np.ndarray


@dataclass
class ApproxHessianCoeffs:
    '''Coefficients of the block-diagonal Hessian approximation.

    kappa[i] = E_hat[psi_i(y_i) y_i]; h[i, j] = E_hat[psi'_i(y_i) y_j^2],
    the diagonal of moments[i] in `HessianTensor`. The approximate operator
    acts as (H~ E)_ij = kappa_i E_ji + h_ij E_ij, which couples only the
    entry pairs {(i, j), (j, i)}.
    '''

    kappa: np.ndarray
    h: np.ndarray


MAX_FULL_HESSIAN_N = 64


def _kappa_and_h(psi_y, psi_d, Y):
    '''kappa_i = E_hat[psi_i y_i] and h_ij = E_hat[psi'_i y_j^2]. Single
    code path shared by every consumer so the values agree bitwise.'''
    T = Y.shape[1]
    kappa = (psi_y * Y).mean(axis=1)
    h = (psi_d @ (Y * Y).T) / T
    return kappa, h


def full_hessian(Y, score):
    '''Exact relative-Hessian moments at Y. O(N^3 T) work; refused above
    N = 64 because the tensor alone is N^3 floats.'''
    Y = _check_signals(Y)
    N, T = Y.shape
    if N > MAX_FULL_HESSIAN_N:
        raise DimensionError(
            f"full Hessian moments limited to N <= {MAX_FULL_HESSIAN_N}, got N = {N}")
    psi_y, psi_d = score.psi_and_derivative(Y)
    kappa, h = _kappa_and_h(psi_y, psi_d, Y)
    moments = np.empty((N, N, N))
    for i in range(N):
        moments[i] = ((psi_d[i] * Y) @ Y.T) / T
    # enforce the j <-> l symmetry exactly; matmul rounding breaks it at 1e-16
    moments = 0.5 * (moments + moments.transpose(0, 2, 1))
    # the (j, j) diagonal is by definition h; store the shared-path values
    # so moments[i, j, j] == h[i, j] holds exactly, not merely to rounding
    idx = np.arange(N)
    moments[:, idx, idx] = h
    return HessianTensor(kappa=kappa, moments=moments)


def approx_hessian(Y, score):
    '''Cheap Hessian coefficients at Y: one matmul beyond the gradient.'''
    Y = _check_signals(Y)
    psi_y, psi_d = score.psi_and_derivative(Y)
    kappa, h = _kappa_and_h(psi_y, psi_d, Y)
    return ApproxHessianCoeffs(kappa=kappa, h=h)


def gradient_and_coeffs(Y, score):
    '''Gradient plus Hessian coefficients from one pass over the scores.

    Equivalent to (relative_gradient(Y, score), approx_hessian(Y, score))
    but evaluates psi and psi' together; this is what the solver calls every
    iteration under the curvature-using policies.
    '''
    Y = _check_signals(Y)
    N, T = Y.shape
    psi_y, psi_d = score.psi_and_derivative(Y)
    G = (psi_y @ Y.T) / T
    G[np.diag_indices(N)] -= 1.0
    kappa, h = _kappa_and_h(psi_y, psi_d, Y)
    return G, ApproxHessianCoeffs(kappa=kappa, h=h)


def _pair_blocks(coeffs):
    '''Stack the 2x2 blocks of the approximate Hessian for all pairs i < j.

    The block for the pair {(i,j),(j,i)} is [[h_ij, kbar], [kbar, h_ji]]
    with kbar = (kappa_i + kappa_j) / 2. The raw operator carries kappa_i
    and kappa_j in the two off-diagonal slots; as a quadratic form only
    their symmetric part matters, and the symmetrized block is what an
    eigendecomposition can clamp and invert.
    '''
    kappa, h = coeffs.kappa, coeffs.h
    N = kappa.shape[0]
    iu, ju = np.triu_indices(N, k=1)
    blocks = np.empty((iu.shape[0], 2, 2))
    blocks[:, 0, 0] = h[iu, ju]
    blocks[:, 1, 1] = h[ju, iu]
    kbar = 0.5 * (kappa[iu] + kappa[ju])
    blocks[:, 0, 1] = kbar
    blocks[:, 1, 0] = kbar
    return iu, ju, blocks


def solve_regularized(coeffs, G, lambda_floor=1e-2):
    '''Newton step -H~_reg^{-1} G for the block-diagonal approximation.

    Each 2x2 pair block and each scalar diagonal coefficient has its
    eigenvalues clamped from below at lambda_floor before inversion, which
    keeps every block SPD and the output a descent direction for any G != 0.

    Parameters
    ----------
    coeffs : ApproxHessianCoeffs
    G : ndarray, shape (N, N)
    lambda_floor : float, > 0

    Returns
    -------
    D : ndarray, shape (N, N)
    '''
    G = np.asarray(G, dtype=np.float64)
    kappa, h = coeffs.kappa, coeffs.h
    N = kappa.shape[0]
    if G.shape != (N, N):
        raise DimensionError(f"gradient shape {G.shape} does not match N = {N}")
    if not lambda_floor > 0.0:
        raise ValueError(f"lambda_floor must be positive, got {lambda_floor}")
    D = np.empty((N, N))
    diag_coeff = np.maximum(np.diagonal(h) + kappa, lambda_floor)
    D[np.diag_indices(N)] = -np.diagonal(G) / diag_coeff
    if N > 1:
        iu, ju, blocks = _pair_blocks(coeffs)
        vals, vecs = np.linalg.eigh(blocks)
        vals = np.maximum(vals, lambda_floor)
        rhs = np.stack([G[iu, ju], G[ju, iu]], axis=1)[:, :, None]
        sol = vecs @ ((vecs.transpose(0, 2, 1) @ rhs) / vals[:, :, None])
        D[iu, ju] = -sol[:, 0, 0]
        D[ju, iu] = -sol[:, 1, 0]
    return D
