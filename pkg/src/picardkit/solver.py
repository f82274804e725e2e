'''The relative quasi-Newton iteration for maximum-likelihood unmixing.

Starting from W = I on whitened signals, each pass computes the relative
gradient, picks a direction according to the configured Hessian policy,
backtracks a step length, and applies the multiplicative update
W <- exp(alpha D) W. Under the whiteness constraint, gradient and direction
are projected onto antisymmetric matrices, so every iterate stays orthogonal.
'''

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (
    ContractError,
    DegenerateDataError,
    DimensionError,
    LineSearchFailure,
    NumericalFailure,
)
from .lbfgs import LbfgsMemory, two_loop_direction, update_memory
from .likelihood import (
    gradient_and_coeffs,
    loss_given_sources,
    relative_gradient,
    solve_regularized,
)
from .linalg import frobenius_inner, matrix_exp, sup_norm

POLICIES = ("identity", "simple", "preconditioned-lbfgs")

WHITENESS_TOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    '''Knobs of the fit loop. Defaults suit whitened signals at N up to a
    few hundred; see field comments for what each controls.'''

    policy: str = "preconditioned-lbfgs"
    whiteness_constraint: bool = False
    tol: float = 1e-8            # stop once the gradient sup-norm drops below this
    max_iter: int = 500
    lambda_floor: float = 1e-2   # eigenvalue clamp of the Hessian approximation
    memory_size: int = 7         # pair capacity of the L-BFGS memory
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 16

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not self.lambda_floor > 0.0:
            raise ValueError(f"lambda_floor must be positive, got {self.lambda_floor}")
        if self.memory_size < 1:
            raise ValueError(f"memory_size must be at least 1, got {self.memory_size}")
        if not 0.0 < self.armijo_c1 < 1.0:
            raise ValueError(f"armijo_c1 must be in (0, 1), got {self.armijo_c1}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError(
                f"backtrack_factor must be in (0, 1), got {self.backtrack_factor}")
        if self.max_backtracks < 0:
            raise ValueError(f"max_backtracks must be >= 0, got {self.max_backtracks}")


@dataclass(frozen=True)
class IterationRecord:
    '''One accepted solver step. `loss + loss_residual` is the compensated
    objective value: the residual carries the accumulated part of the
    per-step decreases too small to register in `loss` itself, so the exact
    recorded sequence strictly decreases even when an individual decrease
    falls below one ulp of the objective.'''

    iteration: int
    elapsed_seconds: float
    loss: float
    gradient_sup_norm: float
    step_size: float
    backtracks_used: int
    loss_residual: float = 0.0


@dataclass
class FitResult:
    '''Outcome of `fit`. `memory` carries the final L-BFGS state under the
    preconditioned-lbfgs policy (None otherwise) so diagnostics can rebuild
    the preconditioner that was in effect at the solution.'''

    W: np.ndarray
    Y: np.ndarray
    trace: List[IterationRecord]
    converged: bool
    memory: Optional[LbfgsMemory] = None


def project_antisym(M):
    '''Antisymmetric part (M - M^T) / 2.'''
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M - M.T)


def _line_search_delta(W, X, score, D, G, config, sources=None):
    '''Armijo backtracking along the multiplicative ray exp(alpha D) W,
    measured in loss *differences*.

    Tries alpha = 1, backtrack_factor, backtrack_factor^2, ... and accepts
    the first (largest) candidate with

        delta := L(exp(alpha D) W) - L(W) <= armijo_c1 * alpha * <G, D>

    delta is evaluated by differencing, not by subtracting two full
    objective values: the density term as the mean of per-sample
    differences neglogp(y') - neglogp(y), and the log-det term through the
    identity log det exp(M) = tr M, which is exact. Near a minimum the true
    decrease shrinks below one ulp of the objective value itself (about
    1e-16 |L|), where a subtract-two-losses test saturates into ties and
    spurious failures; differencing keeps decreases of order 1e-18
    measurable, so accepted steps strictly decrease the objective all the
    way down to tight gradient tolerances. A non-finite or non-negative
    delta rejects the candidate.

    Returns (alpha, delta, backtracks) with delta < 0 guaranteed; raises
    LineSearchFailure when the backtrack budget is exhausted.
    '''
    gd = frobenius_inner(G, D)
    if not gd < 0.0:
        raise ContractError(f"not a descent direction: <G, D> = {gd:.3e}")
    Y = W @ X if sources is None else sources
    base = score.neglogp(Y)
    trace_d = np.trace(D)
    alpha = 1.0
    for k in range(config.max_backtracks + 1):
        # an overflowing candidate yields inf/nan and is rejected by the
        # isfinite test, so the arithmetic warnings carry no information
        with np.errstate(over="ignore", invalid="ignore"):
            E = matrix_exp(alpha * D)
            delta = float((score.neglogp(E @ Y) - base).mean(axis=1).sum()
                          - alpha * trace_d)
        if (np.isfinite(delta)
                and delta <= config.armijo_c1 * alpha * gd
                and delta < 0.0):
            return alpha, delta, k
        alpha *= config.backtrack_factor
    raise LineSearchFailure(
        f"no admissible step within {config.max_backtracks} backtracks")


def line_search(W, X, score, D, G, loss_at_W, config, sources=None):
    '''Armijo backtracking along the multiplicative ray exp(alpha D) W.

    Accepts the largest alpha in {1, backtrack_factor, backtrack_factor^2,
    ...} whose step strictly decreases the objective and satisfies the
    Armijo condition

        L(exp(alpha D) W) <= loss_at_W + armijo_c1 * alpha * <G, D>

    (see _line_search_delta for how the decrease is measured).

    Parameters
    ----------
    W, X : ndarray
        Current unmixing matrix and the (whitened) input signals.
    score : ScoreModel
    D, G : ndarray
        Search direction and the gradient it was derived from; <G, D> must
        be negative.
    loss_at_W : float
    config : SolverConfig
    sources : ndarray, optional
        Precomputed W @ X; avoids one large matmul when the caller has it.

    Returns
    -------
    (alpha, new_loss, backtracks)
        new_loss is loss_at_W plus the measured decrease (a decrease
        smaller than one ulp of loss_at_W rounds away here; `fit` keeps it
        through compensated accumulation).
    '''
    alpha, delta, backtracks = _line_search_delta(
        W, X, score, D, G, config, sources=sources)
    return alpha, loss_at_W + delta, backtracks


def _two_sum(a, b):
    '''Exact float addition: returns (s, e) with s = fl(a + b) and
    s + e = a + b exactly (Knuth's branch-free two-sum).'''
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _direction(policy, G, coeffs, mem, lambda_floor):
    if policy == "identity":
        return -G
    if policy == "simple":
        return solve_regularized(coeffs, G, lambda_floor)
    return two_loop_direction(mem, G, coeffs, lambda_floor)


def _evaluate(Y, score, policy, constrained):
    '''Gradient (projected when constrained), its sup-norm, and the Hessian
    coefficients when the policy needs them.'''
    if policy == "identity":
        G, coeffs = relative_gradient(Y, score), None
    else:
        G, coeffs = gradient_and_coeffs(Y, score)
    if constrained:
        G = project_antisym(G)
    return G, sup_norm(G), coeffs


def fit(X, score, config, callback=None):
    '''Unmix whitened signals by relative quasi-Newton descent.

    Parameters
    ----------
    X : ndarray, shape (N, T)
        Whitened signals: (1/T) X X^T must equal I within 1e-6 sup-norm
        (use `whiten` first on raw data).
    score : ScoreModel
    config : SolverConfig
    callback : callable, optional
        Called after every accepted step with a dict of the live state
        (iteration, W, Y, G, D, loss, gnorm, alpha); useful for audits.

    Returns
    -------
    FitResult
        With one IterationRecord per pass plus a leading record for the
        initial point. `converged` reports whether the gradient sup-norm
        reached config.tol; a fit stopped by max_iter or by a failed line
        search returns converged = False with the trace intact.

    Raises
    ------
    ContractError
        If X is not white within tolerance.
    NumericalFailure
        If a non-finite loss or gradient appears at an accepted iterate;
        the exception carries the partial trace.
    '''
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected (channels, samples) signals, got shape {X.shape}")
    N, T = X.shape
    if not np.isfinite(X).all():
        raise DimensionError("X contains non-finite entries")
    C = (X @ X.T) / T
    white_err = sup_norm(C - np.eye(N))
    if white_err > WHITENESS_TOL:
        raise ContractError(
            f"input is not white: sup|XX^T/T - I| = {white_err:.3e} "
            f"exceeds {WHITENESS_TOL:g}; whiten the data first")

    constrained = config.whiteness_constraint
    lbfgs = config.policy == "preconditioned-lbfgs"
    t0 = time.perf_counter()
    W = np.eye(N)
    Y = X.copy()
    # loss_val + loss_res is the exact running objective: the initial value
    # plus every accepted line-search decrease, accumulated with two-term
    # compensation so decreases below one ulp of loss_val are not lost
    loss_val = loss_given_sources(W, Y, score)
    loss_res = 0.0
    G, gnorm, coeffs = _evaluate(Y, score, config.policy, constrained)
    trace = [IterationRecord(0, time.perf_counter() - t0, loss_val, gnorm, 0.0, 0)]
    mem = LbfgsMemory(capacity=config.memory_size) if lbfgs else None

    converged = gnorm <= config.tol
    iteration = 0
    while not converged and iteration < config.max_iter:
        iteration += 1
        D = _direction(config.policy, G, coeffs, mem, config.lambda_floor)
        if constrained:
            D = project_antisym(D)
        try:
            alpha, delta, backtracks = _line_search_delta(
                W, X, score, D, G, config, sources=Y)
        except LineSearchFailure:
            # quasi-Newton step unusable: drop stale curvature, try plain
            # gradient descent once, and stop cleanly if that fails too
            if mem is not None:
                mem = mem.cleared()
            D = -G
            try:
                alpha, delta, backtracks = _line_search_delta(
                    W, X, score, D, G, config, sources=Y)
            except LineSearchFailure:
                break
        step = alpha * D
        W = matrix_exp(step) @ W
        Y = W @ X
        G_prev = G
        G, gnorm, coeffs = _evaluate(Y, score, config.policy, constrained)
        s, e = _two_sum(loss_val, delta)
        loss_val, loss_res = _two_sum(s, loss_res + e)
        if not (np.isfinite(loss_val) and np.isfinite(gnorm)):
            raise NumericalFailure(
                f"non-finite loss or gradient at iteration {iteration}",
                trace=trace, iteration=iteration)
        if mem is not None:
            mem = update_memory(mem, step, G - G_prev)
        trace.append(IterationRecord(
            iteration, time.perf_counter() - t0, loss_val, gnorm, alpha,
            backtracks, loss_res))
        if callback is not None:
            callback(dict(iteration=iteration, W=W, Y=Y, G=G, D=D,
                          loss=loss_val, gnorm=gnorm, alpha=alpha))
        converged = gnorm <= config.tol

    Y = W @ X
    return FitResult(W=W, Y=Y, trace=trace, converged=converged, memory=mem)


def amari_distance(W, A):
    '''Permutation- and scale-invariant separation error of W against A.

    With P = W A the value is

        (1/2N) sum_i (sum_j |P_ij| / max_j |P_ij| - 1)
      + (1/2N) sum_j (sum_i |P_ij| / max_i |P_ij| - 1)

    which is zero exactly when P is a scaled permutation, i.e. when W
    inverts A up to the inherent source ordering/scaling ambiguity.
    '''
    W = np.asarray(W, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    P = W @ A
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError(f"expected square W A, got shape {P.shape}")
    if not np.isfinite(P).all():
        raise ContractError("W A has non-finite entries")
    absP = np.abs(P)
    row_max = absP.max(axis=1)
    col_max = absP.max(axis=0)
    if np.any(row_max == 0.0) or np.any(col_max == 0.0):
        raise DegenerateDataError("W A has an identically zero row or column")
    N = P.shape[0]
    rows = (absP.sum(axis=1) / row_max - 1.0).sum()
    cols = (absP.sum(axis=0) / col_max - 1.0).sum()
    return float((rows + cols) / (2.0 * N))
