'''Limited-memory BFGS over square matrices with the Frobenius inner
product, seeded by the block-diagonal Hessian approximation.

The memory holds (s, y) displacement/gradient-change pairs; the two-loop
recursion applies the implied inverse Hessian to a gradient, with the
regularized block approximation standing in for the usual scalar initial
scaling. With an empty memory the result reduces to the plain regularized
Newton step.
'''

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DimensionError
from .likelihood import solve_regularized

CURVATURE_RTOL = 1e-10


@dataclass(frozen=True)
class MemoryPair:
    '''One stored update: step s, gradient change y, rho = 1 / <y, s>.'''

    s: np.ndarray
    y: np.ndarray
    rho: float


@dataclass(frozen=True)
class LbfgsMemory:
    '''A bounded FIFO of memory pairs, oldest first. Treated as a value:
    `update_memory` returns a new instance and never mutates.'''

    capacity: int
    pairs: Tuple[MemoryPair, ...] = ()

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {self.capacity}")
        if len(self.pairs) > self.capacity:
            raise ValueError("more pairs than capacity")

    def __len__(self):
        return len(self.pairs)

    def cleared(self):
        return LbfgsMemory(capacity=self.capacity)


def _inner(A, B):
    return float(np.sum(A * B))


def update_memory(mem, s, y):
    '''Push the pair (s, y), evicting the oldest beyond capacity.

    The pair is dropped (memory returned unchanged) unless the curvature
    <y, s> exceeds 1e-10 ||y||_F ||s||_F, which keeps every stored rho
    positive and the implied operator positive definite.
    '''
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if s.shape != y.shape:
        raise DimensionError(f"mismatched pair shapes {s.shape} and {y.shape}")
    ys = _inner(y, s)
    if not ys > CURVATURE_RTOL * np.linalg.norm(y) * np.linalg.norm(s):
        return mem
    pair = MemoryPair(s=s, y=y, rho=1.0 / ys)
    pairs = mem.pairs + (pair,)
    if len(pairs) > mem.capacity:
        pairs = pairs[-mem.capacity:]
    return LbfgsMemory(capacity=mem.capacity, pairs=pairs)


def two_loop_direction(mem, G, coeffs, lambda_floor=1e-2):
    '''Quasi-Newton direction D = -(H_P)^{-1} G by the two-loop recursion.

    H_P is the operator implied by the memory pairs on top of the clamped
    block-diagonal approximation described by `coeffs`. The map G -> -D is
    linear for a fixed memory, and with no pairs stored the output equals
    solve_regularized(coeffs, G, lambda_floor) exactly.
    '''
    G = np.asarray(G, dtype=np.float64)
    q = G.copy()
    alphas = []
    for pair in reversed(mem.pairs):
        a = pair.rho * _inner(pair.s, q)
        q -= a * pair.y
        alphas.append(a)
    # center step: apply the inverse of the regularized block approximation
    r = -solve_regularized(coeffs, q, lambda_floor)
    for pair, a in zip(mem.pairs, reversed(alphas)):
        b = pair.rho * _inner(pair.y, r)
        r += (a - b) * pair.s
    return -r
