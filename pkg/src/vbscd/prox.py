"""Linearized Bregman prox maps.

For a generator with weights q and step eps, the full map sends x to

    T(x) = argmin_y  <grad f(x), y - x> + g(y) + (1/eps) D(x, y),

and the one-block map T_i(x) changes only block i.  With a diagonal
quadratic kernel both reduce coordinatewise to

    argmin_t  phi(t) + (w/2)(t - v)^2,   w = q_j/eps,  v = x_j - (eps/q_j) grad_j,

which each penalty solves in closed form.  The subproblems are strongly
convex exactly when w > rho, which the schedule bound eps_hi < m/rho_max
guarantees.
"""
from __future__ import annotations

import numpy as np

from .bregman import BregmanGenerator, bregman_distance
from .model import ProblemInstance, Regularizer


def scalar_prox(reg: Regularizer, w, v):
    """Closed-form minimizer of phi(t) + (w/2)(t - v)^2; needs w > rho."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= reg.rho):
        raise ValueError(
            f"prox weight must exceed the semi-convexity modulus rho={reg.rho}"
        )
    return reg.prox(v, w)


def _prep(p: ProblemInstance, gen: BregmanGenerator, eps: float, x) -> np.ndarray:
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,) or gen.weights.shape != (p.n,):
        raise ValueError(
            f"shape mismatch: x {x.shape}, weights {gen.weights.shape}, n = {p.n}"
        )
    return x


def _block_target(p, gen, eps, x, grad, i) -> np.ndarray:
    """New values for block i (other coordinates stay put)."""
    sl = p.partition.block_slice(i)
    q = gen.weights[sl]
    w = q / eps
    v = x[sl] - (eps / q) * grad[sl]
    return scalar_prox(p.regularizers[i], w, v)


def coordinate_prox(p, gen, eps, x, i: int, *, grad=None) -> np.ndarray:
    """One-block map T_i(x): minimize over block i only."""
    x = _prep(p, gen, eps, x)
    g = p.smooth.grad(x) if grad is None else grad
    y = x.copy()
    y[p.partition.block_slice(i)] = _block_target(p, gen, eps, x, g, i)
    return y


def coordinate_prox_all(p, gen, eps, x, *, grad=None) -> list[np.ndarray]:
    """All one-block targets T_i(x), i = 0..N-1, sharing one gradient."""
    x = _prep(p, gen, eps, x)
    g = p.smooth.grad(x) if grad is None else grad
    out = []
    for i in range(p.n_blocks):
        y = x.copy()
        y[p.partition.block_slice(i)] = _block_target(p, gen, eps, x, g, i)
        out.append(y)
    return out


def full_prox(p, gen, eps, x, *, grad=None) -> np.ndarray:
    """Full map T(x): every block moves (block-separable, so composition
    of the one-block maps in any order)."""
    x = _prep(p, gen, eps, x)
    g = p.smooth.grad(x) if grad is None else grad
    y = x.copy()
    for i in range(p.n_blocks):
        y[p.partition.block_slice(i)] = _block_target(p, gen, eps, x, g, i)
    return y


def envelope_value(p, gen, eps, x) -> float:
    """Value of the linearized model at its minimizer T(x):

        E(x) = f(x) + <grad f(x), T(x) - x> + g(T(x)) + (1/eps) D(x, T(x)).

    Taking y = x in the model shows E(x) <= F(x) everywhere.
    """
    x = _prep(p, gen, eps, x)
    g = p.smooth.grad(x)
    t = full_prox(p, gen, eps, x, grad=g)
    return (
        p.smooth.value(x)
        + float(g @ (t - x))
        + p.penalty_value(t)
        + bregman_distance(gen, x, t) / eps
    )


def prox_residual(p, gen, eps, x) -> float:
    """||x - T(x)||; zero exactly at critical points of F."""
    x = _prep(p, gen, eps, x)
    return float(np.linalg.norm(x - full_prox(p, gen, eps, x)))
