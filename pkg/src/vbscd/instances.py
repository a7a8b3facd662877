"""Shipped problem instances used by the tests and the config loader.

Random designs are built from seeded orthogonal factors with prescribed
singular values, so the gram matrix A^T A has its spectrum inside
[min_eig, max_eig] by construction; min_eig > 0 makes the least-squares
term strongly convex, and choosing min_eig above the penalty's modulus rho
keeps the composite objective strongly convex even for scad/mcp penalties.
"""
from __future__ import annotations

import numpy as np

from .model import (
    BlockPartition,
    L1Penalty,
    McpPenalty,
    ProblemInstance,
    ScadPenalty,
    SquaredL2Penalty,
    ZeroPenalty,
    make_quadratic_problem,
    make_regularizer,
)


def lasso_1d() -> ProblemInstance:
    """0.5 (x - 3)^2 + |x|; the critical point x* = 2 with value 2.5."""
    return make_quadratic_problem(
        A=[[1.0]], b=[3.0],
        regularizers=(L1Penalty(1.0),),
        partition=BlockPartition((1,)),
        known_optimum=(np.array([2.0]), 2.5),
    )


def quad_1d(target: float = 0.0) -> ProblemInstance:
    """0.5 (x - target)^2 with no penalty."""
    return make_quadratic_problem(
        A=[[1.0]], b=[float(target)],
        regularizers=(ZeroPenalty(),),
        partition=BlockPartition((1,)),
        known_optimum=(np.array([float(target)]), 0.0),
    )


def quad_l1_1d() -> ProblemInstance:
    """0.5 x^2 + |x|; minimized at 0 with value 0."""
    return make_quadratic_problem(
        A=[[1.0]], b=[0.0],
        regularizers=(L1Penalty(1.0),),
        partition=BlockPartition((1,)),
        known_optimum=(np.array([0.0]), 0.0),
    )


def diag_quadratic(eigs) -> ProblemInstance:
    """0.5 x^T diag(eigs) x, one coordinate per block, minimizer 0."""
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs <= 0):
        raise ValueError("need strictly positive curvatures")
    n = eigs.size
    return make_quadratic_problem(
        A=np.diag(np.sqrt(eigs)), b=np.zeros(n),
        regularizers=tuple(ZeroPenalty() for _ in range(n)),
        partition=BlockPartition((1,) * n),
        known_optimum=(np.zeros(n), 0.0),
    )


def _design(n: int, min_eig: float, max_eig: float, seed: int):
    """Square matrix with gram spectrum exactly spanning [min_eig, max_eig]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    u, _ = np.linalg.qr(rng.standard_normal((n, n)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if n == 1:
        sv = np.array([np.sqrt(max_eig)])
    else:
        sv = np.sqrt(np.linspace(max_eig, min_eig, n))
    A = u @ (sv[:, None] * v.T)
    b = rng.standard_normal(n)
    return A, b


def lasso_random(
    n: int = 50, n_blocks: int = 10, l1_weight: float = 0.1,
    min_eig: float = 0.5, max_eig: float = 2.0, seed: int = 20240718,
) -> ProblemInstance:
    """Random strongly convex lasso: gram spectrum in [min_eig, max_eig]."""
    A, b = _design(n, min_eig, max_eig, seed)
    part = BlockPartition.even(n, n_blocks)
    return make_quadratic_problem(
        A=A, b=b,
        regularizers=tuple(L1Penalty(l1_weight) for _ in range(n_blocks)),
        partition=part,
        metadata={"design": f"gram spectrum in [{min_eig}, {max_eig}], seed {seed}"},
    )


def quadratic_mcp(
    n: int = 20, n_blocks: int = 5, weight: float = 0.3, gamma: float = 4.0,
    min_eig: float = 0.5, max_eig: float = 2.0, seed: int = 20240719,
) -> ProblemInstance:
    """Least squares plus mcp; min_eig > 1/gamma keeps F strongly convex."""
    A, b = _design(n, min_eig, max_eig, seed)
    part = BlockPartition.even(n, n_blocks)
    return make_quadratic_problem(
        A=A, b=b,
        regularizers=tuple(McpPenalty(weight, gamma) for _ in range(n_blocks)),
        partition=part,
        metadata={
            "design": f"gram spectrum in [{min_eig}, {max_eig}], seed {seed}",
            "note": "nonconvex penalty; reference values are best-found",
        },
    )


def quadratic_scad(
    n: int = 20, n_blocks: int = 5, weight: float = 0.3, a: float = 3.7,
    min_eig: float = 0.5, max_eig: float = 2.0, seed: int = 20240720,
) -> ProblemInstance:
    """Least squares plus scad; min_eig > 1/(a-1) keeps F strongly convex."""
    A, b = _design(n, min_eig, max_eig, seed)
    part = BlockPartition.even(n, n_blocks)
    return make_quadratic_problem(
        A=A, b=b,
        regularizers=tuple(ScadPenalty(weight, a) for _ in range(n_blocks)),
        partition=part,
        metadata={
            "design": f"gram spectrum in [{min_eig}, {max_eig}], seed {seed}",
            "note": "nonconvex penalty; reference values are best-found",
        },
    )


def logistic_random(
    n: int = 10, n_blocks: int = 2, l1_weight: float = 0.05,
    rows: int = 40, seed: int = 20240721,
) -> ProblemInstance:
    """Logistic loss with l1 penalties on seeded data."""
    from .model import LogisticLoss

    rng = np.random.Generator(np.random.PCG64(seed))
    A = rng.standard_normal((rows, n))
    truth = rng.standard_normal(n)
    y = np.where(A @ truth + 0.1 * rng.standard_normal(rows) >= 0, 1.0, -1.0)
    part = BlockPartition.even(n, n_blocks)
    return ProblemInstance(
        smooth=LogisticLoss(A, y),
        partition=part,
        regularizers=tuple(L1Penalty(l1_weight) for _ in range(n_blocks)),
    )


def matrix_instance(A, b, reg_kind: str, reg_params: dict, n_blocks: int) -> ProblemInstance:
    """Instance from explicit dense data with one penalty kind on all blocks."""
    A = np.asarray(A, dtype=float)
    part = BlockPartition.even(A.shape[1], n_blocks)
    regs = tuple(make_regularizer(reg_kind, **reg_params) for _ in range(n_blocks))
    return make_quadratic_problem(A=A, b=b, regularizers=regs, partition=part)
