"""Problem data: smooth losses, block partitions, separable semi-convex penalties.

A composite objective F = f + g is described by a :class:`ProblemInstance`:
``f`` is a smooth term with an explicit gradient Lipschitz constant, and
``g`` splits over a :class:`BlockPartition` into per-block penalties that are
themselves separable per coordinate.  Every penalty g_i is semi-convex, i.e.
g_i + (rho/2)|.|^2 is convex for the modulus ``rho`` it reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class UnsupportedInstanceError(ValueError):
    """The requested operation needs structure this instance does not expose."""


class PowerIterationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous partition of coordinates 0..n-1 into blocks.

    ``sizes[i]`` is the width of block i; offsets are the running prefix sums.
    """

    sizes: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) == 0:
            raise ValueError("partition needs at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError("block sizes must be >= 1")
        object.__setattr__(self, "sizes", sizes)
        offs = np.concatenate(([0], np.cumsum(sizes)))
        object.__setattr__(self, "offsets", tuple(int(o) for o in offs))

    @property
    def n(self) -> int:
        return self.offsets[-1]

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    def block_slice(self, i: int) -> slice:
        if not 0 <= i < self.n_blocks:
            raise IndexError(f"block index {i} out of range [0, {self.n_blocks})")
        return slice(self.offsets[i], self.offsets[i + 1])

    @staticmethod
    def even(n: int, n_blocks: int) -> "BlockPartition":
        """Split n coordinates into n_blocks near-even contiguous blocks."""
        if n < n_blocks:
            raise ValueError("need at least one coordinate per block")
        base, extra = divmod(n, n_blocks)
        return BlockPartition(tuple(base + (1 if i < extra else 0) for i in range(n_blocks)))


# ---------------------------------------------------------------------------
# smooth terms


def largest_eigenvalue_sym(S: np.ndarray, rel_tol: float = 1e-8, max_steps: int = 10_000) -> float:
    """Dominant eigenvalue of a symmetric PSD matrix by power iteration.

    Stops when the Rayleigh quotient is stable to ``rel_tol`` relatively;
    raises :class:`PowerIterationError` after ``max_steps`` non-converged steps.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.any(S):
        return 0.0
    # fixed-seed start so the estimate is reproducible and never orthogonal
    # to the dominant eigenvector by construction of the problem
    v = np.random.Generator(np.random.PCG64(0x5EED_CAFE)).standard_normal(S.shape[0])
    v /= np.linalg.norm(v)
    lam_prev = np.inf
    for _ in range(max_steps):
        w = S @ v
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam - lam_prev) <= rel_tol * max(abs(lam), 1e-300):
            return lam
        lam_prev = lam
    raise PowerIterationError(f"power iteration did not converge in {max_steps} steps")


class SmoothTerm:
    """Smooth part f of the objective; subclasses fill value/grad/lipschitz."""

    kind = "custom"
    lipschitz: float

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class QuadraticLeastSquares(SmoothTerm):
    """f(x) = 0.5 ||A x - b||^2 with L = 1.01 * lambda_max(A^T A)."""

    kind = "quadratic-least-squares"

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
            raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
        self.A = A
        self.b = b
        self._gram = A.T @ A
        self._atb = A.T @ b
        self.lipschitz = 1.01 * largest_eigenvalue_sym(self._gram)

    def value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def grad(self, x):
        return self._gram @ x - self._atb


class LogisticLoss(SmoothTerm):
    """f(x) = sum_i log(1 + exp(-y_i a_i^T x)), labels y in {-1, +1}.

    L = 1.01 * lambda_max(A^T A) / 4.
    """

    kind = "logistic"

    def __init__(self, A, y):
        A = np.asarray(A, dtype=float)
        y = np.asarray(y, dtype=float)
        if A.ndim != 2 or y.ndim != 1 or A.shape[0] != y.shape[0]:
            raise ValueError(f"shape mismatch: A {A.shape}, y {y.shape}")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        self.A = A
        self.y = y
        self.lipschitz = 1.01 * largest_eigenvalue_sym(A.T @ A) / 4.0

    def value(self, x):
        margins = self.y * (self.A @ x)
        return float(np.sum(np.logaddexp(0.0, -margins)))

    def grad(self, x):
        margins = self.y * (self.A @ x)
        # sigmoid(-m) written via tanh for overflow safety
        s = 0.5 * (1.0 - np.tanh(0.5 * margins))
        return -self.A.T @ (self.y * s)


class CustomSmooth(SmoothTerm):
    """Wrap user callables; the caller vouches for the Lipschitz constant."""

    kind = "custom"

    def __init__(self, value_fn: Callable, grad_fn: Callable, lipschitz: float, n: int):
        if lipschitz < 0:
            raise ValueError("lipschitz must be >= 0")
        self._value = value_fn
        self._grad = grad_fn
        self.lipschitz = float(lipschitz)
        self.n = int(n)

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)


# ---------------------------------------------------------------------------
# penalties (applied coordinatewise inside a block)


class Regularizer:
    """Scalar penalty applied coordinatewise; semi-convex with modulus rho.

    ``prox(v, w)`` solves argmin_t  phi(t) + (w/2)(t - v)^2 in closed form and
    is only defined for w > rho (strongly convex subproblem, unique minimizer).
    """

    kind = "custom"
    rho: float = 0.0

    def value(self, t):
        raise NotImplementedError

    def subdiff(self, t):
        """Per-coordinate subdifferential interval (lo, hi) at t."""
        raise UnsupportedInstanceError(
            f"penalty kind {self.kind!r} has no interval subdifferential"
        )

    def prox(self, v, w):
        raise NotImplementedError

    def total(self, t) -> float:
        """Sum of the coordinatewise values over an array."""
        return float(np.sum(self.value(np.asarray(t, dtype=float))))


class ZeroPenalty(Regularizer):
    kind = "zero"
    rho = 0.0

    def value(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def subdiff(self, t):
        z = np.zeros_like(np.asarray(t, dtype=float))
        return z, z.copy()

    def prox(self, v, w):
        return np.asarray(v, dtype=float).copy()


class L1Penalty(Regularizer):
    """phi(t) = lam * |t|; prox is soft thresholding at lam/w."""

    kind = "l1"
    rho = 0.0

    def __init__(self, lam: float):
        if lam < 0:
            raise ValueError("l1 weight must be >= 0")
        self.lam = float(lam)

    def value(self, t):
        return self.lam * np.abs(t)

    def subdiff(self, t):
        t = np.asarray(t, dtype=float)
        s = np.sign(t)
        lo = np.where(t == 0.0, -self.lam, self.lam * s)
        hi = np.where(t == 0.0, self.lam, self.lam * s)
        return lo, hi

    def prox(self, v, w):
        v = np.asarray(v, dtype=float)
        thr = self.lam / w
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


class SquaredL2Penalty(Regularizer):
    """phi(t) = (mu/2) t^2."""

    kind = "squared-l2"
    rho = 0.0

    def __init__(self, mu: float):
        if mu < 0:
            raise ValueError("squared-l2 weight must be >= 0")
        self.mu = float(mu)

    def value(self, t):
        return 0.5 * self.mu * np.square(t)

    def subdiff(self, t):
        g = self.mu * np.asarray(t, dtype=float)
        return g, g.copy()

    def prox(self, v, w):
        return (w / (w + self.mu)) * np.asarray(v, dtype=float)


def _pick_best(candidates, objective):
    """Elementwise argmin over a small stack of closed-form candidates."""
    vals = np.stack([objective(c) for c in candidates])
    best = np.argmin(vals, axis=0)
    stacked = np.stack(candidates)
    return np.take_along_axis(stacked, best[None, ...], axis=0)[0]


class ScadPenalty(Regularizer):
    """Smoothly clipped absolute deviation penalty.

    Three pieces (Fan & Li 2001): linear lam*|t| up to lam, a quadratic blend
    on (lam, a*lam], constant lam^2 (a+1)/2 beyond.  Semi-convex with
    rho = 1/(a-1); the prox enumerates the per-piece stationary points
    clipped to their intervals and keeps the best, which is exact whenever
    w > rho makes the subproblem strongly convex.
    """

    kind = "scad"

    def __init__(self, lam: float, a: float = 3.7):
        if lam < 0:
            raise ValueError("scad weight must be >= 0")
        if a <= 2:
            raise ValueError("scad shape parameter must be > 2")
        self.lam = float(lam)
        self.a = float(a)
        self.rho = 1.0 / (self.a - 1.0)

    def value(self, t):
        u = np.abs(np.asarray(t, dtype=float))
        lam, a = self.lam, self.a
        mid = (2 * a * lam * u - np.square(u) - lam**2) / (2 * (a - 1))
        out = np.where(u <= lam, lam * u, np.where(u <= a * lam, mid, lam**2 * (a + 1) / 2))
        return out

    def _deriv_abs(self, u):
        # derivative in |t| for u > 0 (continuous across the knots)
        lam, a = self.lam, self.a
        return np.where(u <= lam, lam, np.where(u <= a * lam, (a * lam - u) / (a - 1), 0.0))

    def subdiff(self, t):
        t = np.asarray(t, dtype=float)
        d = self._deriv_abs(np.abs(t)) * np.sign(t)
        lo = np.where(t == 0.0, -self.lam, d)
        hi = np.where(t == 0.0, self.lam, d)
        return lo, hi

    def prox(self, v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if np.any(w <= self.rho):
            raise ValueError("scad prox needs w > 1/(a-1)")
        lam, a = self.lam, self.a
        s, u = np.sign(v), np.abs(v)
        c1 = np.clip(u - lam / w, 0.0, lam)
        c2 = np.clip((w * (a - 1) * u - a * lam) / (w * (a - 1) - 1.0), lam, a * lam)
        c3 = np.maximum(u, a * lam)
        obj = lambda t: self.value(t) + 0.5 * w * np.square(t - u)
        return s * _pick_best([c1, c2, c3], obj)


class McpPenalty(Regularizer):
    """Minimax concave penalty (Zhang 2010).

    phi(t) = lam|t| - t^2/(2 gamma) for |t| <= gamma*lam, constant beyond;
    semi-convex with rho = 1/gamma.  Prox by per-piece candidate enumeration,
    exact for w > rho.
    """

    kind = "mcp"

    def __init__(self, lam: float, gamma: float):
        if lam < 0:
            raise ValueError("mcp weight must be >= 0")
        if gamma <= 1:
            raise ValueError("mcp shape parameter must be > 1")
        self.lam = float(lam)
        self.gamma = float(gamma)
        self.rho = 1.0 / self.gamma

    def value(self, t):
        u = np.abs(np.asarray(t, dtype=float))
        lam, g = self.lam, self.gamma
        return np.where(u <= g * lam, lam * u - np.square(u) / (2 * g), 0.5 * g * lam**2)

    def subdiff(self, t):
        t = np.asarray(t, dtype=float)
        u = np.abs(t)
        lam, g = self.lam, self.gamma
        d = np.where(u <= g * lam, lam - u / g, 0.0) * np.sign(t)
        lo = np.where(t == 0.0, -lam, d)
        hi = np.where(t == 0.0, lam, d)
        return lo, hi

    def prox(self, v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if np.any(w <= self.rho):
            raise ValueError("mcp prox needs w > 1/gamma")
        lam, g = self.lam, self.gamma
        s, u = np.sign(v), np.abs(v)
        c1 = np.clip(g * (w * u - lam) / (g * w - 1.0), 0.0, g * lam)
        c2 = np.maximum(u, g * lam)
        obj = lambda t: self.value(t) + 0.5 * w * np.square(t - u)
        return s * _pick_best([c1, c2], obj)


_REG_KINDS = {
    "zero": lambda **kw: ZeroPenalty(),
    "l1": lambda **kw: L1Penalty(kw["lam"]),
    "squared-l2": lambda **kw: SquaredL2Penalty(kw["mu"]),
    "scad": lambda **kw: ScadPenalty(kw["lam"], kw.get("a", 3.7)),
    "mcp": lambda **kw: McpPenalty(kw["lam"], kw["gamma"]),
}

_REG_PARAMS = {
    "zero": set(),
    "l1": {"lam"},
    "squared-l2": {"mu"},
    "scad": {"lam", "a"},
    "mcp": {"lam", "gamma"},
}


def make_regularizer(kind: str, **params) -> Regularizer:
    if kind not in _REG_KINDS:
        raise ValueError(f"unknown penalty kind {kind!r}; expected one of {sorted(_REG_KINDS)}")
    extra = set(params) - _REG_PARAMS[kind]
    if extra:
        raise ValueError(f"penalty kind {kind!r} does not take {sorted(extra)}")
    try:
        return _REG_KINDS[kind](**params)
    except KeyError as e:
        raise ValueError(f"penalty kind {kind!r} is missing parameter {e.args[0]!r}") from None


# ---------------------------------------------------------------------------
# the composite instance


@dataclass(frozen=True)
class ProblemInstance:
    """Composite objective F = f + sum_i g_i over a contiguous block partition.

    ``known_optimum`` is an optional (point, value) pair for instances whose
    critical point is available analytically; it is validated on construction
    (subgradient residual at the point must be <= 1e-9).  ``metadata`` carries
    free-form notes such as unverified global hypotheses.
    """

    smooth: SmoothTerm
    partition: BlockPartition
    regularizers: tuple[Regularizer, ...]
    known_optimum: tuple[np.ndarray, float] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        regs = tuple(self.regularizers)
        object.__setattr__(self, "regularizers", regs)
        if len(regs) != self.partition.n_blocks:
            raise ValueError(
                f"{len(regs)} penalties for {self.partition.n_blocks} blocks"
            )
        if self.known_optimum is not None:
            x_star, f_star = self.known_optimum
            x_star = np.asarray(x_star, dtype=float)
            object.__setattr__(self, "known_optimum", (x_star, float(f_star)))
            if x_star.shape != (self.n,):
                raise ValueError("known optimum has wrong dimension")
            res = self.min_subgradient_norm(x_star)
            if res > 1e-9:
                raise ValueError(f"claimed optimum is not critical (residual {res:.3e})")
            if abs(self.objective(x_star) - float(f_star)) > 1e-9 * (1.0 + abs(f_star)):
                raise ValueError("claimed optimal value does not match the objective")

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def n_blocks(self) -> int:
        return self.partition.n_blocks

    @property
    def rho_max(self) -> float:
        return max(r.rho for r in self.regularizers)

    def _check_dim(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n},)")
        return x

    def penalty_value(self, x) -> float:
        x = self._check_dim(x)
        return float(
            sum(r.total(x[self.partition.block_slice(i)]) for i, r in enumerate(self.regularizers))
        )

    def objective(self, x) -> float:
        """F(x) = f(x) + sum of block penalties."""
        x = self._check_dim(x)
        return self.smooth.value(x) + self.penalty_value(x)

    def min_subgradient_norm(self, x) -> float:
        """Distance from 0 to grad f(x) + the penalty subdifferential box.

        Coordinatewise: each penalty contributes an interval [lo, hi]; the
        squared distance is sum_j min_{xi in [lo_j, hi_j]} (grad_j + xi)^2.
        """
        x = self._check_dim(x)
        g = self.smooth.grad(x)
        total = 0.0
        for i, reg in enumerate(self.regularizers):
            sl = self.partition.block_slice(i)
            lo, hi = reg.subdiff(x[sl])
            r = g[sl]
            # closest point of [lo, hi] to -r
            xi = np.clip(-r, lo, hi)
            total += float(np.sum(np.square(r + xi)))
        return float(np.sqrt(total))


def make_quadratic_problem(
    A,
    b,
    regularizers,
    partition: BlockPartition,
    known_optimum=None,
    metadata=None,
) -> ProblemInstance:
    """Least-squares instance 0.5||Ax-b||^2 + penalties with certified L."""
    smooth = QuadraticLeastSquares(A, b)
    if smooth.A.shape[1] != partition.n:
        raise ValueError(
            f"matrix has {smooth.A.shape[1]} columns, partition covers {partition.n}"
        )
    return ProblemInstance(
        smooth=smooth,
        partition=partition,
        regularizers=tuple(regularizers),
        known_optimum=known_optimum,
        metadata=metadata or {},
    )
