"""Randomized block coordinate descent driver.

Each iteration draws one block index uniformly (a single PCG64 draw, so a
trajectory is a pure function of its seed) and applies the one-block prox
map under the schedule's geometry for that iteration.  Termination is by a
periodic full-map residual check or an iteration cap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bregman import BregmanSchedule, validate_schedule
from .model import ProblemInstance
from .prox import coordinate_prox, prox_residual

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
# second splitmix64 constant; keeps start-point sampling off the index stream
_X0_STREAM = 0x94D049BB133111EB


class SolverAbort(RuntimeError):
    """Raised when the objective stops being finite along a run."""


def derive_seed(base_seed: int, replication: int) -> int:
    """Per-replication stream: base_seed XOR (r * golden-ratio constant), mod 2^64."""
    return (int(base_seed) ^ ((int(replication) * _GOLDEN) & _MASK64)) & _MASK64


@dataclass(frozen=True)
class SolverConfig:
    schedule: BregmanSchedule
    max_iters: int = 1000
    tolerance: float = 1e-10
    check_period: int | None = None  # defaults to the block count
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.check_period is not None and self.check_period < 1:
            raise ValueError("check_period must be >= 1")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class IterateRecord:
    k: int
    block: int
    point: np.ndarray          # x^{k+1}
    objective: float           # F(x^{k+1})
    step_norm: float           # ||x^k - x^{k+1}||
    prox_residual: float | None = None  # measured only on check iterations


@dataclass
class Trajectory:
    x0: np.ndarray
    records: list[IterateRecord]
    termination: str  # "tolerance" | "max_iters"
    initial_objective: float

    @property
    def final_point(self) -> np.ndarray:
        return self.records[-1].point if self.records else self.x0

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else self.initial_objective

    @property
    def final_residual(self) -> float | None:
        for rec in reversed(self.records):
            if rec.prox_residual is not None:
                return rec.prox_residual
        return None

    @property
    def max_iterate_norm(self) -> float:
        """max_k ||x^k||, an empirical proxy for level boundedness."""
        m = float(np.linalg.norm(self.x0))
        for rec in self.records:
            m = max(m, float(np.linalg.norm(rec.point)))
        return m

    def objectives(self) -> np.ndarray:
        """F(x^0), F(x^1), ..., length len(records)+1."""
        return np.array([self.initial_objective] + [r.objective for r in self.records])

    def blocks(self) -> np.ndarray:
        return np.array([r.block for r in self.records], dtype=int)

    def gaps(self, f_bar: float) -> np.ndarray:
        return self.objectives() - f_bar


def vbscd_step(p: ProblemInstance, sched: BregmanSchedule, k: int, x, rng) -> tuple[int, np.ndarray]:
    """One iteration: draw a block uniformly, apply its prox map.

    Consumes exactly one rng draw, so the index sequence is reproducible
    from the seed alone.
    """
    n_blocks = p.n_blocks
    i = min(int(rng.random() * n_blocks), n_blocks - 1)
    return i, coordinate_prox(p, sched.generator(k), sched.step(k), x, i)


def run(p: ProblemInstance, config: SolverConfig, x0=None) -> Trajectory:
    """Iterate until the periodic residual check passes or max_iters is hit.

    The schedule is validated over the whole horizon before the first step;
    a non-finite objective raises :class:`SolverAbort` with the iteration.
    """
    sched = config.schedule
    report = validate_schedule(sched, p, config.max_iters)
    if not report.ok:
        raise ValueError(f"invalid schedule: {report.message}")
    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    f0 = p.objective(x)
    if not np.isfinite(f0):
        raise SolverAbort(f"objective not finite at the start point ({f0})")
    period = config.check_period if config.check_period is not None else p.n_blocks
    rng = np.random.Generator(np.random.PCG64(config.seed))

    records: list[IterateRecord] = []
    termination = "max_iters"
    for k in range(config.max_iters):
        i, x_next = vbscd_step(p, sched, k, x, rng)
        f_next = p.objective(x_next)
        if not np.isfinite(f_next):
            raise SolverAbort(f"objective not finite at iteration {k} ({f_next})")
        step_norm = float(np.linalg.norm(x - x_next))
        resid = None
        if (k + 1) % period == 0:
            resid = prox_residual(p, sched.generator(k + 1), sched.step(k + 1), x_next)
        records.append(IterateRecord(k, i, x_next, f_next, step_norm, resid))
        x = x_next
        if resid is not None and resid <= config.tolerance:
            termination = "tolerance"
            break
    return Trajectory(
        x0=np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float),
        records=records,
        termination=termination,
        initial_objective=f0,
    )


def sample_in_ball(center: np.ndarray, radius: float, rng) -> np.ndarray:
    """Uniform draw from the closed euclidean ball."""
    center = np.asarray(center, dtype=float)
    z = rng.standard_normal(center.size)
    nz = np.linalg.norm(z)
    if nz == 0.0:
        return center.copy()
    r = radius * rng.random() ** (1.0 / center.size)
    return center + (r / nz) * z


def near_start_point(x_bar: np.ndarray, radius: float, seed: int) -> np.ndarray:
    """Start point within ``radius`` of x_bar, from a stream disjoint
    from the block-index stream of the same replication."""
    rng = np.random.Generator(np.random.PCG64((int(seed) ^ _X0_STREAM) & _MASK64))
    return sample_in_ball(x_bar, radius, rng)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path, f_bar: float | None = None) -> None:
    """One row per step: k, i_k, F, gap, step_norm, prox_residual.

    gap is left empty when no reference value is known; prox_residual is
    empty on iterations where it was not measured.  Floats carry 17
    significant digits so files round-trip exactly.
    """
    lines = ["k,i_k,F,gap,step_norm,prox_residual"]
    for rec in traj.records:
        gap = "" if f_bar is None else _fmt(rec.objective - f_bar)
        resid = "" if rec.prox_residual is None else _fmt(rec.prox_residual)
        lines.append(
            f"{rec.k},{rec.block},{_fmt(rec.objective)},{gap},{_fmt(rec.step_norm)},{resid}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
