"""Numeric certification: exact index expectations, decrease and proximity
inequalities, the contraction constants chain, and rate fitting.

Everything that involves the random block index is computed by exact
enumeration over the N blocks (never by sampling): with uniform selection,
the one-block targets T_i(x) satisfy three algebraic identities

    mean_i T_i(x)            = (1/N) T(x) + (1 - 1/N) x
    g(T(x))                  = N mean_i g(T_i(x)) - (N-1) g(x)
    ||x - T(x)||^2           = N mean_i ||x - T_i(x)||^2

(block separability), which double as self-tests of the prox layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bregman import BregmanSchedule
from .model import ProblemInstance, Regularizer
from .prox import coordinate_prox_all, envelope_value, full_prox
from .solver import Trajectory

MACH_EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------------------
# check rows and report serialization


@dataclass(frozen=True)
class CheckRow:
    check: str
    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool


def make_check(check: str, name: str, lhs: float, rhs: float, tol: float) -> CheckRow:
    """Row for an inequality lhs <= rhs, passing within absolute slack tol."""
    lhs, rhs = float(lhs), float(rhs)
    return CheckRow(check, name, lhs, rhs, rhs - lhs, lhs <= rhs + tol)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_report_csv(rows, path) -> None:
    lines = ["check,name,lhs,rhs,slack,pass"]
    for r in rows:
        lines.append(
            f"{r.check},{r.name},{_fmt(r.lhs)},{_fmt(r.rhs)},{_fmt(r.slack)},"
            f"{'true' if r.passed else 'false'}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# exact expectations over the uniform block index


def enumerate_expectation(p: ProblemInstance, gen, eps: float, x, fn):
    """mean_i fn(T_i(x)) by exact enumeration of the N one-block targets."""
    targets = coordinate_prox_all(p, gen, eps, x)
    acc = None
    for t in targets:
        v = np.asarray(fn(t), dtype=float)
        acc = v if acc is None else acc + v
    return acc / p.n_blocks


def expectation_identities(p: ProblemInstance, gen, eps: float, x) -> dict:
    """Absolute deviations of the three mixing identities at x."""
    x = np.asarray(x, dtype=float)
    n_blocks = p.n_blocks
    targets = coordinate_prox_all(p, gen, eps, x)
    t_full = full_prox(p, gen, eps, x)

    mean_pt = sum(targets) / n_blocks
    dev_point = float(
        np.max(np.abs(mean_pt - (t_full / n_blocks + (1.0 - 1.0 / n_blocks) * x)))
    )

    g_mean = sum(p.penalty_value(t) for t in targets) / n_blocks
    dev_penalty = abs(
        p.penalty_value(t_full) - (n_blocks * g_mean - (n_blocks - 1) * p.penalty_value(x))
    )

    sq_mean = sum(float(np.sum((x - t) ** 2)) for t in targets) / n_blocks
    dev_square = abs(float(np.sum((x - t_full) ** 2)) - n_blocks * sq_mean)

    return {"mean-point": dev_point, "penalty-mixing": dev_penalty, "squared-step": dev_square}


# ---------------------------------------------------------------------------
# constants chain


@dataclass(frozen=True)
class ConstantsRecord:
    """Derived contraction constants together with the inputs that fix them.

    a      sufficient decrease:   (m - eps_hi L) / (2 eps_hi)
    theta1 subgradient-to-step:   1 + c0 (L + M/eps_lo)
    theta2 envelope curvature:    (3/2) L + M / (2 eps_lo)
    kappa  theta1^2 * theta2
    b      2 eps_hi N^2 kappa / (m - eps_hi L) + N
    beta   (b - 1) / b
    n_min  minimal level-window divisor for the (eta, nu) neighborhood
    """

    m: float
    M: float
    L: float
    eps_lo: float
    eps_hi: float
    N: int
    c0: float
    eta: float
    nu: float
    a: float
    theta1: float
    theta2: float
    kappa: float
    b: float
    beta: float
    n_min: float

    @property
    def level_window(self) -> float:
        """nu / max(n_min, 1): width of the admissible band above F_bar.

        Clamping the divisor at one keeps the hypothesis set inside
        B(x_bar; eta, nu) even when n_min < 1.
        """
        return self.nu / max(self.n_min, 1.0)


def compute_constants(
    m: float, M: float, L: float, eps_lo: float, eps_hi: float,
    N: int, c0: float, eta: float, nu: float,
) -> ConstantsRecord:
    if not (0 < m <= M):
        raise ValueError("need 0 < m <= M")
    if L < 0 or c0 < 0:
        raise ValueError("L and c0 must be >= 0")
    if not (0 < eps_lo <= eps_hi):
        raise ValueError("need 0 < eps_lo <= eps_hi")
    if L > 0 and not eps_hi < m / L:
        raise ValueError(f"eps_hi = {eps_hi} must be < m/L = {m / L}")
    if N < 1:
        raise ValueError("N must be >= 1")
    if not (eta > 0 and nu > 0):
        raise ValueError("eta and nu must be positive")
    a = (m - eps_hi * L) / (2.0 * eps_hi)
    theta1 = 1.0 + c0 * (L + M / eps_lo)
    theta2 = 1.5 * L + M / (2.0 * eps_lo)
    kappa = theta1**2 * theta2
    b = 2.0 * eps_hi * N**2 * kappa / (m - eps_hi * L) + N
    beta = (b - 1.0) / b
    n_min = (2.0 * eps_hi * nu / (m - eps_hi * L)) / (eta / 2.0) ** 2
    return ConstantsRecord(
        m=m, M=M, L=L, eps_lo=eps_lo, eps_hi=eps_hi, N=int(N), c0=c0,
        eta=eta, nu=nu, a=a, theta1=theta1, theta2=theta2, kappa=kappa,
        b=b, beta=beta, n_min=n_min,
    )


def constants_for_schedule(
    sched: BregmanSchedule, p: ProblemInstance, c0: float, eta: float, nu: float,
) -> ConstantsRecord:
    return compute_constants(
        sched.m, sched.M, p.smooth.lipschitz, sched.eps_lo, sched.eps_hi,
        p.n_blocks, c0, eta, nu,
    )


# ---------------------------------------------------------------------------
# neighborhood hypothesis and the proximity checks


def in_neighborhood(p, x, x_bar, f_bar, radius, window, fx=None) -> bool:
    """||x - x_bar|| <= radius and F_bar < F(x) < F_bar + window, with the
    lower strict inequality enforced up to floating precision."""
    x = np.asarray(x, dtype=float)
    if float(np.linalg.norm(x - x_bar)) > radius:
        return False
    fx = p.objective(x) if fx is None else fx
    margin = 1e2 * MACH_EPS * (1.0 + abs(f_bar))
    return f_bar + margin < fx < f_bar + window


@dataclass
class ProximityReport:
    hypothesis_met: bool
    rows: list

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def check_value_proximity(
    p: ProblemInstance, gen, eps: float, x, x_bar, constants: ConstantsRecord,
    sublevel_dist=None, slack: float = 1e-9,
) -> ProximityReport:
    """Evaluate the five local proximity statements at x.

    Hypothesis: x in B(x_bar; eta/2, nu/N) for the record's neighborhood;
    points outside get an empty report with hypothesis_met=False.  All index
    expectations are exact enumerations.  ``sublevel_dist`` maps a point to
    its distance from {F <= F_bar}; the default is the singleton {x_bar},
    exact for strongly convex instances probed at the minimizer.
    """
    x = np.asarray(x, dtype=float)
    x_bar = np.asarray(x_bar, dtype=float)
    f_bar = p.objective(x_bar)
    if not in_neighborhood(p, x, x_bar, f_bar, constants.eta / 2.0, constants.level_window):
        return ProximityReport(False, [])
    if sublevel_dist is None:
        sublevel_dist = lambda z: float(np.linalg.norm(z - x_bar))

    N = p.n_blocks
    fx = p.objective(x)
    targets = coordinate_prox_all(p, gen, eps, x)
    t_full = full_prox(p, gen, eps, x)
    f_targets = [p.objective(t) for t in targets]
    mean_f = sum(f_targets) / N
    mean_sq = sum(float(np.sum((x - t) ** 2)) for t in targets) / N
    env = envelope_value(p, gen, eps, x)
    dist = sublevel_dist(x)
    step_full = float(np.linalg.norm(t_full - x))
    mixed = N * mean_f - (N - 1) * fx

    c = constants
    rows = [
        make_check("value-proximity", "i-sublevel-vs-step", dist, c.theta1 * step_full, slack),
        make_check("value-proximity", "ii-mixed-below-envelope", mixed - f_bar, env - f_bar, slack),
        make_check("value-proximity", "ii-envelope-vs-distance", env - f_bar, c.theta2 * dist**2, slack),
        make_check("value-proximity", "iii-mixed-vs-steps", mixed - f_bar, N**2 * c.kappa * mean_sq, slack),
        make_check("value-proximity", "iv-gap-vs-decrease", fx - f_bar, c.b * (fx - mean_f), slack),
        make_check("value-proximity", "v-one-step-contraction", mean_f - f_bar, c.beta * (fx - f_bar), slack),
    ]
    return ProximityReport(True, rows)


@dataclass
class LevelDominanceReport:
    holds: bool
    rows: list

    def __bool__(self) -> bool:
        return self.holds


def check_level_dominance(
    p: ProblemInstance, gen, eps: float, x, f_bar: float,
    constants: ConstantsRecord | None = None, x_bar=None, slack: float = 1e-12,
) -> LevelDominanceReport:
    """Does every one-block target keep the objective at or above f_bar?

    When it does and the neighborhood hypothesis holds (constants and x_bar
    supplied, x in B(x_bar; eta/2, nu/N)), the report also carries the
    consequences: every step fits in eta/2 and every target stays inside
    B(x_bar; eta, nu/N).
    """
    x = np.asarray(x, dtype=float)
    targets = coordinate_prox_all(p, gen, eps, x)
    f_targets = [p.objective(t) for t in targets]
    worst = min(f_targets)
    rows = [make_check("level-dominance", "targets-above-reference", f_bar, worst, slack)]
    holds = rows[0].passed
    if holds and constants is not None and x_bar is not None:
        x_bar = np.asarray(x_bar, dtype=float)
        window = constants.level_window
        if in_neighborhood(p, x, x_bar, f_bar, constants.eta / 2.0, window):
            max_step = max(float(np.linalg.norm(x - t)) for t in targets)
            max_ball = max(float(np.linalg.norm(t - x_bar)) for t in targets)
            rows.append(
                make_check("level-dominance", "step-within-half-eta", max_step, constants.eta / 2.0, 1e-9)
            )
            rows.append(
                make_check("level-dominance", "targets-within-ball", max_ball, constants.eta, 1e-9)
            )
            rows.append(
                make_check(
                    "level-dominance", "targets-within-level",
                    max(f_targets) - f_bar, window, 1e-9,
                )
            )
            holds = all(r.passed for r in rows)
    return LevelDominanceReport(holds, rows)


# ---------------------------------------------------------------------------
# trajectory audits


@dataclass
class ContractionAudit:
    checked: int
    skipped: int
    violations: int
    worst_margin: float  # min over checked points of rhs - lhs

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.checked > 0


def contraction_audit(
    p: ProblemInstance, sched: BregmanSchedule, trajectories, x_bar, f_bar: float,
    constants: ConstantsRecord, slack: float = 1e-9,
) -> ContractionAudit:
    """At every recorded in-neighborhood point, check the enumerated one-step
    contraction mean_i F(T_i(x^k)) - F_bar <= beta (F(x^k) - F_bar)."""
    x_bar = np.asarray(x_bar, dtype=float)
    radius = constants.eta / 2.0
    window = constants.level_window
    checked = skipped = violations = 0
    worst = np.inf
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    for traj in trajectories:
        points = [traj.x0] + [rec.point for rec in traj.records]
        values = traj.objectives()
        for k, (x, fx) in enumerate(zip(points, values)):
            if not in_neighborhood(p, x, x_bar, f_bar, radius, window, fx=fx):
                skipped += 1
                continue
            gen, eps = sched.generator(k), sched.step(k)
            mean_f = float(
                enumerate_expectation(p, gen, eps, x, lambda t: p.objective(t))
            )
            lhs = mean_f - f_bar
            rhs = constants.beta * (fx - f_bar)
            checked += 1
            worst = min(worst, rhs - lhs)
            if lhs > rhs + slack:
                violations += 1
    return ContractionAudit(checked, skipped, violations, float(worst))


def auto_neighborhood(p: ProblemInstance, sched: BregmanSchedule, x_bar, points=None):
    """Pick (eta, nu) so the supplied points satisfy the ball and level
    hypotheses with margin and rejection sampling in B(x_bar; eta, nu) stays
    cheap (nu matched to the smooth curvature over the ball)."""
    x_bar = np.asarray(x_bar, dtype=float)
    a = (sched.m - sched.eps_hi * p.smooth.lipschitz) / (2.0 * sched.eps_hi)
    reach = 1.0
    if points is not None:
        f_bar = p.objective(x_bar)
        for x in points:
            fx = p.objective(np.asarray(x, dtype=float))
            reach = max(reach, float(np.linalg.norm(x - x_bar)))
            if fx > f_bar and a > 0:
                reach = max(reach, float(np.sqrt((fx - f_bar) / a)))
    eta = 2.2 * reach
    nu = max(p.smooth.lipschitz, 1.0) * eta**2
    return eta, nu


# ---------------------------------------------------------------------------
# rate fitting


@dataclass
class RateReport:
    factor: float
    r_squared: float
    window_start: int
    window_stop: int  # exclusive
    mean_gaps: np.ndarray
    label: str = ""
    beta_theory: float | None = None

    @property
    def contracting(self) -> bool:
        return self.factor < 1.0


def fit_linear_rate(mean_gaps, f_bar: float = 0.0, min_window: int = 5) -> RateReport:
    """Least-squares fit of log(gap_k) over the usable window.

    The window opens at the first index where the gap drops below a tenth of
    the initial gap (falling back to the full sequence when that leaves
    fewer than ``min_window`` points) and closes just before the gap first
    sinks under the floor 1e2 * eps_machine * |f_bar| + 1e-14.  Raises if
    the window is shorter than ``min_window`` or contains a nonpositive gap.
    """
    gaps = np.asarray(mean_gaps, dtype=float)
    if gaps.ndim != 1:
        raise ValueError("expected a 1-D gap sequence")
    floor = 1e2 * MACH_EPS * abs(f_bar) + 1e-14
    below = np.nonzero(gaps < floor)[0]
    stop = int(below[0]) if below.size else gaps.size
    burn = np.nonzero(gaps[:stop] < gaps[0] / 10.0)[0] if gaps.size else np.array([])
    start = int(burn[0]) if burn.size else 0
    if stop - start < min_window:
        start = 0
    if stop - start < min_window:
        raise ValueError(
            f"fit window [{start}, {stop}) has fewer than {min_window} points"
        )
    w = gaps[start:stop]
    if np.any(w <= 0):
        raise ValueError("nonpositive gap inside the fit window")
    k = np.arange(start, stop, dtype=float)
    y = np.log(w)
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RateReport(
        factor=float(np.exp(slope)), r_squared=float(r2),
        window_start=start, window_stop=stop, mean_gaps=gaps,
    )


# ---------------------------------------------------------------------------
# scalar grid oracle (shared by the prox self-tests)


class GridProxOracle:
    """Brute-force scalar prox over a fixed grid.

    Precomputes the penalty values once so repeated (w, v) queries stay
    cheap; the grid pins the oracle's resolution (default [-10, 10] at 1e-5).
    """

    def __init__(self, reg: Regularizer, lo: float = -10.0, hi: float = 10.0, step: float = 1e-5):
        self.reg = reg
        count = int(round((hi - lo) / step)) + 1
        self.ts = lo + step * np.arange(count)
        self.g_vals = np.asarray(reg.value(self.ts), dtype=float)
        self.step = step

    def query(self, w: float, v: float) -> tuple[float, float]:
        """(argmin, objective value) of phi(t) + (w/2)(t - v)^2 on the grid."""
        vals = self.g_vals + 0.5 * w * np.square(self.ts - v)
        i = int(np.argmin(vals))
        return float(self.ts[i]), float(vals[i])
