"""Experiment harness: config files, replications, reference values, and the
invariant verification suite behind the CLI.

Config files are flat INI-style sections of ``key = value`` lines.  Unknown
sections or keys are hard errors (typo protection), malformed files report
line numbers, and every relative path is resolved against the config file's
directory.  See configs/reference.cfg for the full key catalog.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import instances as _inst
from .bregman import BregmanGenerator, BregmanSchedule, harmonic_clipped, validate_schedule
from .diagnostics import (
    CheckRow,
    ConstantsRecord,
    GridProxOracle,
    RateReport,
    auto_neighborhood,
    check_level_dominance,
    check_value_proximity,
    constants_for_schedule,
    contraction_audit,
    expectation_identities,
    fit_linear_rate,
    make_check,
    write_report_csv,
)
from .model import ProblemInstance
from .probes import (
    EmptyNeighborhoodError,
    probe_bp_eb,
    probe_kl,
    probe_lt_eb,
    probe_ls_eb,
    sample_level_ball,
    singleton_distance,
    write_probe_csv,
)
from .prox import coordinate_prox_all, envelope_value, full_prox, scalar_prox
from .solver import (
    SolverConfig,
    Trajectory,
    derive_seed,
    near_start_point,
    run,
    sample_in_ball,
    write_trajectory_csv,
)


_VERIFY_STREAM = 0x5EC0_51DE  # rng stream offset for the verification suite
_PROBE_STREAM = 0x9B0B_E5A1  # rng stream offset for error-bound probes


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


class ReplicationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config schema

_FLOAT_LIST = "float-list"

_SCHEMA = {
    "experiment": {
        "kind": str,
        "seed": int,
        "replications": int,
        "output_dir": str,
    },
    "instance": {
        "kind": str,
        "n": int,
        "blocks": int,
        "l1_weight": float,
        "weight": float,
        "gamma": float,
        "a": float,
        "min_eig": float,
        "max_eig": float,
        "design_seed": int,
        "target": float,
        "eigs": _FLOAT_LIST,
        "rows": int,
        "matrix_file": str,
        "rhs_file": str,
        "reg": str,
        "lam": float,
        "mu": float,
    },
    "bregman": {
        "weights": str,
        "q": float,
        "q_lo": float,
        "q_hi": float,
        "period": int,
        "eps_rule": str,
        "eps": float,
        "eps_fraction": float,
        "eps_lo": float,
        "eps_hi": float,
    },
    "solver": {
        "max_iters": int,
        "tolerance": float,
        "check_period": int,
        "x0": str,
        "near_start_radius": float,
    },
    "reference": {
        "source": str,
        "max_steps": int,
        "tolerance": float,
    },
    "probe": {
        "kinds": str,
        "eta": float,
        "nu": float,
        "samples": int,
        "lt_level": float,
        "lt_radius": float,
    },
    "verify": {
        "points": int,
        "prox_queries": int,
    },
}

_EXPERIMENT_KINDS = ("solve", "verify", "rate", "probe-eb")


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    replications: int
    out_dir: str
    instance: dict
    bregman: dict
    solver: dict
    reference: dict
    probe: dict
    verify: dict
    has_probe_section: bool
    base_dir: Path


def _convert(section: str, key: str, raw: str, typ):
    try:
        if typ is _FLOAT_LIST:
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {getattr(typ, '__name__', typ)}"
        ) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None

    data: dict[str, dict] = {name: {} for name in _SCHEMA}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; expected one of {sorted(_SCHEMA)}"
            )
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {key!r} in [{section}]; "
                    f"expected one of {sorted(_SCHEMA[section])}"
                )
            data[section][key] = _convert(section, key, raw, _SCHEMA[section][key])

    exp = data["experiment"]
    kind = exp.get("kind")
    if kind not in _EXPERIMENT_KINDS:
        raise ConfigError(
            f"[experiment] kind must be one of {_EXPERIMENT_KINDS}, got {kind!r}"
        )
    if "kind" not in data["instance"]:
        raise ConfigError("[instance] kind is required")
    seed = exp.get("seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("[experiment] seed must fit in 64 bits")
    reps = exp.get("replications", 1)
    if reps < 1:
        raise ConfigError("[experiment] replications must be >= 1")

    cfg = ExperimentConfig(
        kind=kind,
        seed=seed,
        replications=reps,
        out_dir=exp.get("output_dir", "out"),
        instance=data["instance"],
        bregman=data["bregman"],
        solver=data["solver"],
        reference=data["reference"],
        probe=data["probe"],
        verify=data["verify"],
        has_probe_section=parser.has_section("probe"),
        base_dir=path.parent.resolve(),
    )
    _validate_instance_keys(cfg)
    return cfg


_INSTANCE_KEYS = {
    "lasso-1d": set(),
    "quad-1d": {"target"},
    "quad-l1-1d": set(),
    "diag-quadratic": {"eigs"},
    "lasso-random": {"n", "blocks", "l1_weight", "min_eig", "max_eig", "design_seed"},
    "quadratic-mcp": {"n", "blocks", "weight", "gamma", "min_eig", "max_eig", "design_seed"},
    "quadratic-scad": {"n", "blocks", "weight", "a", "min_eig", "max_eig", "design_seed"},
    "logistic-random": {"n", "blocks", "l1_weight", "rows", "design_seed"},
    "matrix-file": {"matrix_file", "rhs_file", "blocks", "reg", "lam", "mu", "gamma", "a"},
}


def _validate_instance_keys(cfg: ExperimentConfig) -> None:
    kind = cfg.instance["kind"]
    if kind not in _INSTANCE_KEYS:
        raise ConfigError(
            f"[instance] kind {kind!r} unknown; expected one of {sorted(_INSTANCE_KEYS)}"
        )
    extra = set(cfg.instance) - {"kind"} - _INSTANCE_KEYS[kind]
    if extra:
        raise ConfigError(
            f"[instance] keys {sorted(extra)} do not apply to kind {kind!r}"
        )
    if kind == "matrix-file":
        for need in ("matrix_file", "rhs_file", "blocks", "reg"):
            if need not in cfg.instance:
                raise ConfigError(f"[instance] matrix-file needs key {need!r}")
        for k in ("matrix_file", "rhs_file"):
            if not (cfg.base_dir / cfg.instance[k]).is_file():
                raise ConfigError(
                    f"[instance] {k} does not exist: {cfg.base_dir / cfg.instance[k]}"
                )


def build_instance(cfg: ExperimentConfig) -> ProblemInstance:
    opts = dict(cfg.instance)
    kind = opts.pop("kind")
    if kind == "lasso-1d":
        return _inst.lasso_1d()
    if kind == "quad-1d":
        return _inst.quad_1d(opts.get("target", 0.0))
    if kind == "quad-l1-1d":
        return _inst.quad_l1_1d()
    if kind == "diag-quadratic":
        return _inst.diag_quadratic(opts.get("eigs", [1.0, 4.0]))
    if kind in ("lasso-random", "quadratic-mcp", "quadratic-scad", "logistic-random"):
        factory = {
            "lasso-random": _inst.lasso_random,
            "quadratic-mcp": _inst.quadratic_mcp,
            "quadratic-scad": _inst.quadratic_scad,
            "logistic-random": _inst.logistic_random,
        }[kind]
        if "blocks" in opts:
            opts["n_blocks"] = opts.pop("blocks")
        if "design_seed" in opts:
            opts["seed"] = opts.pop("design_seed")
        return factory(**opts)
    if kind == "matrix-file":
        A = np.loadtxt(cfg.base_dir / opts["matrix_file"], ndmin=2)
        b = np.loadtxt(cfg.base_dir / opts["rhs_file"], ndmin=1)
        params = {k: opts[k] for k in ("lam", "mu", "gamma", "a") if k in opts}
        return _inst.matrix_instance(A, b, opts["reg"], params, opts["blocks"])
    raise ConfigError(f"unhandled instance kind {kind!r}")


def build_schedule(cfg: ExperimentConfig, p: ProblemInstance) -> BregmanSchedule:
    br = cfg.bregman
    weights = br.get("weights", "constant")
    if weights == "constant":
        q_lo = q_hi = br.get("q", 1.0)
    elif weights == "alternating":
        try:
            q_lo, q_hi = br["q_lo"], br["q_hi"]
        except KeyError as e:
            raise ConfigError(f"[bregman] alternating weights need {e.args[0]!r}") from None
        if not 0 < q_lo <= q_hi:
            raise ConfigError("[bregman] need 0 < q_lo <= q_hi")
    else:
        raise ConfigError(f"[bregman] weights must be constant|alternating, got {weights!r}")

    L, rho = p.smooth.lipschitz, p.rho_max
    cap = min(
        q_lo / L if L > 0 else np.inf,
        q_lo / rho if rho > 0 else np.inf,
    )
    rule = br.get("eps_rule", "relative")
    if rule == "constant":
        if "eps" not in br:
            raise ConfigError("[bregman] eps_rule=constant needs key 'eps'")
        eps_lo = eps_hi = br["eps"]
        step = None
    elif rule == "relative":
        frac = br.get("eps_fraction", 0.8)
        if not 0 < frac < 1:
            raise ConfigError("[bregman] eps_fraction must lie in (0, 1)")
        if not np.isfinite(cap):
            raise ConfigError(
                "[bregman] eps_rule=relative needs a positive curvature bound; "
                "set eps_rule=constant for flat instances"
            )
        eps_lo = eps_hi = frac * cap
        step = None
    elif rule == "harmonic-clipped":
        try:
            eps_lo, eps_hi = br["eps_lo"], br["eps_hi"]
        except KeyError as e:
            raise ConfigError(f"[bregman] harmonic-clipped needs {e.args[0]!r}") from None
        step = harmonic_clipped(eps_lo, eps_hi)
    else:
        raise ConfigError(f"[bregman] unknown eps_rule {rule!r}")

    if not eps_hi < cap:
        raise ConfigError(
            f"[bregman] eps_hi = {eps_hi} must be < min(m/L, m/rho_max) = {cap}"
        )
    if weights == "constant":
        if step is None:
            return BregmanSchedule.constant(p.n, q_lo, eps_hi)
        gen = BregmanGenerator.uniform(p.n, q_lo)
        return BregmanSchedule(
            generator=lambda k: gen, step=step,
            m=q_lo, M=q_hi, eps_lo=eps_lo, eps_hi=eps_hi,
        )
    eps_arg = eps_hi if step is None else (eps_lo, eps_hi, step)
    return BregmanSchedule.alternating(p.n, q_lo, q_hi, br.get("period", 1), eps_arg)


def build_solver_config(cfg: ExperimentConfig, sched: BregmanSchedule, seed: int) -> SolverConfig:
    sv = cfg.solver
    return SolverConfig(
        schedule=sched,
        max_iters=sv.get("max_iters", 1000),
        tolerance=sv.get("tolerance", 1e-10),
        check_period=sv.get("check_period"),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# reference values


@dataclass
class Reference:
    point: np.ndarray
    value: float
    source: str  # "known" | "best-found"


def resolve_reference_value(
    p: ProblemInstance, sched: BregmanSchedule, source: str = "auto",
    max_steps: int = 100_000, tolerance: float = 1e-12, x0=None,
) -> Reference:
    """Known optimum verbatim, or a deterministic full-map iteration.

    The best-found path runs x <- T(x) with the schedule's k=0 geometry held
    fixed, stopping at ``tolerance`` residual or ``max_steps``; an increase
    of the objective beyond 1e-12 * (1 + |F|) raises DivergenceError.
    """
    if source not in ("auto", "known", "best-found"):
        raise ConfigError(f"reference source must be auto|known|best-found, got {source!r}")
    if source in ("auto", "known") and p.known_optimum is not None:
        x_star, f_star = p.known_optimum
        return Reference(np.asarray(x_star, dtype=float), float(f_star), "known")
    if source == "known":
        raise ConfigError("reference source 'known' but the instance has no known optimum")
    gen, eps = sched.generator(0), sched.step(0)
    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    f_prev = p.objective(x)
    for _ in range(max_steps):
        t = full_prox(p, gen, eps, x)
        f_next = p.objective(t)
        if f_next > f_prev + 1e-12 * (1.0 + abs(f_prev)):
            raise DivergenceError(
                f"objective increased during reference iteration ({f_prev} -> {f_next})"
            )
        moved = float(np.linalg.norm(x - t))
        x, f_prev = t, f_next
        if moved <= tolerance:
            break
    return Reference(x, f_prev, "best-found")


# ---------------------------------------------------------------------------
# replications


@dataclass
class MeanTrajectory:
    """Per-iteration mean and population variance of the gap, truncated to
    the shortest replication."""

    mean_gap: np.ndarray
    var_gap: np.ndarray
    n_replications: int
    seeds: list


@dataclass
class NearStartRow:
    replication: int
    max_dist: float
    stayed: bool


@dataclass
class ReplicationResult:
    instance: ProblemInstance
    schedule: BregmanSchedule
    reference: Reference
    trajectories: list
    mean: MeanTrajectory
    near_start: list | None = None


def aggregate_gaps(trajectories, f_bar: float, seeds=None) -> MeanTrajectory:
    length = min(len(t.records) for t in trajectories) + 1
    gaps = np.stack([t.gaps(f_bar)[:length] for t in trajectories])
    return MeanTrajectory(
        mean_gap=gaps.mean(axis=0),
        var_gap=gaps.var(axis=0),  # population variance (ddof=0)
        n_replications=len(trajectories),
        seeds=list(seeds) if seeds is not None else [],
    )


def run_replications(cfg: ExperimentConfig) -> ReplicationResult:
    """Run R seeded trajectories of the configured experiment.

    Replication r uses the derived stream seed_r = seed XOR (r * golden);
    any aborted replication fails the whole experiment with its id.
    """
    p = build_instance(cfg)
    sched = build_schedule(cfg, p)
    ref = resolve_reference_value(
        p, sched,
        source=cfg.reference.get("source", "auto"),
        max_steps=cfg.reference.get("max_steps", 100_000),
        tolerance=cfg.reference.get("tolerance", 1e-12),
    )
    x0_mode = cfg.solver.get("x0", "zeros")
    if x0_mode not in ("zeros", "near-start"):
        raise ConfigError(f"[solver] x0 must be zeros|near-start, got {x0_mode!r}")
    radius = cfg.solver.get("near_start_radius", 1.0)
    stay_radius = cfg.probe.get("eta", 4.0 * radius) / 2.0

    trajectories, seeds, near_rows = [], [], []
    for r in range(cfg.replications):
        seed_r = derive_seed(cfg.seed, r)
        seeds.append(seed_r)
        x0 = None
        if x0_mode == "near-start":
            x0 = near_start_point(ref.point, radius, seed_r)
        sconf = build_solver_config(cfg, sched, seed_r)
        try:
            traj = run(p, sconf, x0)
        except Exception as e:
            raise ReplicationError(f"replication {r} failed: {e}") from e
        trajectories.append(traj)
        if x0_mode == "near-start":
            dmax = max(
                float(np.linalg.norm(pt - ref.point))
                for pt in [traj.x0] + [rec.point for rec in traj.records]
            )
            near_rows.append(NearStartRow(r, dmax, dmax <= stay_radius))
    mean = aggregate_gaps(trajectories, ref.value, seeds)
    return ReplicationResult(
        instance=p, schedule=sched, reference=ref, trajectories=trajectories,
        mean=mean, near_start=near_rows if x0_mode == "near-start" else None,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_mean_csv(mean: MeanTrajectory, path) -> None:
    lines = ["k,mean_gap,var_gap"]
    for k, (mg, vg) in enumerate(zip(mean.mean_gap, mean.var_gap)):
        lines.append(f"{k},{_fmt(mg)},{_fmt(vg)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_rate_csv(report: RateReport, n_replications: int, path) -> None:
    beta = "" if report.beta_theory is None else _fmt(report.beta_theory)
    lines = [
        "factor,r_squared,window_start,window_stop,n_replications,label,beta_theory",
        f"{_fmt(report.factor)},{_fmt(report.r_squared)},{report.window_start},"
        f"{report.window_stop},{n_replications},{report.label},{beta}",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_near_start_csv(rows, path) -> None:
    lines = ["replication,max_dist,stayed"]
    for r in rows:
        lines.append(f"{r.replication},{_fmt(r.max_dist)},{'true' if r.stayed else 'false'}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_replication_outputs(res: ReplicationResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(res.trajectories) - 1)))
    for r, traj in enumerate(res.trajectories):
        write_trajectory_csv(traj, out / f"traj_{r:0{width}d}.csv", f_bar=res.reference.value)
    write_mean_csv(res.mean, out / "mean_gap.csv")
    if res.near_start is not None:
        write_near_start_csv(res.near_start, out / "near_start.csv")


# ---------------------------------------------------------------------------
# probe and neighborhood assembly shared by rate / probe-eb / verify


def _neighborhood(cfg, p, sched, ref, scout_points):
    eta = cfg.probe.get("eta")
    nu = cfg.probe.get("nu")
    if eta is None or nu is None:
        auto_eta, auto_nu = auto_neighborhood(p, sched, ref.point, scout_points)
        eta = auto_eta if eta is None else eta
        nu = auto_nu if nu is None else nu
    return float(eta), float(nu)


def _scout(p, sched, cfg, ref) -> list:
    """A short deterministic trajectory to size the neighborhood."""
    sconf = SolverConfig(
        schedule=sched,
        max_iters=min(cfg.solver.get("max_iters", 1000), 50 * p.n_blocks),
        tolerance=0.0,
        check_period=None,
        seed=derive_seed(cfg.seed, 0),
    )
    traj = run(p, sconf)
    return [traj.x0] + [rec.point for rec in traj.records]


def probed_constants(
    cfg, p, sched, ref, eta: float, nu: float, rng, inflation: float = 1.1,
) -> tuple[ConstantsRecord, object]:
    est = probe_ls_eb(p, ref.point, eta, nu, cfg.probe.get("samples", 10_000), rng)
    constants = constants_for_schedule(sched, p, inflation * est.value, eta, nu)
    return constants, est


def hypothesis_points(p, x_bar, radius: float, window: float, count: int, rng):
    """Sample points satisfying the ball + level-window hypothesis.

    Uniform ball proposals concentrate near the shell in high dimension,
    where the objective usually overshoots a narrow level window, so start
    from a radius matched to the smooth curvature (still inside ``radius``)
    and halve it whenever acceptance stays empty.
    """
    r = min(radius, float(np.sqrt(window / max(p.smooth.lipschitz, 1.0))))
    for _ in range(16):
        try:
            pts, _, _ = sample_level_ball(
                p, x_bar, r, window, count, rng, max_draws=60 * count
            )
        except EmptyNeighborhoodError:
            pts = []
        if len(pts) >= min(20, count):
            return pts
        r /= 2.0
    raise EmptyNeighborhoodError(
        f"could not populate the hypothesis set B(x_bar; {radius}, {window})"
    )


# ---------------------------------------------------------------------------
# verification suite


def _worst(rows_iter):
    """Keep the row with the smallest margin rhs - lhs."""
    worst = None
    for row in rows_iter:
        if worst is None or row.slack < worst.slack:
            worst = row
    return worst


def run_verification(cfg: ExperimentConfig) -> list[CheckRow]:
    """Numeric invariant suite for the configured instance.

    Groups: schedule admissibility, smooth-term calculus, penalty convexity
    and subdifferentials, kernel sandwich, prox optimality and oracle
    equivalence, exact index-expectation identities, per-block decrease,
    envelope chain, and the local proximity/level checks driven by a probed
    error-bound constant (inflated by 1.1 before use).
    """
    p = build_instance(cfg)
    sched = build_schedule(cfg, p)
    ref = resolve_reference_value(p, sched, cfg.reference.get("source", "auto"))
    n_points = cfg.verify.get("points", 1000)
    n_prox = cfg.verify.get("prox_queries", 1000)
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _VERIFY_STREAM)))
    rows: list[CheckRow] = []

    rep = validate_schedule(sched, p, cfg.solver.get("max_iters", 1000))
    rows.append(make_check("schedule", "declared-bounds", 0.0 if rep.ok else 1.0, 0.0, 0.0))

    spread = 3.0 * max(1.0, float(np.linalg.norm(ref.point)))
    pts = [sample_in_ball(ref.point, spread, rng) for _ in range(n_points)]
    gen0, eps0 = sched.generator(0), sched.step(0)
    L = p.smooth.lipschitz

    # smooth term: descent lemma and finite-difference gradient
    rows.append(_worst(
        make_check(
            "smooth", "descent-lemma",
            p.smooth.value(y) - p.smooth.value(x) - float(p.smooth.grad(x) @ (y - x)),
            0.5 * L * float(np.sum((y - x) ** 2)),
            1e-9,
        )
        for x, y in zip(pts, pts[1:] + pts[:1])
    ))
    rows.append(_worst(
        _fd_gradient_row(p, x) for x in pts[: min(25, len(pts))]
    ))

    # penalties: midpoint semi-convexity and subdifferential soundness
    for _, reg in _distinct_regs(p):
        ts = rng.standard_normal(2 * n_points) * 2.0
        rows.append(_worst(
            _semiconvex_row(reg, ts[2 * j], ts[2 * j + 1]) for j in range(n_points)
        ))
        rows.append(_worst(
            _subdiff_row(reg, t) for t in ts[: min(50, ts.size)] if abs(t) > 1e-3
        ))

    # kernel sandwich
    m, M = sched.m, sched.M
    def _sandwich(x, y):
        d2 = float(np.sum((y - x) ** 2))
        D = 0.5 * float(np.sum(gen0.weights * (y - x) ** 2))
        lo_gap = D - 0.5 * m * d2
        hi_gap = 0.5 * M * d2 - D
        return make_check("kernel", "sandwich", -min(lo_gap, hi_gap), 0.0, 1e-12)
    rows.append(_worst(_sandwich(x, y) for x, y in zip(pts, pts[1:] + pts[:1])))

    # prox layer: optimality certificate, identities, decrease, envelope
    rows.append(_worst(_certificate_row(p, gen0, eps0, x) for x in pts[:200]))

    def _identity_rows():
        for x in pts:
            dev = expectation_identities(p, gen0, eps0, x)
            yield dev
    worst_dev = {"mean-point": 0.0, "penalty-mixing": 0.0, "squared-step": 0.0}
    for dev in _identity_rows():
        for k in worst_dev:
            worst_dev[k] = max(worst_dev[k], dev[k])
    for name, v in worst_dev.items():
        rows.append(make_check("expectation-identity", name, v, 0.0, 1e-12))

    a = (m - sched.eps_hi * L) / (2.0 * sched.eps_hi)
    dec_rows, env_rows, upper_rows = [], [], []
    for x in pts:
        fx = p.objective(x)
        targets = coordinate_prox_all(p, gen0, eps0, x)
        f_t = [p.objective(t) for t in targets]
        sq = [float(np.sum((x - t) ** 2)) for t in targets]
        worst_i = max(range(len(targets)), key=lambda i: f_t[i] - fx + a * sq[i])
        dec_rows.append(make_check(
            "sufficient-decrease", "per-block",
            f_t[worst_i] - fx, -a * sq[worst_i], 1e-9,
        ))
        env = envelope_value(p, gen0, eps0, x)
        upper_rows.append(make_check("envelope", "below-objective", env, fx, 1e-12))
        N = p.n_blocks
        env_rows.append(make_check(
            "envelope", "mean-decrease",
            N * (sum(f_t) / N) - (N - 1) * fx,
            env - 0.5 * N * (m / sched.eps_hi - L) * (sum(sq) / N),
            1e-9,
        ))
    rows.append(_worst(dec_rows))
    rows.append(_worst(upper_rows))
    rows.append(_worst(env_rows))

    # scalar prox against the grid oracle
    for label, reg in _oracle_regs(p):
        oracle = GridProxOracle(reg)
        arg_rows, obj_rows = [], []
        for _ in range(n_prox):
            w = reg.rho + 0.1 + 4.9 * rng.random()
            v = -5.0 + 10.0 * rng.random()
            t_closed = float(np.asarray(scalar_prox(reg, w, v)))
            t_grid, f_grid = oracle.query(w, v)
            f_closed = float(np.asarray(reg.value(t_closed))) + 0.5 * w * (t_closed - v) ** 2
            arg_rows.append(make_check("prox-oracle", f"{label}-argmin", abs(t_closed - t_grid), 0.0, 1e-3))
            obj_rows.append(make_check("prox-oracle", f"{label}-objective", f_closed - f_grid, 0.0, 1e-8))
        rows.append(_worst(arg_rows))
        rows.append(_worst(obj_rows))

    # local proximity checks behind a probed constant
    eta, nu = _neighborhood(cfg, p, sched, ref, _scout(p, sched, cfg, ref))
    constants, _ = probed_constants(cfg, p, sched, ref, eta, nu, rng)
    f_bar = p.objective(ref.point)
    hyp_pts = hypothesis_points(
        p, ref.point, constants.eta / 2.0, constants.level_window,
        min(n_points, 200), rng,
    )
    prox_rows: dict[str, list] = {}
    dom_rows = []
    met = 0
    for x in hyp_pts:
        report = check_value_proximity(p, gen0, eps0, x, ref.point, constants)
        if not report.hypothesis_met:
            continue
        met += 1
        for row in report.rows:
            prox_rows.setdefault(row.name, []).append(row)
        dom = check_level_dominance(
            p, gen0, eps0, x, f_bar, constants=constants, x_bar=ref.point
        )
        dom_rows.extend(dom.rows)
    if met == 0:
        rows.append(make_check("value-proximity", "hypothesis-met", 1.0, 0.0, 0.0))
    else:
        for name, rlist in prox_rows.items():
            rows.append(_worst(rlist))
        rows.append(_worst(dom_rows))
    return [r for r in rows if r is not None]


def _distinct_regs(p: ProblemInstance):
    seen = set()
    for i, reg in enumerate(p.regularizers):
        if reg.kind not in seen:
            seen.add(reg.kind)
            yield i, reg


def _oracle_regs(p: ProblemInstance):
    """Instance penalties plus the canonical thresholding trio."""
    from .model import L1Penalty, McpPenalty, ScadPenalty

    out = {}
    for _, reg in _distinct_regs(p):
        if reg.kind != "zero":
            out[reg.kind] = reg
    out.setdefault("l1", L1Penalty(1.0))
    out.setdefault("scad", ScadPenalty(1.0, 3.7))
    out.setdefault("mcp", McpPenalty(1.0, 3.0))
    return sorted(out.items())


def _fd_gradient_row(p, x, h: float = 1e-6) -> CheckRow:
    g = p.smooth.grad(x)
    fd = np.empty_like(g)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd[j] = (p.smooth.value(x + e) - p.smooth.value(x - e)) / (2 * h)
    err = float(np.max(np.abs(fd - g))) / (1.0 + float(np.max(np.abs(g))))
    return make_check("smooth", "gradient-fd", err, 0.0, 1e-5)


def _semiconvex_row(reg, t, s) -> CheckRow:
    h = lambda u: float(np.asarray(reg.value(u))) + 0.5 * reg.rho * u * u
    mid = 0.5 * (t + s)
    return make_check(
        "penalty", f"{reg.kind}-midpoint-convexity",
        h(mid), 0.5 * (h(t) + h(s)), 1e-9,
    )


def _subdiff_row(reg, t, h: float = 1e-6) -> CheckRow:
    lo, hi = reg.subdiff(np.array([t]))
    width = float(hi[0] - lo[0])
    fd = (float(np.asarray(reg.value(t + h))) - float(np.asarray(reg.value(t - h)))) / (2 * h)
    center = 0.5 * float(lo[0] + hi[0])
    err = max(width, abs(center - fd) / (1.0 + abs(fd)))
    return make_check("penalty", f"{reg.kind}-subdiff", err, 0.0, 1e-5)


def _certificate_row(p, gen, eps, x) -> CheckRow:
    """0 must lie in grad f(x) + dG(y) + (q/eps)(y - x) at y = T(x)."""
    g = p.smooth.grad(x)
    y = full_prox(p, gen, eps, x, grad=g)
    worst = 0.0
    for i, reg in enumerate(p.regularizers):
        sl = p.partition.block_slice(i)
        r = g[sl] + (gen.weights[sl] / eps) * (y[sl] - x[sl])
        lo, hi = reg.subdiff(y[sl])
        xi = np.clip(-r, lo, hi)
        worst = max(worst, float(np.max(np.abs(r + xi))))
    return make_check("prox", "optimality-certificate", worst, 0.0, 1e-8)


# ---------------------------------------------------------------------------
# experiment flows (one per CLI subcommand); each returns a process exit code


def _require_kind(cfg: ExperimentConfig, expected: str) -> None:
    if cfg.kind != expected:
        raise ConfigError(
            f"config declares kind={cfg.kind!r} but was run as {expected!r}"
        )


def run_solve(cfg: ExperimentConfig, out_dir) -> int:
    _require_kind(cfg, "solve")
    res = run_replications(cfg)
    write_replication_outputs(res, out_dir)
    traj = res.trajectories[0]
    resid = traj.final_residual
    print(f"instance: {cfg.instance['kind']}  n={res.instance.n}  blocks={res.instance.n_blocks}")
    print(f"reference: {res.reference.source}  value={res.reference.value:.12g}")
    for r, t in enumerate(res.trajectories):
        print(
            f"replication {r}: {t.termination} after {len(t.records)} steps, "
            f"F={t.final_objective:.12g}, gap={t.final_objective - res.reference.value:.6g}"
        )
    if resid is not None:
        print(f"final residual (replication 0): {resid:.6g}")
    if res.near_start is not None:
        stayed = sum(row.stayed for row in res.near_start)
        print(f"near-start replications staying local: {stayed}/{len(res.near_start)}")
    print(f"wrote {len(res.trajectories)} trajectory file(s) to {out_dir}")
    return 0


def run_rate(cfg: ExperimentConfig, out_dir) -> int:
    """Replicated run + least-squares rate fit; contraction audit when a
    [probe] section supplies the neighborhood inputs."""
    _require_kind(cfg, "rate")
    res = run_replications(cfg)
    out = Path(out_dir)
    write_replication_outputs(res, out)
    label = (
        "to known optimum" if res.reference.source == "known"
        else "to best-found value"
    )
    report = fit_linear_rate(res.mean.mean_gap, f_bar=res.reference.value)
    report.label = label

    audit = None
    if cfg.has_probe_section:
        p, sched, ref = res.instance, res.schedule, res.reference
        pts = [x for t in res.trajectories[:10] for x in [t.x0] + [r.point for r in t.records]]
        eta, nu = _neighborhood(cfg, p, sched, ref, pts)
        rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _PROBE_STREAM)))
        constants, est = probed_constants(cfg, p, sched, ref, eta, nu, rng)
        report.beta_theory = constants.beta
        audit = contraction_audit(p, sched, res.trajectories, ref.point, ref.value, constants)
        write_probe_csv([est], out / "eb_report.csv")

    write_rate_csv(report, res.mean.n_replications, out / "rate_report.csv")
    print(f"reference: {res.reference.source}  value={res.reference.value:.12g}")
    print(
        f"fit window [{report.window_start}, {report.window_stop}): "
        f"factor={report.factor:.6f}  r_squared={report.r_squared:.6f}"
    )
    if report.beta_theory is not None:
        print(f"theoretical per-step factor bound: beta={report.beta_theory:.9f}")
    if audit is not None:
        print(
            f"contraction audit: checked={audit.checked} skipped={audit.skipped} "
            f"violations={audit.violations} worst_margin={audit.worst_margin:.3e}"
        )
        if not audit.ok:
            print("contraction audit FAILED")
            return 1
    print(f"wrote rate_report.csv and {res.mean.n_replications} trajectories to {out}")
    return 0 if report.contracting else 1


def run_probe_eb(cfg: ExperimentConfig, out_dir) -> int:
    _require_kind(cfg, "probe-eb")
    p = build_instance(cfg)
    sched = build_schedule(cfg, p)
    ref = resolve_reference_value(p, sched, cfg.reference.get("source", "auto"))
    eta, nu = _neighborhood(cfg, p, sched, ref, _scout(p, sched, cfg, ref))
    samples = cfg.probe.get("samples", 10_000)
    kinds = [k.strip() for k in cfg.probe.get("kinds", "ls-eb").split(",") if k.strip()]
    known = {"ls-eb", "kl", "bp-eb", "lt-eb"}
    bad = sorted(set(kinds) - known)
    if bad:
        raise ConfigError(f"[probe] unknown kinds {bad}; expected subset of {sorted(known)}")

    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _PROBE_STREAM)))
    gen0, eps0 = sched.generator(0), sched.step(0)
    crit = singleton_distance(ref.point)
    estimates = []
    for kind in kinds:
        if kind == "ls-eb":
            est = probe_ls_eb(p, ref.point, eta, nu, samples, rng)
        elif kind == "kl":
            est = probe_kl(p, ref.point, eta, nu, samples, rng)
        elif kind == "bp-eb":
            est = probe_bp_eb(p, gen0, eps0, ref.point, eta, nu, crit, samples, rng)
        else:
            level = cfg.probe.get("lt_level", ref.value + nu)
            radius = cfg.probe.get("lt_radius", eta)
            est = probe_lt_eb(
                p, eps0, level, radius, crit, samples, rng,
                center=ref.point, sample_radius=eta,
            )
        estimates.append(est)
        print(
            f"{est.kind}: {est.constant_name}={est.value:.6f} "
            f"({est.samples} accepted samples, oracle={est.oracle})"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_probe_csv(estimates, out / "eb_report.csv")
    print(f"wrote eb_report.csv to {out}")
    return 0


def run_verify(cfg: ExperimentConfig, out_dir) -> int:
    _require_kind(cfg, "verify")
    rows = run_verification(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(rows, out / "verify_report.csv")
    n_pass = sum(r.passed for r in rows)
    for r in rows:
        mark = "pass" if r.passed else "FAIL"
        print(f"[{mark}] {r.check}/{r.name}: lhs={r.lhs:.6e} rhs={r.rhs:.6e} slack={r.slack:.3e}")
    print(f"{n_pass}/{len(rows)} checks passed; wrote verify_report.csv to {out}")
    return 0 if n_pass == len(rows) else 1


_FLOWS = {
    "solve": run_solve,
    "verify": run_verify,
    "rate": run_rate,
    "probe-eb": run_probe_eb,
}


def run_experiment(config_path, subcommand: str, seed=None, out_dir=None) -> int:
    """Load a config, apply CLI overrides, and dispatch on the subcommand."""
    cfg = load_config(config_path)
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must fit in 64 bits")
        cfg.seed = seed
    out = out_dir if out_dir is not None else cfg.base_dir / cfg.out_dir
    return _FLOWS[subcommand](cfg, out)
