"""Nonsmooth minimization of eigenvalue objectives and controller synthesis.

The spectral abscissa and its robust variants are differentiable almost
everywhere but not everywhere (and not everywhere Lipschitz), so the solver
combines BFGS with a weak Wolfe line search and a gradient-sampling polish:
near a nonsmooth minimizer, gradients sampled in a shrinking ball are
combined through their minimum-norm convex combination, whose norm serves
as the stationarity measure.

Two synthesis drivers are provided: minimizing the robust spectral abscissa
C = max(c, C_D) directly, and minimizing c under the constraint
gamma_0 < gamma through a logarithmic barrier c - r log(gamma - gamma_0)
solved for a decreasing sequence of r with warm starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .asymptotic import ThetaGrid, strong_stability, StrongStabilityReport
from .model import (
    AffineFamily,
    AssumptionViolation,
    ControllerEmbedding,
    ControllerIo,
    PlantIo,
    interconnect,
    make_controller_family,
)
from .sensitivity import CD_gradient, GradientSample, abscissa_gradient, gamma0_gradient
from .spectrum import RootOptions

__all__ = [
    "SolveOptions",
    "SynthesisResult",
    "MinimizeResult",
    "InfeasibleProblem",
    "nonsmooth_minimize",
    "min_norm_in_hull",
    "stabilization_max",
    "feasibility_phase",
    "stabilization_barrier",
]


class InfeasibleProblem(RuntimeError):
    """No parameter point satisfying gamma_0 < gamma was found."""


@dataclass(frozen=True)
class SolveOptions:
    """Options shared by the optimizer and the synthesis drivers."""

    starts: int = 5
    seed: int = 1
    bfgs_max_iter: int = 400
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.5
    gs_samples: int | None = None          # default 2 * n_p
    gs_radii: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    gs_iters: int = 20
    stop_tol: float = 1e-5
    barrier_r0: float = 1e-3
    barrier_rounds: int = 3
    barrier_decay: float = 10.0
    gamma: float = 1.0 - 1e-3
    ls_max_iter: int = 40
    rank_tol: float = 1e-10
    root_opts: RootOptions | None = None   # oracle root options (e.g. fixed N)
    grid: ThetaGrid | None = None

    def __post_init__(self):
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if any(b >= a for a, b in zip(self.gs_radii, self.gs_radii[1:])):
            raise ValueError("sampling radii must be strictly decreasing")
        if not self.gamma <= 1.0:
            raise ValueError("gamma must be <= 1")


@dataclass
class MinimizeResult:
    p: np.ndarray
    f: float
    trace: list[float] = field(default_factory=list)
    status: str = "ok"
    n_evals: int = 0


@dataclass(frozen=True)
class SynthesisResult:
    """Synthesized controller with its certified report.

    ``objective`` is C for the max variant and c for the barrier variant,
    both read from ``report`` (recomputed from the returned controller, not
    from optimizer internals).  ``trace`` holds the accepted objective
    values of the winning start.
    """

    controller: ControllerIo
    objective: float
    report: StrongStabilityReport
    trace: np.ndarray
    p: np.ndarray
    status: str


def min_norm_in_hull(G: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Weights of the minimum-norm point in the convex hull of the columns of G.

    Wolfe's active-set iteration over the simplex: grow the support with the
    most violating column, solve the affine minimum-norm subproblem on the
    support, and step back to the feasible segment when a weight would turn
    negative.  Terminates at the optimality condition
    g_i . x >= ||x||^2 for all columns g_i.
    """
    k = G.shape[1]
    if k == 0:
        raise ValueError("need at least one column")
    Q = G.T @ G
    support = [int(np.argmin(np.diag(Q)))]
    w = np.zeros(k)
    w[support[0]] = 1.0
    for _ in range(50 * (k + 1)):
        x = G @ w
        xx = float(x @ x)
        dots = G.T @ x
        j = int(np.argmin(dots))
        if dots[j] >= xx - tol * max(1.0, xx):
            return w
        if j in support:
            return w
        support.append(j)
        while True:
            # affine minimum-norm point on the current support
            s = len(support)
            K = np.zeros((s + 1, s + 1))
            K[:s, :s] = Q[np.ix_(support, support)]
            K[:s, s] = 1.0
            K[s, :s] = 1.0
            rhs = np.zeros(s + 1)
            rhs[s] = 1.0
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            v = sol[:s]
            if np.all(v >= -1e-12):
                w = np.zeros(k)
                w[support] = np.clip(v, 0.0, None)
                ssum = w.sum()
                if ssum > 0:
                    w /= ssum
                break
            w_s = w[support]
            deltas = w_s - v
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(v < -1e-12, w_s / deltas, np.inf)
            theta = min(1.0, float(np.min(ratios)))
            w_new = w_s + theta * (v - w_s)
            w = np.zeros(k)
            keep = w_new > 1e-14
            for idx, val, kp in zip(support, w_new, keep):
                if kp:
                    w[idx] = val
            support = [idx for idx, kp in zip(support, keep) if kp]
            if not support:
                support = [j]
                w = np.zeros(k)
                w[j] = 1.0
                break
    return w


def _weak_wolfe(oracle, p, f0, g0, d, opts: SolveOptions):
    """Weak Wolfe line search (bracketing bisection).

    Accepts t with sufficient decrease and weak curvature; on curvature
    stall returns the best sufficient-decrease point found so that progress
    is kept (the BFGS update is skipped there).
    """
    gd0 = float(g0 @ d)
    lo, hi = 0.0, math.inf
    t = 1.0
    s_lo = None
    for _ in range(opts.ls_max_iter):
        s = oracle(p + t * d)
        if not math.isfinite(s.value) or s.value > f0 + opts.wolfe_c1 * t * gd0:
            hi = t
        elif float(s.gradient @ d) < opts.wolfe_c2 * gd0:
            lo, s_lo = t, s
        else:
            return t, s, "wolfe"
        t = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * t
    if s_lo is not None:
        return lo, s_lo, "decrease"
    return 0.0, None, "fail"


def _sample_ball(rng, center: np.ndarray, radius: float, count: int) -> list[np.ndarray]:
    n = len(center)
    out = []
    for _ in range(count):
        u = rng.standard_normal(n)
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            u[0] = 1.0
            nrm = 1.0
        r = radius * rng.uniform() ** (1.0 / max(n, 1))
        out.append(center + (r / nrm) * u)
    return out


def nonsmooth_minimize(oracle, p0, opts: SolveOptions | None = None,
                       rng: np.random.Generator | None = None,
                       early_stop: float | None = None) -> MinimizeResult:
    """Two-phase minimization: BFGS with weak Wolfe, then gradient sampling.

    The oracle maps p to a :class:`GradientSample`; +inf values mark
    forbidden points (the line search retreats from them).  Nondifferentiable
    starting points are nudged by 1e-10 once; inside the iteration the
    flagged branch gradients are used as sampled subgradients, which is what
    the sampling phase is built around.  Deterministic for a fixed rng.
    """
    opts = opts or SolveOptions()
    rng = rng or np.random.default_rng(opts.seed)
    p = np.asarray(p0, dtype=float).copy()
    n = p.size
    evals = [0]

    def ev(q):
        evals[0] += 1
        return oracle(q)

    s = ev(p)
    if not math.isfinite(s.value):
        return MinimizeResult(p, s.value, [], "infeasible_start", evals[0])
    if not s.differentiable:
        p_try = p + 1e-10 * (1.0 + np.linalg.norm(p)) * rng.standard_normal(n)
        s_try = ev(p_try)
        if math.isfinite(s_try.value) and s_try.value <= s.value:
            p, s = p_try, s_try

    trace = [s.value]
    best_p, best_f = p.copy(), s.value
    if early_stop is not None and best_f < early_stop:
        return MinimizeResult(best_p, best_f, trace, "early", evals[0])

    if n == 0:
        return MinimizeResult(p, s.value, trace, "constant", evals[0])

    # phase (a): BFGS
    H = np.eye(n)
    f, g = s.value, s.gradient
    strikes = 0
    for _ in range(opts.bfgs_max_iter):
        gn = np.linalg.norm(g)
        if gn <= opts.stop_tol:
            break
        d = -(H @ g)
        if not np.all(np.isfinite(d)) or float(g @ d) >= 0.0:
            H = np.eye(n)
            d = -g
        t, s_new, how = _weak_wolfe(ev, p, f, g, d, opts)
        if how == "fail" or s_new is None:
            strikes += 1
            if strikes >= 2:
                break
            H = np.eye(n)
            continue
        strikes = 0
        step = t * d
        y = s_new.gradient - g
        p = p + step
        f, g = s_new.value, s_new.gradient
        trace.append(f)
        if f < best_f:
            best_f, best_p = f, p.copy()
        if early_stop is not None and best_f < early_stop:
            return MinimizeResult(best_p, best_f, trace, "early", evals[0])
        sy = float(step @ y)
        if how == "wolfe" and sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(step, y)
            H = V @ H @ V.T + rho * np.outer(step, step)

    # phase (b): gradient sampling polish from the best point
    p = best_p.copy()
    s = ev(p)
    f = s.value
    n_samp = opts.gs_samples if opts.gs_samples is not None else 2 * n
    scale = max(1.0, float(np.max(np.abs(p))) if p.size else 1.0)
    for r_rel in opts.gs_radii:
        radius = r_rel * scale
        for _ in range(opts.gs_iters):
            pts = [p] + _sample_ball(rng, p, radius, n_samp)
            grads = []
            for q in pts:
                sq = ev(q) if q is not pts[0] else s
                if math.isfinite(sq.value) and np.all(np.isfinite(sq.gradient)):
                    grads.append(sq.gradient)
            if not grads:
                break
            G = np.column_stack(grads)
            w = min_norm_in_hull(G)
            gvec = G @ w
            gn = float(np.linalg.norm(gvec))
            if gn <= opts.stop_tol:
                break
            d = -gvec / gn
            t = radius
            accepted = False
            for _ in range(30):
                s_try = ev(p + t * d)
                if math.isfinite(s_try.value) and s_try.value < f - opts.wolfe_c1 * t * gn:
                    p = p + t * d
                    f, s = s_try.value, s_try
                    trace.append(f)
                    accepted = True
                    if f < best_f:
                        best_f, best_p = f, p.copy()
                    if early_stop is not None and best_f < early_stop:
                        return MinimizeResult(best_p, best_f, trace, "early", evals[0])
                    break
                t *= 0.5
            if not accepted:
                break

    return MinimizeResult(best_p, best_f, trace, "ok", evals[0])


def _c_sample(family: AffineFamily, p, opts: SolveOptions) -> GradientSample:
    return abscissa_gradient(family, p, opts.root_opts)


def _cd_sample(family: AffineFamily, p, opts: SolveOptions) -> GradientSample:
    return CD_gradient(family, p, opts.grid)


def make_C_oracle(family: AffineFamily, opts: SolveOptions):
    """Oracle for C(p) = max(c(p), C_D(p)); +inf where Assumption 1 fails."""

    n_p = family.n_p

    def oracle(p):
        try:
            sc = _c_sample(family, p, opts)
            scd = _cd_sample(family, p, opts)
        except AssumptionViolation:
            return GradientSample(math.inf, np.zeros(n_p), {}, False)
        value = max(sc.value, scd.value)
        if not math.isfinite(value):
            # both branches -inf cannot happen for meaningful systems; guard anyway
            return GradientSample(value, np.zeros(n_p), {}, False)
        active = sc if sc.value >= scd.value else scd
        tie = (
            math.isfinite(sc.value)
            and math.isfinite(scd.value)
            and abs(sc.value - scd.value) <= 1e-9 * (1.0 + abs(value))
        )
        return GradientSample(value, active.gradient, active.active,
                              active.differentiable and not tie)

    return oracle


def make_gamma0_oracle(family: AffineFamily, opts: SolveOptions):
    n_p = family.n_p

    def oracle(p):
        try:
            return gamma0_gradient(family, p, opts.grid)
        except AssumptionViolation:
            return GradientSample(math.inf, np.zeros(n_p), {}, False)

    return oracle


def make_barrier_oracle(family: AffineFamily, r: float, opts: SolveOptions,
                        interior_log: list | None = None):
    """Oracle for c(p) - r log(gamma - gamma_0(p)); +inf outside the feasible set."""

    n_p = family.n_p
    gamma = opts.gamma

    def oracle(p):
        try:
            sg = gamma0_gradient(family, p, opts.grid)
            if sg.value >= gamma:
                return GradientSample(math.inf, np.zeros(n_p), {}, False)
            sc = _c_sample(family, p, opts)
        except AssumptionViolation:
            return GradientSample(math.inf, np.zeros(n_p), {}, False)
        slack = gamma - sg.value
        value = sc.value + (-r * math.log(slack))
        grad = sc.gradient + (r / slack) * sg.gradient
        if interior_log is not None:
            interior_log.append(sg.value)
        return GradientSample(value, grad, {"c": sc.value, "gamma0": sg.value},
                              sc.differentiable and sg.differentiable)

    return oracle


def draw_initial(emb: ControllerEmbedding, rng: np.random.Generator) -> np.ndarray:
    """Initial controller entries ~ N(0, 0.5^2), A_c shifted by -0.5 I."""
    rows, cols = emb.n_c + emb.n_u, emb.n_c + emb.n_y
    K = 0.5 * rng.standard_normal((rows, cols))
    K[:emb.n_c, :emb.n_c] -= 0.5 * np.eye(emb.n_c)
    return emb.params_from_block(K)


def _multi_start(oracle, draw, opts: SolveOptions, early_stop=None):
    """Best nonsmooth_minimize result over seeded random starts."""
    seeds = np.random.SeedSequence(opts.seed).spawn(max(opts.starts, 1))
    best = None
    for ss in seeds:
        rng = np.random.default_rng(ss)
        res = None
        for _ in range(5):
            p0 = draw(rng)
            res = nonsmooth_minimize(oracle, p0, opts, rng, early_stop)
            if res.status != "infeasible_start":
                break
        if res is None:
            continue
        if best is None or res.f < best.f:
            best = res
        if early_stop is not None and best.f < early_stop:
            break
    return best


def _certify(plant: PlantIo, emb: ControllerEmbedding, res: MinimizeResult,
             opts: SolveOptions, kind: str) -> SynthesisResult:
    controller = emb.controller_at(res.p)
    closed = interconnect(plant, controller)
    report = strong_stability(closed, rank_tol=opts.rank_tol)
    objective = report.robust_abscissa if kind == "max" else report.c
    return SynthesisResult(
        controller=controller,
        objective=float(objective),
        report=report,
        trace=np.asarray(res.trace, dtype=float),
        p=np.asarray(res.p, dtype=float),
        status=res.status,
    )


def stabilization_max(plant: PlantIo, controller_order: int,
                      opts: SolveOptions | None = None,
                      fixed_mask=None, fixed_values=None) -> SynthesisResult:
    """Minimize the robust spectral abscissa C over a fixed-order controller.

    Success means a strictly negative optimum; a nonnegative one is still
    returned with its certified value.
    """
    opts = opts or SolveOptions()
    family, emb = make_controller_family(plant, controller_order, fixed_mask, fixed_values)
    oracle = make_C_oracle(family, opts)
    best = _multi_start(oracle, lambda rng: draw_initial(emb, rng), opts)
    if best is None:
        raise RuntimeError("no usable starting point found")
    return _certify(plant, emb, best, opts, "max")


def feasibility_phase(family: AffineFamily, opts: SolveOptions | None = None,
                      emb: ControllerEmbedding | None = None):
    """Find p with gamma_0(p) < gamma by minimizing gamma_0; None if not found."""
    opts = opts or SolveOptions()
    oracle = make_gamma0_oracle(family, opts)
    zero = np.zeros(family.n_p)
    s0 = oracle(zero)
    if s0.value < opts.gamma:
        return zero
    if emb is not None:
        draw = lambda rng: draw_initial(emb, rng)
    else:
        draw = lambda rng: 0.5 * rng.standard_normal(family.n_p)
    best = _multi_start(oracle, draw, opts, early_stop=opts.gamma)
    if best is not None and best.f < opts.gamma:
        return best.p
    return None


def stabilization_barrier(plant: PlantIo, controller_order: int,
                          opts: SolveOptions | None = None,
                          fixed_mask=None, fixed_values=None) -> SynthesisResult:
    """Minimize c subject to gamma_0 < gamma through the log-barrier relaxation.

    A feasibility phase supplies the interior starting point; the barrier
    subproblem is re-solved for decreasing r, warm-started each round.
    Raises :class:`InfeasibleProblem` when no interior point is found.
    """
    opts = opts or SolveOptions()
    family, emb = make_controller_family(plant, controller_order, fixed_mask, fixed_values)
    p0 = feasibility_phase(family, opts, emb)
    if p0 is None:
        raise InfeasibleProblem(
            f"no controller with gamma_0 < {opts.gamma} found within the budget"
        )
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed).spawn(1)[0])
    p = np.asarray(p0, dtype=float)
    r = opts.barrier_r0
    trace: list[float] = []
    status = "ok"
    for _ in range(opts.barrier_rounds):
        oracle = make_barrier_oracle(family, r, opts)
        res = nonsmooth_minimize(oracle, p, opts, rng)
        if res.status == "infeasible_start":
            status = "stalled"
            break
        p = res.p
        trace.extend(res.trace)
        status = res.status
        r /= opts.barrier_decay

    final = MinimizeResult(p, trace[-1] if trace else math.inf, trace, status)
    result = _certify(plant, emb, final, opts, "barrier")
    if not result.report.gamma0 < opts.gamma:
        raise InfeasibleProblem(
            f"barrier result violates gamma_0 < gamma: {result.report.gamma0:.6f}"
        )
    return result
