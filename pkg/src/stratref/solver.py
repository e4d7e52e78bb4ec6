"""Optimal single-letter encoder distortion under rate and incentive constraints.

The default method uses recommendations as auxiliary symbols: W1 names the
action decoder 1 should take and W2 the action of decoder 2. Over the joint
table pi[u, cell] = P(u) Q(cell | u) the encoder's distortion and the
decoders' obedience constraints are linear, and the rate constraints are
convex, so each variant below is a convex program.

* With weak obedience the optimum lower-bounds the worst-case value, since
  the encoder gets to pick among tied actions.
* With a small strict margin every decoder has a unique best response, so
  the worst-case value of the recovered strategy is attained exactly.

The solver evaluates several margins, keeps the best achievable strategy,
and reports the gap to the lower bound as ``epsilon_report``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize

from .game import (
    DEFAULT_TIE_TOL,
    GameInstance,
    RatePair,
    Strategy,
    as_rates,
    best_response_set,
    expected_encoder_distortion,
    worst_case_value_from_joint,
    worst_pair,
)
from .prob import conditional_mutual_information, mutual_information

FEAS_TOL = 1e-10
STRICT_MARGIN = 1e-9
LN2 = math.log(2.0)


class InvalidConfig(ValueError):
    """Raised for solver settings outside their valid range."""


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    restarts: int = 64
    grid_step: float = 0.05
    boundary_eps: float = 1e-4
    tie_tol: float = DEFAULT_TIE_TOL
    max_iters: int = 400
    method: str = "convex"
    optimistic: bool = False

    def validate(self) -> "SolverConfig":
        if not isinstance(self.restarts, (int, np.integer)) or self.restarts <= 0:
            raise InvalidConfig(f"restarts must be a positive integer, got {self.restarts!r}")
        if not (0 < self.grid_step <= 1):
            raise InvalidConfig(f"grid_step must be in (0, 1], got {self.grid_step!r}")
        if not (0 < self.boundary_eps < 1):
            raise InvalidConfig(f"boundary_eps must be in (0, 1), got {self.boundary_eps!r}")
        if not (self.tie_tol >= 0):
            raise InvalidConfig(f"tie_tol must be nonnegative, got {self.tie_tol!r}")
        if self.max_iters <= 0:
            raise InvalidConfig(f"max_iters must be positive, got {self.max_iters!r}")
        if self.method not in ("convex", "search"):
            raise InvalidConfig(f"method must be 'convex' or 'search', got {self.method!r}")
        return self


@dataclass
class SolverResult:
    value: float
    strategy: Strategy
    rates_used: tuple[float, float]
    feasible: bool
    restarts: int
    converged: bool
    epsilon_report: float
    lower_bound: float = float("nan")
    method: str = "convex"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lower_bound": self.lower_bound,
            "epsilon_report": self.epsilon_report,
            "i_uw2": self.rates_used[0],
            "i_uw1w2": self.rates_used[1],
            "feasible": self.feasible,
            "restarts": self.restarts,
            "converged": self.converged,
            "method": self.method,
            "strategy": self.strategy.to_dict(),
        }


def information_rates(g: GameInstance, s: Strategy) -> tuple[float, float]:
    """(I(U;W2), I(U;W1,W2)) in bits."""
    return (mutual_information(g.prior, s.channel_w2), mutual_information(g.prior, s.channel))


def feasible(s: Strategy, g: GameInstance, r, strict: bool = False) -> bool:
    """Rate feasibility of s at rates r.

    At r1 = 0 decoder 1 receives nothing beyond decoder 2's message, so the
    refinement must carry no information: I(U;W1|W2) = 0.
    """
    r = as_rates(r)
    if s.u_size != g.u_size:
        raise ValueError("strategy and instance disagree on |U|")
    i2, i12 = information_rates(g, s)
    if strict:
        ok = i2 < r.r2 - STRICT_MARGIN and i12 < r.r1 + r.r2 - STRICT_MARGIN
    else:
        ok = i2 <= r.r2 + FEAS_TOL and i12 <= r.r1 + r.r2 + FEAS_TOL
    if ok and r.r1 == 0:
        ok = conditional_mutual_information(g.prior, s.q) <= FEAS_TOL
    return bool(ok)


# ---------------------------------------------------------------------------
# recommendation layouts


def _action_classes(d: np.ndarray, distinct: bool) -> list[list[int]]:
    """Group actions with identical distortion columns; singletons when ``distinct``."""
    n = d.shape[1]
    if distinct:
        return [[a] for a in range(n)]
    classes: list[list[int]] = []
    for a in range(n):
        for c in classes:
            if np.array_equal(d[:, c[0]], d[:, a]):
                c.append(a)
                break
        else:
            classes.append([a])
    return classes


@dataclass
class _Layout:
    """Cells are recommended (v1, v2) pairs placed at strategy coordinates (w1, w2)."""

    shape: tuple[int, int]
    pos: list[tuple[int, int]]
    cls1: list[list[int]]
    groups: list[list[int]]
    cls2: list[list[int] | None]
    cand2: list[list[int]]
    obey2: list[bool] = field(default_factory=list)


def _general_layout(g: GameInstance, distinct: bool) -> _Layout:
    c1 = _action_classes(g.d_1, distinct)
    c2 = _action_classes(g.d_2, distinct)
    pos, cls1, groups, cls2 = [], [], [], []
    for k2 in c2:
        members = []
        for k1 in c1:
            members.append(len(pos))
            pos.append((k1[0], k2[0]))
            cls1.append(k1)
        groups.append(members)
        cls2.append(k2)
    return _Layout((g.v1_size, g.v2_size), pos, cls1, groups, cls2, [list(k) for k in cls2],
                   [True] * len(groups))


def _shared_layout(g: GameInstance, distinct: bool) -> _Layout:
    """Both decoders see the same message, which recommends a pair of actions."""
    c1 = _action_classes(g.d_1, distinct)
    c2 = _action_classes(g.d_2, distinct)
    pos, cls1, groups, cls2 = [], [], [], []
    for k1 in c1:
        for k2 in c2:
            groups.append([len(pos)])
            pos.append((0, len(pos)))
            cls1.append(k1)
            cls2.append(k2)
    shape = (g.v1_size, max(len(pos), g.v2_size))
    return _Layout(shape, pos, cls1, groups, cls2, [list(k) for k in cls2], [True] * len(groups))


def _prior_layout(g: GameInstance, distinct: bool, cand2: list[int]) -> _Layout:
    """Decoder 2 learns nothing and picks from ``cand2``; messages recommend v1 only."""
    c1 = _action_classes(g.d_1, distinct)
    pos = [(k[0], 0) for k in c1]
    return _Layout((g.v1_size, g.v2_size), pos, c1, [list(range(len(pos)))], [None], [cand2], [False])


def _rel_entropy_bits(pi_part, prior: np.ndarray):
    """I(U;Z) for an affine table pi_part[u, z] whose rows sum to the prior."""
    marg = cp.sum(pi_part, axis=0)
    ref = cp.reshape(prior, (prior.size, 1), order="C") @ cp.reshape(marg, (1, pi_part.shape[1]), order="C")
    return cp.sum(cp.rel_entr(pi_part, ref)) / LN2


def _solve_layout(g: GameInstance, lay: _Layout, r2_cap: float | None, r12_cap: float,
                  margin: float, optimistic: bool) -> tuple[float, np.ndarray] | None:
    """One convex program; returns (objective, pi) or None when not solved."""
    prior = np.asarray(g.prior)
    u, ncell = g.u_size, len(lay.pos)
    pi = cp.Variable((u, ncell), nonneg=True)
    cons = [cp.sum(pi, axis=1) == prior]
    mass = cp.sum(pi, axis=0)
    k1 = margin * float(np.ptp(g.d_1)) if g.d_1.size else 0.0
    k2 = margin * float(np.ptp(g.d_2)) if g.d_2.size else 0.0

    for c, cls in enumerate(lay.cls1):
        rec = cls[0]
        for a in range(g.v1_size):
            if a not in cls:
                cons.append(pi[:, c] @ (g.d_1[:, rec] - g.d_1[:, a]) <= -k1 * mass[c])
    for gi, members in enumerate(lay.groups):
        if not lay.obey2[gi]:
            continue
        cls = lay.cls2[gi]
        col = cp.sum(pi[:, members], axis=1)
        for a in range(g.v2_size):
            if a not in cls:
                cons.append(col @ (g.d_2[:, cls[0]] - g.d_2[:, a]) <= -k2 * cp.sum(col))

    terms = []
    for gi, members in enumerate(lay.groups):
        per_v2 = []
        for v2 in lay.cand2[gi]:
            cells = []
            for c in members:
                opts = [pi[:, c] @ g.d_e[:, v1, v2] for v1 in lay.cls1[c]]
                if len(opts) == 1 or optimistic:
                    cells.append(opts[0])
                else:
                    t = cp.Variable()
                    cons.extend(t >= o for o in opts)
                    cells.append(t)
            per_v2.append(cp.sum(cp.hstack(cells)))
        if len(per_v2) == 1:
            terms.append(per_v2[0])
        else:
            s = cp.Variable()
            cons.extend(s >= e for e in per_v2)
            terms.append(s)

    if r12_cap < math.inf:
        cons.append(_rel_entropy_bits(pi, prior) <= r12_cap)
    if r2_cap is not None and r2_cap < math.inf and len(lay.groups) > 1:
        groups = cp.hstack([cp.sum(pi[:, m], axis=1, keepdims=True) for m in lay.groups])
        cons.append(_rel_entropy_bits(groups, prior) <= r2_cap)

    prob = cp.Problem(cp.Minimize(cp.sum(cp.hstack(terms))), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        return None
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or pi.value is None:
        return None
    return float(prob.value), np.asarray(pi.value)


def _strategy_from_pi(g: GameInstance, lay: _Layout, pi: np.ndarray) -> Strategy:
    pi = np.clip(pi, 0.0, None)
    rows = pi.sum(axis=1, keepdims=True)
    marg = pi.sum(axis=0)
    marg = marg / marg.sum()
    ch = np.where(rows > 0, pi / np.where(rows > 0, rows, 1.0), marg)
    ch = ch / ch.sum(axis=1, keepdims=True)
    q = np.zeros((g.u_size, *lay.shape))
    for c, (w1, w2) in enumerate(lay.pos):
        q[:, w1, w2] += ch[:, c]
    return Strategy(q)


def _cap(r: float) -> float:
    return r - min(1e-8, r / 2)


def _shrink_to_rates(g: GameInstance, s: Strategy, r: RatePair) -> Strategy:
    """Mix towards the message marginal until the weak rate constraints hold.

    Mutual information is convex in the channel and vanishes at the marginal,
    so mixing weight theta scales each information by at most (1 - theta).
    """
    i2, i12 = information_rates(g, s)
    theta = 0.0
    if i2 > r.r2 + FEAS_TOL:
        theta = max(theta, 1.0 - r.r2 / i2)
    if i12 > r.r1 + r.r2 + FEAS_TOL:
        theta = max(theta, 1.0 - (r.r1 + r.r2) / i12)
    if theta == 0.0:
        return s
    theta = min(1.0, theta * (1 + 1e-9) + 1e-15)
    marg = np.einsum("u,uab->ab", g.prior, s.q)
    return Strategy((1 - theta) * s.q + theta * marg[None])


def _run_layouts(g: GameInstance, r: RatePair, cfg: SolverConfig,
                 layouts: list[_Layout], r2_cap, r12_cap) -> SolverResult:
    tie, opt = cfg.tie_tol, cfg.optimistic
    best = Strategy.uninformative(g.u_size, g.v1_size, g.v2_size)
    best_val = expected_encoder_distortion(g, best, tie, opt)
    lower = math.inf
    solved_lower = solved_margin = False
    margins = [0.0, cfg.boundary_eps, cfg.boundary_eps / 10, cfg.boundary_eps / 100]
    for lay in layouts:
        for margin in margins:
            out = _solve_layout(g, lay, r2_cap, r12_cap, margin, opt)
            if out is None:
                continue
            obj, pi = out
            if margin == 0.0:
                lower = min(lower, obj)
                solved_lower = True
            else:
                solved_margin = True
            s = _shrink_to_rates(g, _strategy_from_pi(g, lay, pi), r)
            if not feasible(s, g, r):
                continue
            val = expected_encoder_distortion(g, s, tie, opt)
            if val < best_val - 1e-15:
                best, best_val = s, val
    if not solved_lower:
        lower = -g.d_norm
    lower = min(lower, best_val)
    w1 = max(best.w1_size, g.v1_size)
    w2 = max(best.w2_size, g.v2_size)
    best = best.padded(w1, w2)
    return SolverResult(
        value=best_val,
        strategy=best,
        rates_used=information_rates(g, best),
        feasible=feasible(best, g, r),
        restarts=len(layouts) * len(margins),
        converged=solved_lower and solved_margin,
        epsilon_report=max(0.0, best_val - lower),
        lower_bound=lower,
        method="convex",
    )


# ---------------------------------------------------------------------------
# public entry points


def solve_zero_rates(g: GameInstance, cfg: SolverConfig | None = None) -> SolverResult:
    """No messages: both decoders act on the prior."""
    cfg = cfg or SolverConfig()
    s = Strategy.uninformative(g.u_size, g.v1_size, g.v2_size)
    value = worst_pair(g.prior, g.prior, g, cfg.tie_tol, cfg.optimistic)[2]
    return SolverResult(value, s, (0.0, 0.0), True, 0, True, 0.0, value, "closed-form")


def solve_r2_zero(g: GameInstance, r1: float, cfg: SolverConfig | None = None) -> SolverResult:
    """Only decoder 1 is informed; decoder 2 acts on the prior."""
    cfg = (cfg or SolverConfig()).validate()
    r = RatePair(r1, 0.0)
    if r1 == 0:
        return solve_zero_rates(g, cfg)
    if cfg.method == "search":
        return _search(g, r, cfg)
    cand2 = sorted(best_response_set(g.prior, g.d_2, cfg.tie_tol))
    if cfg.optimistic:
        layouts = [_prior_layout(g, True, [v]) for v in cand2]
    else:
        layouts = [_prior_layout(g, False, cand2)]
    return _run_layouts(g, r, cfg, layouts, None, _cap(r1))


def solve_r1_zero(g: GameInstance, r2: float, cfg: SolverConfig | None = None) -> SolverResult:
    """Both decoders share the message; optimise a splitting of the prior."""
    cfg = (cfg or SolverConfig()).validate()
    r = RatePair(0.0, r2)
    if r2 == 0:
        return solve_zero_rates(g, cfg)
    if cfg.method == "search":
        return _search(g, r, cfg)
    lay = _shared_layout(g, cfg.optimistic)
    return _run_layouts(g, r, cfg, [lay], None, _cap(r2))


def solve(g: GameInstance, r, cfg: SolverConfig | None = None) -> SolverResult:
    """Optimal encoder distortion at rates r with worst-case decoder tie-breaking."""
    cfg = (cfg or SolverConfig()).validate()
    r = as_rates(r)
    if r.r1 == 0 and r.r2 == 0:
        return solve_zero_rates(g, cfg)
    if r.r2 == 0:
        return solve_r2_zero(g, r.r1, cfg)
    if r.r1 == 0:
        return solve_r1_zero(g, r.r2, cfg)
    if cfg.method == "search":
        return _search(g, r, cfg)
    lay = _general_layout(g, cfg.optimistic)
    return _run_layouts(g, r, cfg, [lay], _cap(r.r2), _cap(r.r1 + r.r2))


def rate_sweep(g: GameInstance, grid, cfg: SolverConfig | None = None) -> list[SolverResult]:
    grid = [as_rates(r) for r in grid]
    if not grid:
        raise ValueError("rate grid is empty")
    return [solve(g, r, cfg) for r in grid]


# ---------------------------------------------------------------------------
# derivative-free search (cross-check method)


def _search_shape(g: GameInstance, r: RatePair) -> tuple[int, int]:
    if r.r2 == 0:
        return g.v1_size, 1
    if r.r1 == 0:
        return 1, max(g.v2_size, min(g.u_size + 1, g.v1_size * g.v2_size))
    return g.v1_size, g.v2_size


def _search(g: GameInstance, r: RatePair, cfg: SolverConfig) -> SolverResult:
    """Multi-start Nelder-Mead over softmax channel parameters.

    Seeds are random points of the channel lattice with spacing grid_step,
    plus the uninformative channel; infeasible points score +inf.
    """
    rng = np.random.default_rng(cfg.seed)
    w1, w2 = _search_shape(g, r)
    m = w1 * w2
    u = g.u_size
    steps = max(1, int(round(1.0 / cfg.grid_step)))
    prior = np.asarray(g.prior)

    def score(ch: np.ndarray) -> float:
        q = ch.reshape(u, w1, w2)
        joint = prior[:, None, None] * q
        i12 = _mi_joint(joint.reshape(u, m))
        i2 = _mi_joint(joint.sum(axis=1))
        if i2 > r.r2 + FEAS_TOL or i12 > r.r1 + r.r2 + FEAS_TOL:
            return math.inf
        return float(worst_case_value_from_joint(g, joint, cfg.tie_tol, cfg.optimistic))

    def from_params(x: np.ndarray) -> np.ndarray:
        z = x.reshape(u, m)
        z = np.exp(z - z.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    seeds = [np.tile(np.eye(m)[0], (u, 1))]
    for _ in range(8 * cfg.restarts):
        seeds.append(rng.multinomial(steps, rng.dirichlet(np.ones(m)), size=u) / steps)
    scored = [(score(ch), i) for i, ch in enumerate(seeds)]
    scored = sorted((v, i) for v, i in scored if v < math.inf)[: cfg.restarts]

    best_val, best_ch = math.inf, seeds[0]
    all_conv = True
    for v0, i in scored:
        ch0 = seeds[i]
        if v0 < best_val:
            best_val, best_ch = v0, ch0
        x0 = np.log(ch0 + 1e-3).ravel()
        res = minimize(lambda x: score(from_params(x)), x0, method="Nelder-Mead",
                       options={"maxiter": cfg.max_iters, "xatol": 1e-7, "fatol": 1e-10})
        all_conv &= bool(res.success)
        if res.fun < best_val:
            best_val, best_ch = float(res.fun), from_params(res.x)
    s = Strategy(best_ch.reshape(u, w1, w2)).padded(max(w1, g.v1_size), max(w2, g.v2_size))
    value = expected_encoder_distortion(g, s, cfg.tie_tol, cfg.optimistic)
    return SolverResult(
        value=value,
        strategy=s,
        rates_used=information_rates(g, s),
        feasible=feasible(s, g, r),
        restarts=len(scored),
        converged=all_conv,
        epsilon_report=cfg.boundary_eps * g.d_norm,
        method="search",
    )


def _mi_joint(joint: np.ndarray) -> float:
    pu = joint.sum(axis=1, keepdims=True)
    pz = joint.sum(axis=0, keepdims=True)
    ref = pu * pz
    pos = joint > 0
    return float(max(0.0, np.sum(joint[pos] * np.log2(joint[pos] / ref[pos]))))
