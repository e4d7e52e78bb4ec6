"""Exhaustive reference values for small instances.

``grid_oracle_dstar`` enumerates strategies on a lattice and keeps the best
rate-feasible one. Binary instances with two actions per decoder are searched
in belief space: every decoder-2 splitting of the prior and every decoder-1
splitting of each decoder-2 belief, with beliefs drawn from a lattice of the
given resolution. The lattice is augmented with the decoders' indifference
points (and points just past them) and with beliefs that make a rate
constraint bind, which is where optima of this problem sit. Other instances
fall back to a lattice over channel rows.

``brute_force_game_value`` evaluates the n-block game directly: every
stochastic encoding from source blocks to message pairs on a lattice,
decoders best-responding to exact posteriors per position.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .game import DEFAULT_TIE_TOL, GameInstance, RatePair, as_rates, worst_case_value_from_joint, worst_pair
from .solver import FEAS_TOL

THRESHOLD_OFFSET = 1e-6


class InstanceTooLarge(ValueError):
    """Raised when exhaustive enumeration would exceed the configured budget."""


@dataclass
class OracleResult:
    value: float
    argmin_description: dict
    resolution: float
    slack: float = 0.0
    exhaustive: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "resolution": self.resolution,
            "slack": self.slack,
            "exhaustive": self.exhaustive,
            "argmin": self.argmin_description,
        }


def _h2(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    xm = x[m]
    out[m] = -(xm * np.log2(xm) + (1 - xm) * np.log2(1 - xm))
    return out


# ---------------------------------------------------------------------------
# binary belief-space oracle


class _BinaryGame:
    """Decision quantities as functions of the belief x = P(u = 1)."""

    def __init__(self, g: GameInstance, tie_tol: float):
        self.g, self.tie = g, tie_tol

    def _br(self, x, d):
        x = np.asarray(x, dtype=float)[..., None]
        e = (1 - x) * d[0] + x * d[1]
        return e - e.min(axis=-1, keepdims=True) <= self.tie

    def phi(self, x) -> np.ndarray:
        """phi[..., v2] = max over decoder-1 best responses of E_x d_e(., v1, v2)."""
        x = np.asarray(x, dtype=float)
        br1 = self._br(x, self.g.d_1)
        xe = x[..., None, None]
        ed = (1 - xe) * self.g.d_e[0] + xe * self.g.d_e[1]
        return np.where(br1[..., :, None], ed, -np.inf).max(axis=-2)

    def br2(self, x) -> np.ndarray:
        return self._br(x, self.g.d_2)

    def thresholds(self) -> list[float]:
        out = []
        for d in (self.g.d_1, self.g.d_2):
            for a, b in itertools.combinations(range(d.shape[1]), 2):
                slope = (d[1, a] - d[0, a]) - (d[1, b] - d[0, b])
                if slope != 0:
                    x = (d[0, b] - d[0, a]) / slope
                    if 0 < x < 1:
                        out.append(float(x))
        return out


def _belief_lattice(bg: _BinaryGame, p: float, resolution: float) -> np.ndarray:
    k = int(round(1 / resolution))
    pts = list(np.linspace(0.0, 1.0, k + 1))
    for t in bg.thresholds():
        pts += [t - THRESHOLD_OFFSET, t, t + THRESHOLD_OFFSET]
    pts.append(p)
    pts = np.clip(np.array(pts), 0.0, 1.0)
    return np.unique(np.round(pts, 15))


def _binding_partner(p: float, lo: np.ndarray, cap: float, side: str) -> np.ndarray:
    """For each fixed belief, the partner across p at which the split's information equals cap.

    NaN where even the most extreme partner stays below cap.
    """
    lo = np.asarray(lo, dtype=float)
    hp = _h2(np.array(p))[()]

    def info(a, b):
        w = (p - a) / (b - a)
        return hp - (1 - w) * _h2(a) - w * _h2(b)

    if side == "up":
        a, b_lo, b_hi = lo, np.full_like(lo, p), np.ones_like(lo)
        f = lambda b: info(a, b)
    else:
        a, b_lo, b_hi = lo, np.zeros_like(lo), np.full_like(lo, p)
        f = lambda b: info(b, a)
    ends = f(b_hi) if side == "up" else f(b_lo)
    ok = ends > cap
    for _ in range(80):
        mid = 0.5 * (b_lo + b_hi)
        val = f(mid)
        inside = val <= cap
        if side == "up":
            b_lo = np.where(inside, mid, b_lo)
            b_hi = np.where(inside, b_hi, mid)
        else:
            b_hi = np.where(inside, mid, b_hi)
            b_lo = np.where(inside, b_lo, mid)
    res = b_lo if side == "up" else b_hi
    return np.where(ok, res, np.nan)


def _two_point_splits(p: float, beliefs: np.ndarray, cap: float | None):
    """All splits of p into (x0 <= p <= x1) from beliefs, plus rate-binding completions."""
    below = beliefs[beliefs < p]
    above = beliefs[beliefs > p]
    x0, x1 = np.meshgrid(below, above, indexing="ij")
    x0, x1 = x0.ravel(), x1.ravel()
    if cap is not None and below.size and above.size:
        up = _binding_partner(p, below, cap, "up")
        dn = _binding_partner(p, above, cap, "down")
        mu, md = ~np.isnan(up), ~np.isnan(dn)
        x0 = np.concatenate([x0, below[mu], dn[md]])
        x1 = np.concatenate([x1, up[mu], above[md]])
    w1 = (p - x0) / (x1 - x0)
    x0 = np.concatenate([[p], x0])
    x1 = np.concatenate([[p], x1])
    w1 = np.concatenate([[0.0], w1])
    cost = _h2(np.array(p))[()] - (1 - w1) * _h2(x0) - w1 * _h2(x1)
    return x0, x1, w1, np.maximum(cost, 0.0)


def _binary_shared(bg: _BinaryGame, p: float, beliefs: np.ndarray, r2: float):
    """Both decoders share the belief: splittings of p into up to three beliefs."""
    def psi(x):
        ph = bg.phi(x)
        return np.where(bg.br2(x), ph, -np.inf).max(axis=-1)

    x0, x1, w1, cost = _two_point_splits(p, beliefs, r2)
    ok = cost <= r2 + FEAS_TOL
    vals = np.where(ok, (1 - w1) * psi(x0) + w1 * psi(x1), np.inf)
    i = int(np.argmin(vals))
    best = (float(vals[i]), {"beliefs": [float(x0[i]), float(x1[i])], "weights": [1 - float(w1[i]), float(w1[i])]})

    b = np.unique(np.concatenate([beliefs, x0, x1]))
    ps = psi(b)
    hb = _h2(b)
    hp = _h2(np.array(p))[()]
    idx = np.array(list(itertools.combinations(range(b.size), 3)))
    a, m, c = b[idx[:, 0]], b[idx[:, 1]], b[idx[:, 2]]
    keep = (a < p) & (c > p)
    idx, a, m, c = idx[keep], a[keep], m[keep], c[keep]
    # weights (la, lm, lc) = base + t * dirn with la*a + lm*m + lc*c = p
    lm_max = np.where(m >= p, (p - a) / (m - a), (c - p) / (c - m))
    cand = []
    for lm in (np.zeros_like(lm_max), lm_max):
        rest = 1 - lm
        target = p - lm * m
        lc = (target - rest * a) / (c - a)
        la = rest - lc
        cand.append((la, lm, lc))
    (la0, lm0, lc0), (la1, lm1, lc1) = cand
    f_val = lambda la, lm, lc: la * ps[idx[:, 0]] + lm * ps[idx[:, 1]] + lc * ps[idx[:, 2]]
    f_cost = lambda la, lm, lc: hp - (la * hb[idx[:, 0]] + lm * hb[idx[:, 1]] + lc * hb[idx[:, 2]])
    v0, v1 = f_val(la0, lm0, lc0), f_val(la1, lm1, lc1)
    c0, c1 = f_cost(la0, lm0, lc0), f_cost(la1, lm1, lc1)
    # the value and cost are affine along the segment; best point is an end or the binding point
    ts = [np.zeros_like(v0), np.ones_like(v0)]
    with np.errstate(divide="ignore", invalid="ignore"):
        tb = (r2 - c0) / (c1 - c0)
    ts.append(np.where(np.isfinite(tb), np.clip(tb, 0, 1), 0.0))
    for t in ts:
        vv = (1 - t) * v0 + t * v1
        cc = (1 - t) * c0 + t * c1
        vv = np.where(cc <= r2 + FEAS_TOL, vv, np.inf)
        if vv.size and np.min(vv) < best[0] - 1e-15:
            j = int(np.argmin(vv))
            lam = [(1 - t[j]) * w0[j] + t[j] * w1_[j] for w0, w1_ in zip(cand[0], cand[1])]
            best = (float(vv[j]), {"beliefs": [float(a[j]), float(m[j]), float(c[j])],
                                   "weights": [float(x) for x in lam]})
    return best


def _split_values(bg: _BinaryGame, y: float, beliefs: np.ndarray, cap: float | None, v2_mask):
    """Decoder-1 splits of belief y with their cost and worst-case value.

    ``v2_mask`` restricts decoder 2's candidate actions (its best responses at y).
    """
    x0, x1, w1, cost = _two_point_splits(y, beliefs, cap)
    score = (1 - w1)[:, None] * bg.phi(x0) + w1[:, None] * bg.phi(x1)
    val = np.where(v2_mask[None, :], score, -np.inf).max(axis=1)
    return x0, x1, w1, cost, val


def _frontier(cost: np.ndarray, val: np.ndarray):
    """Staircase min value achievable with cost <= c: breakpoints (cost, value, index)."""
    order = np.lexsort((val, cost))
    c, v = cost[order], val[order]
    run = np.minimum.accumulate(v)
    keep = np.concatenate([[True], run[1:] < run[:-1] - 1e-15])
    return c[keep], run[keep], order[keep]


def _channel_from_split(prior: np.ndarray, w2_weights, w1_weights, beliefs) -> list:
    """Channel q[u, w1, w2] realising nested binary belief splits.

    beliefs[w2][w1] is P(u=1) at the cell; weights are P(w2) and P(w1 | w2).
    """
    mass = np.asarray(w2_weights, dtype=float)[None, :] * np.asarray(w1_weights, dtype=float).T
    x = np.asarray(beliefs, dtype=float).T
    joint = np.clip(np.stack([mass * (1 - x), mass * x]), 0.0, None)
    q = joint / joint.sum(axis=(1, 2), keepdims=True)
    return q.tolist()


def _binary_oracle(g: GameInstance, r: RatePair, resolution: float, tie_tol: float) -> OracleResult:
    bg = _BinaryGame(g, tie_tol)
    p = float(g.prior[1])
    beliefs = _belief_lattice(bg, p, resolution)
    br2_p = bg.br2(p)

    if r.r1 == 0:
        val, desc = _binary_shared(bg, p, beliefs, r.r2)
        q = _channel_from_split(g.prior, desc["weights"], [[1.0]] * len(desc["beliefs"]),
                                [[b] for b in desc["beliefs"]])
        return OracleResult(val, {"shared": desc, "q": q}, resolution)
    if r.r2 == 0:
        x0, x1, w1, cost, val = _split_values(bg, p, beliefs, r.r1, br2_p)
        val = np.where(cost <= r.r1 + FEAS_TOL, val, np.inf)
        i = int(np.argmin(val))
        desc = {"d1_beliefs": [float(x0[i]), float(x1[i])], "d1_weights": [1 - float(w1[i]), float(w1[i])]}
        desc["q"] = _channel_from_split(g.prior, [1.0], [desc["d1_weights"]], [desc["d1_beliefs"]])
        return OracleResult(float(val[i]), desc, resolution)

    total = r.r1 + r.r2
    y0, y1, mu1, cost2 = _two_point_splits(p, beliefs, r.r2)
    okw2 = cost2 <= r.r2 + FEAS_TOL
    y0, y1, mu1, cost2 = y0[okw2], y1[okw2], mu1[okw2], cost2[okw2]
    ys = np.unique(np.concatenate([y0, y1]))
    fronts = {}
    for y in ys:
        x0, x1, w1, cost, val = _split_values(bg, float(y), beliefs, None, bg.br2(float(y)))
        fc, fv, fi = _frontier(cost, val)
        fronts[float(y)] = (fc, fv, x0[fi], x1[fi], w1[fi])

    best_val, best_desc = math.inf, {}
    for a, b, m1, c2 in zip(y0, y1, mu1, cost2):
        budget = total - c2
        fa, fb = fronts[float(a)], fronts[float(b)]
        if m1 == 0.0:
            j = np.searchsorted(fa[0], budget + FEAS_TOL, side="right") - 1
            cands = [(float(fa[1][j]), j, 0)] if j >= 0 else []
        else:
            m0 = 1 - m1
            ia = np.flatnonzero(m0 * fa[0] <= budget + FEAS_TOL)
            if ia.size == 0:
                continue
            rem = (budget - m0 * fa[0][ia]) / m1
            jb = np.searchsorted(fb[0], rem + FEAS_TOL, side="right") - 1
            good = jb >= 0
            ia, jb = ia[good], jb[good]
            if ia.size == 0:
                continue
            tot = m0 * fa[1][ia] + m1 * fb[1][jb]
            k = int(np.argmin(tot))
            cands = [(float(tot[k]), int(ia[k]), int(jb[k]))]
        for v, ja, jb_ in cands:
            if v < best_val - 1e-15:
                best_val = v
                best_desc = {
                    "d2_beliefs": [float(a), float(b)],
                    "d2_weights": [1 - float(m1), float(m1)],
                    "d1_beliefs": [[float(fa[2][ja]), float(fa[3][ja])], [float(fb[2][jb_]), float(fb[3][jb_])]],
                    "d1_weights": [[1 - float(fa[4][ja]), float(fa[4][ja])],
                                   [1 - float(fb[4][jb_]), float(fb[4][jb_])]],
                }
    best_desc["q"] = _channel_from_split(g.prior, best_desc["d2_weights"], best_desc["d1_weights"],
                                         best_desc["d1_beliefs"])
    return OracleResult(best_val, best_desc, resolution)


# ---------------------------------------------------------------------------
# generic channel-lattice oracle


def _simplex_lattice(k: int, m: int) -> np.ndarray:
    """All points of the simplex in R^m with coordinates in {0, 1/k, ..., 1}."""
    rows = []
    for bars in itertools.combinations(range(k + m - 1), m - 1):
        edges = (-1,) + bars + (k + m - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(m)])
    return np.array(rows, dtype=float) / k


def _mi_batch(joint: np.ndarray) -> np.ndarray:
    """I(U;Z) for joint tables p[b, u, z]."""
    pu = joint.sum(axis=2, keepdims=True)
    pz = joint.sum(axis=1, keepdims=True)
    ref = pu * pz
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(joint / np.where(ref > 0, ref, 1.0)), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


def _channel_oracle(g: GameInstance, r: RatePair, resolution: float, tie_tol: float,
                    max_points: int) -> OracleResult:
    if r.r1 == 0 and r.r2 == 0:
        w1, w2 = 1, 1
    elif r.r1 == 0:
        w1, w2 = 1, min(g.u_size + 1, g.v1_size * g.v2_size)
    elif r.r2 == 0:
        w1, w2 = g.v1_size, 1
    else:
        w1, w2 = g.v1_size, g.v2_size
    k = int(round(1 / resolution))
    m = w1 * w2
    n_rows = math.comb(k + m - 1, m - 1)
    total = n_rows ** g.u_size
    if total > max_points:
        raise InstanceTooLarge(f"{total} lattice channels exceed the budget of {max_points}")
    rows = _simplex_lattice(k, m)
    prior = np.asarray(g.prior)
    best_val, best_idx = math.inf, None
    chunk = max(1, 200_000 // max(1, m * g.u_size))
    it = itertools.product(range(n_rows), repeat=g.u_size)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        ch = rows[block]
        joint = prior[None, :, None] * ch
        i12 = _mi_batch(joint)
        i2 = _mi_batch(joint.reshape(-1, g.u_size, w1, w2).sum(axis=2))
        ok = (i2 <= r.r2 + FEAS_TOL) & (i12 <= r.r1 + r.r2 + FEAS_TOL)
        if not np.any(ok):
            continue
        vals = worst_case_value_from_joint(g, joint[ok].reshape(-1, g.u_size, w1, w2), tie_tol)
        j = int(np.argmin(vals))
        if vals[j] < best_val - 1e-15:
            best_val, best_idx = float(vals[j]), block[ok][j]
    q = rows[best_idx].reshape(g.u_size, w1, w2)
    return OracleResult(best_val, {"q": q.tolist()}, resolution)


def grid_oracle_dstar(g: GameInstance, r, resolution: float = 0.02, tie_tol: float = DEFAULT_TIE_TOL,
                      max_points: int = 2_000_000) -> OracleResult:
    """Best lattice strategy value at rates r (worst-case decoder tie-breaking)."""
    r = as_rates(r)
    if not (0 < resolution <= 0.25):
        raise ValueError(f"resolution must be in (0, 0.25], got {resolution!r}")
    if abs(1 / resolution - round(1 / resolution)) > 1e-9:
        raise ValueError("resolution must divide 1")
    if r.r1 == 0 and r.r2 == 0:
        # Only the uninformative strategy is feasible; evaluate it at the exact prior.
        val = worst_pair(g.prior, g.prior, g, tie_tol)[2]
        res = OracleResult(val, {"beliefs": [g.prior.tolist()], "weights": [1.0]}, resolution)
    elif g.u_size == 2 and g.v1_size <= 2 and g.v2_size <= 2:
        res = _binary_oracle(g, r, resolution, tie_tol)
    else:
        if g.u_size > 3 or g.v1_size > 3 or g.v2_size > 3:
            raise InstanceTooLarge("channel-lattice oracle supports at most three symbols per alphabet")
        res = _channel_oracle(g, r, resolution, tie_tol, max_points)
    res.slack = resolution * g.d_norm
    return res


# ---------------------------------------------------------------------------
# finite-n game value


def message_counts(r: RatePair, n: int) -> tuple[int, int]:
    """Message-set sizes 2^floor(n r1), 2^floor(n r2)."""
    return 2 ** math.floor(n * r.r1 + 1e-9), 2 ** math.floor(n * r.r2 + 1e-9)


def _block_value(g: GameInstance, seqs: np.ndarray, pseq: np.ndarray, enc: np.ndarray,
                 k1: int, k2: int, tie_tol: float) -> np.ndarray:
    """Average per-position worst-case distortion for encodings enc[b, s, m1*k2 + m2]."""
    n = seqs.shape[1]
    joint = pseq[None, :, None] * enc
    onehot = np.eye(g.u_size)
    total = 0.0
    for t in range(n):
        pt = np.einsum("bsm,su->bum", joint, onehot[seqs[:, t]])
        total = total + worst_case_value_from_joint(g, pt.reshape(-1, g.u_size, k1, k2), tie_tol)
    return total / n


def _smallest_fitting_lattice(k_msg: int, n_seq: int, k_max: int, cap: int) -> int:
    best = 0
    for k in range(1, k_max + 1):
        if math.comb(k + k_msg - 1, k_msg - 1) ** n_seq <= cap:
            best = k
        else:
            break
    return best


def brute_force_game_value(g: GameInstance, r, n: int, enc_grid: float = 0.1,
                           tie_tol: float = DEFAULT_TIE_TOL, max_encodings: int = 300_000,
                           chunk: int = 20_000) -> OracleResult:
    """Best n-block encoder distortion over lattice encodings (n in {1, 2}).

    When the full lattice is too large the search covers the finest lattice
    that fits the budget and, for n = 2, every product of two one-letter
    lattice encodings. The result then upper-bounds the lattice optimum and
    is flagged as non-exhaustive.
    """
    r = as_rates(r)
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    k_full = int(round(1 / enc_grid))
    k1, k2 = message_counts(r, n)
    km = k1 * k2
    seqs = np.array(list(itertools.product(range(g.u_size), repeat=n)), dtype=np.int64)
    pseq = np.prod(np.asarray(g.prior)[seqs], axis=1)
    n_seq = seqs.shape[0]

    families = []
    k_lat = _smallest_fitting_lattice(km, n_seq, k_full, max_encodings)
    if k_lat >= 1:
        rows = _simplex_lattice(k_lat, km)
        families.append(("lattice", rows, itertools.product(range(rows.shape[0]), repeat=n_seq)))
    exhaustive = k_lat == k_full
    products = None
    if n == 2 and not exhaustive:
        one = brute_force_game_value(g, r, 1, enc_grid, tie_tol, max_encodings, chunk)
        if one.exhaustive:
            products = one
    if not families and products is None:
        raise InstanceTooLarge("no encoding family fits the enumeration budget")

    best_val, best_enc = math.inf, None
    for _, rows, it in families:
        while True:
            block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            enc = rows[block]
            vals = _block_value(g, seqs, pseq, enc, k1, k2, tie_tol)
            j = int(np.argmin(vals))
            if vals[j] < best_val - 1e-15:
                best_val, best_enc = float(vals[j]), enc[j]

    if products is not None:
        pk1, pk2 = message_counts(r, 1)
        sub = np.asarray(products.extra["encoding"])
        enc = np.zeros((n_seq, km))
        for s, (a, b) in enumerate(seqs):
            for ma1, ma2, mb1, mb2 in itertools.product(range(pk1), range(pk2), range(pk1), range(pk2)):
                m1 = ma1 * pk1 + mb1
                m2 = ma2 * pk2 + mb2
                enc[s, m1 * k2 + m2] += sub[a, ma1 * pk2 + ma2] * sub[b, mb1 * pk2 + mb2]
        val = float(_block_value(g, seqs, pseq, enc[None], k1, k2, tie_tol)[0])
        if val < best_val - 1e-15:
            best_val, best_enc = val, enc

    desc = {"n": n, "m1_count": k1, "m2_count": k2, "lattice_steps": k_lat,
            "product_of_one_letter": products is not None}
    return OracleResult(best_val, desc, enc_grid, slack=2 * enc_grid * g.d_norm,
                        exhaustive=exhaustive, extra={"encoding": best_enc.tolist()})
