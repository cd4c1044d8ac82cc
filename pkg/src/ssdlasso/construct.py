"""Design construction: heuristic exchanges, the two-block matrix, and HILS.

Exchange algorithms work on the integer matrix ``S = L^T L`` (L = (1 | X)),
updated incrementally: flipping cell (r, f) changes only the row/column of S
belonging to factor f, so the change in the raw pair sums is O(p) per
candidate flip and exact in integer arithmetic. Raw sums relate to the
reported criteria by the fixed pair count B = binom(p+1, 2):
``UE(s^2) = q2/B``, ``UE(s) = q1/B``, ``Var(s) * B^2 = B q2 - q1^2``.

HILS builds pools of heuristic-optimal designs, then re-ranks the retained
pool under a sign-recovery criterion and returns the argmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .design import (
    Design,
    HeuristicSummary,
    heuristics,
    load_design_csv,
    standardize,
)
from .errors import (
    ColumnBudget,
    EmptyPool,
    InfeasibleConstraints,
    InputError,
    OddN,
    TooManyBlocks,
)
from .mvn import QmcConfig
from .parallel import derive_seed, parallel_map
from .recovery import (
    CriterionValue,
    Phi_lambda,
    Phi_Lambda,
    Phi_max,
    SignVectorSet,
    SupportSet,
)

__all__ = [
    "ExchangeConfig",
    "exchange_ue2",
    "exchange_vars_plus",
    "block_construction",
    "xi_values",
    "XiValues",
    "sbound_constant",
    "proposition1_pad",
    "nbibd_supports",
    "HilsConfig",
    "HilsReport",
    "hils",
]


@dataclass(frozen=True)
class ExchangeConfig:
    starts: int = 50
    max_passes: int = 200
    seed: int = 0
    ue2_efficiency_floor: float | None = None
    ue_s_floor: float | None = None
    ue2_reference: float | None = None


class _ExchangeState:
    """X with its integer S matrix and raw off-diagonal sums, kept in sync."""

    def __init__(self, X: np.ndarray):
        self.X = X.astype(np.int8)
        self.n, self.p = X.shape
        L = np.hstack([np.ones((self.n, 1), dtype=np.int64), self.X.astype(np.int64)])
        self.S = L.T @ L
        iu = np.triu_indices(self.p + 1, k=1)
        off = self.S[iu]
        self.q2 = int(np.sum(off * off))
        self.q1 = int(np.sum(off))

    def deltas(self, r: int, f: int) -> tuple[int, int]:
        """(delta q2, delta q1) if cell (r, f) were flipped."""
        l = np.empty(self.p + 1, dtype=np.int64)
        l[0] = 1
        l[1:] = self.X[r]
        lf = int(self.X[r, f])
        t = int(l @ self.S[:, f + 1])
        d_q2 = -4 * lf * t + 4 * self.n + 4 * self.p
        rowsum = int(l.sum())
        d_q1 = -2 * lf * (rowsum - lf)
        return d_q2, d_q1

    def flip(self, r: int, f: int) -> None:
        l = np.empty(self.p + 1, dtype=np.int64)
        l[0] = 1
        l[1:] = self.X[r]
        lf = int(self.X[r, f])
        d_q2, d_q1 = self.deltas(r, f)
        upd = 2 * lf * l
        col = f + 1
        self.S[:, col] -= upd
        self.S[col, :] -= upd
        self.S[col, col] = self.n  # the two updates above hit the diagonal twice
        self.X[r, f] = -lf
        self.q2 += d_q2
        self.q1 += d_q1


def _random_pm1(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.integers(0, 2, size=(n, p)) * 2 - 1).astype(np.int8)


def exchange_ue2(n: int, p: int, config: ExchangeConfig) -> Design:
    """Coordinate-exchange minimization of the UE(s^2) raw sum.

    Row-major sweeps; a cell is flipped only on a strict integer decrease, so
    the objective trace is monotone and the sweep terminates.
    """
    best_q2 = None
    best_X = None
    for start in range(config.starts):
        rng = np.random.default_rng(derive_seed(config.seed, "ue2", start))
        st = _ExchangeState(_random_pm1(n, p, rng))
        for _ in range(config.max_passes):
            improved = False
            for r in range(n):
                for f in range(p):
                    d_q2, _ = st.deltas(r, f)
                    if d_q2 < 0:
                        st.flip(r, f)
                        improved = True
            if not improved:
                break
        if best_q2 is None or st.q2 < best_q2:
            best_q2 = st.q2
            best_X = st.X.copy()
    return Design(best_X)


def _feasible(st: _ExchangeState, q2_cap: float | None, q1_floor: float | None) -> bool:
    if q2_cap is not None and st.q2 > q2_cap:
        return False
    if q1_floor is not None and not st.q1 > q1_floor:
        return False
    return True


def _violation(q2: int, q1: int, q2_cap: float | None, q1_floor: float | None) -> float:
    v = 0.0
    if q2_cap is not None:
        v += max(0.0, q2 - q2_cap)
    if q1_floor is not None:
        v += max(0.0, q1_floor - q1 + 1e-9)
    return v


def exchange_vars_plus(n: int, p: int, config: ExchangeConfig) -> Design:
    """Var(s) descent under a UE(s^2)-efficiency floor and a UE(s) floor.

    Raw objective ``B q2 - q1^2`` (an exact integer proportional to Var(s)).
    Infeasible starts run a repair phase that descends the constraint
    violation first; the descent phase then accepts only flips that keep
    feasibility and strictly decrease the objective.
    """
    B = comb(p + 1, 2)
    q2_cap = None
    if config.ue2_efficiency_floor is not None:
        ref = config.ue2_reference
        if ref is None:
            ref = heuristics(exchange_ue2(n, p, config)).ue_s2
        q2_cap = ref * B / config.ue2_efficiency_floor
    q1_floor = None if config.ue_s_floor is None else config.ue_s_floor * B

    best_obj = None
    best_X = None
    for start in range(config.starts):
        rng = np.random.default_rng(derive_seed(config.seed, "varsplus", start))
        st = _ExchangeState(_random_pm1(n, p, rng))
        # repair phase: descend constraint violation until feasible
        for _ in range(config.max_passes):
            if _feasible(st, q2_cap, q1_floor):
                break
            improved = False
            viol = _violation(st.q2, st.q1, q2_cap, q1_floor)
            for r in range(n):
                for f in range(p):
                    d2, d1 = st.deltas(r, f)
                    cand = _violation(st.q2 + d2, st.q1 + d1, q2_cap, q1_floor)
                    if cand < viol - 1e-12:
                        st.flip(r, f)
                        viol = cand
                        improved = True
            if not improved:
                break
        if not _feasible(st, q2_cap, q1_floor):
            continue
        # descent phase on B q2 - q1^2, feasibility preserving
        for _ in range(config.max_passes):
            improved = False
            for r in range(n):
                for f in range(p):
                    d2, d1 = st.deltas(r, f)
                    nq2, nq1 = st.q2 + d2, st.q1 + d1
                    if q2_cap is not None and nq2 > q2_cap:
                        continue
                    if q1_floor is not None and not nq1 > q1_floor:
                        continue
                    if B * nq2 - nq1 * nq1 < B * st.q2 - st.q1 * st.q1:
                        st.flip(r, f)
                        improved = True
            if not improved:
                break
        obj = B * st.q2 - st.q1 * st.q1
        if best_obj is None or obj < best_obj:
            best_obj = obj
            best_X = st.X.copy()
    if best_X is None:
        raise InfeasibleConstraints(
            f"no start reached UE(s^2) cap {q2_cap} with UE(s) floor {q1_floor}"
        )
    return Design(best_X)


# ---------------------------------------------------------------------------
# the two-block construction


def block_construction(n: int, k: int, k1: int) -> Design:
    """Active columns from the n x n block matrix [[2I-J, -J], [J, J-2I]].

    Takes the first ``k1`` columns of the left block column and ``k - k1`` of
    the right; every column has sum +-2, hence centered variance 1 - 4/n^2.
    """
    if n % 2 != 0 or n < 6:
        raise OddN("block construction needs even n >= 6")
    k2 = k - k1
    h = n // 2
    if not (0 <= k1 <= h and 0 <= k2 <= h):
        raise ColumnBudget(f"need 0 <= k1 <= n/2 and 0 <= k - k1 <= n/2 (k1={k1}, k2={k2})")
    if k > n - 1 or k < 1:
        raise ColumnBudget(f"need 1 <= k <= n - 1 (k={k})")
    I = np.eye(h, dtype=np.int8)
    J = np.ones((h, h), dtype=np.int8)
    M = np.block([[2 * I - J, -J], [J, J - 2 * I]]).astype(np.int8)
    cols = list(range(k1)) + list(range(h, h + k2))
    return Design(M[:, cols])


@dataclass(frozen=True)
class XiValues:
    xi1: float | None
    xi2: float | None

    @property
    def max(self) -> float:
        vals = [v for v in (self.xi1, self.xi2) if v is not None]
        return max(vals)


def _xi_closed_form(n: int, k1: int, k2: int) -> tuple[float | None, float | None]:
    # block row-sum algebra; the one-sided cases substitute k-tilde = n for
    # the empty side, recovering the completely symmetric expression
    kt1, kt2 = n - 2 * k1, n - 2 * k2
    denom = (n - 2) ** 2 * (k1 * kt2 + kt1 * k2) + 4 * kt1 * kt2
    xi1 = kt2 * (n * n - 4) / denom if k1 > 0 else None
    xi2 = kt1 * (n * n - 4) / denom if k2 > 0 else None
    return xi1, xi2


def xi_values(n: int, k1: int, k2: int) -> XiValues:
    """Blockwise entries of C_A^{-1} 1 for the two-block construction.

    Computed by solving ``C_A xi = 1`` from the standardized design and
    cross-checked against the closed form to 1e-10. ``xi1 = 0`` exactly when
    ``k2 = n/2`` (and symmetrically).
    """
    k = k1 + k2
    design = block_construction(n, k, k1)
    std = standardize(design)
    xi = np.linalg.solve(std.C, np.ones(k))
    xi1 = float(xi[0]) if k1 > 0 else None
    xi2 = float(xi[k1]) if k2 > 0 else None
    if k1 > 1 and not np.allclose(xi[:k1], xi1, atol=1e-10):
        raise AssertionError("xi not constant within block 1")
    if k2 > 1 and not np.allclose(xi[k1:], xi2, atol=1e-10):
        raise AssertionError("xi not constant within block 2")
    cf1, cf2 = _xi_closed_form(n, k1, k2)
    for direct, closed in ((xi1, cf1), (xi2, cf2)):
        if direct is not None and abs(direct - closed) > 1e-10:
            raise AssertionError(f"closed form {closed} disagrees with solve {direct}")
    return XiValues(xi1=xi1, xi2=xi2)


def sbound_constant(n: int, k1: int, k2: int) -> float:
    """The constant b in the admissibility bound beta_A <= b * lambda * 1.

    Equals (1 - max xi) n^2 / 4 for the two-block construction (the centered
    column variance is 1 - 4/n^2, so the left side of the bound carries the
    factor 4/n^2 per unit effect).
    """
    return (1.0 - xi_values(n, k1, k2).max) * n * n / 4.0


def proposition1_pad(active: Design, p: int) -> Design:
    """Pad active columns with constant +1 columns up to width p.

    The constant columns are completely confounded with the intercept, so the
    inactive event holds with probability one and the padded design's
    sign-recovery probability equals P(S) of the active block.
    """
    if p < active.p:
        raise InputError("p must be at least the number of active columns")
    pad = np.ones((active.n, p - active.p), dtype=np.int8)
    return Design(np.hstack([active.X, pad]))


# ---------------------------------------------------------------------------
# NBIBD support subsampling


def nbibd_supports(p: int, k: int, blocks: int, seed: int) -> SupportSet:
    """Nearly balanced support subsample via greedy spread minimization.

    Factors are chosen one at a time per block: least-used factors first,
    then smallest worst-pair and total-pair co-occurrence with the factors
    already in the block, ties broken by a seeded shuffle. A repair pass
    swaps factors out of blocks while it strictly reduces the pairwise
    co-occurrence spread. Duplicate supports are never emitted.
    """
    total = comb(p, k)
    if k >= p:
        raise InputError("need k < p")
    if blocks > total:
        raise TooManyBlocks(f"{blocks} supports requested but only {total} exist")
    rng = np.random.default_rng(derive_seed(seed, "nbibd", p, k, blocks))
    pair = np.zeros((p, p), dtype=np.int64)
    count = np.zeros(p, dtype=np.int64)
    chosen: set[tuple[int, ...]] = set()
    supports: list[tuple[int, ...]] = []

    def build_block() -> tuple[int, ...]:
        members: list[int] = []
        for _ in range(k):
            cands = [j for j in range(p) if j not in members]
            keys = []
            tie = rng.permutation(p)
            for j in cands:
                if members:
                    pc = pair[j, members]
                    worst = int(pc.max())
                    tot = int(pc.sum())
                else:
                    worst = tot = 0
                keys.append((int(count[j]), worst, tot, int(tie[j]), j))
            members.append(min(keys)[4])
        return tuple(sorted(members))

    for _ in range(blocks):
        sup = build_block()
        if sup in chosen:
            for attempt in range(64):  # rare; nudge the tie-break stream
                sup = build_block()
                if sup not in chosen:
                    break
            else:
                import itertools as it

                sup = next(
                    s for s in it.combinations(range(p), k) if s not in chosen
                )
        chosen.add(sup)
        supports.append(sup)
        for a_i, a in enumerate(sup):
            count[a] += 1
            for b in sup[a_i + 1:]:
                pair[a, b] += 1
                pair[b, a] += 1

    _nbibd_repair(supports, chosen, pair, count, p, k, rng)
    return SupportSet("nbibd", tuple(supports))


def _pair_spread(pair: np.ndarray, p: int) -> int:
    iu = np.triu_indices(p, k=1)
    vals = pair[iu]
    return int(vals.max() - vals.min())


def _nbibd_repair(supports, chosen, pair, count, p, k, rng, passes: int = 60) -> None:
    """Swap single factors between blocks while the pair spread improves.

    A swap is accepted only if it strictly reduces the pair co-occurrence
    spread without worsening the factor-count spread.
    """
    for _ in range(passes):
        spread = _pair_spread(pair, p)
        if spread <= 1:
            return
        count_spread = int(count.max() - count.min())
        iu = np.triu_indices(p, k=1)
        vals = pair[iu]
        hot = int(vals.argmax())
        a, b = int(iu[0][hot]), int(iu[1][hot])
        improved = False
        for bi, sup in enumerate(supports):
            if a not in sup or b not in sup:
                continue
            for out in (a, b):
                others = [j for j in sup if j != out]
                order = rng.permutation(p)
                for j in sorted(range(p), key=lambda x: (count[x], order[x])):
                    if j in sup:
                        continue
                    new_sup = tuple(sorted(others + [j]))
                    if new_sup in chosen:
                        continue
                    for x in others:
                        pair[out, x] -= 1
                        pair[x, out] -= 1
                        pair[j, x] += 1
                        pair[x, j] += 1
                    count[out] -= 1
                    count[j] += 1
                    if (
                        _pair_spread(pair, p) < spread
                        and int(count.max() - count.min()) <= count_spread
                    ):
                        chosen.discard(sup)
                        chosen.add(new_sup)
                        supports[bi] = new_sup
                        improved = True
                        break
                    # undo
                    for x in others:
                        pair[out, x] += 1
                        pair[x, out] += 1
                        pair[j, x] -= 1
                        pair[x, j] -= 1
                    count[out] += 1
                    count[j] -= 1
                if improved:
                    break
            if improved:
                break
        if not improved:
            return


# ---------------------------------------------------------------------------
# HILS


@dataclass(frozen=True)
class HilsConfig:
    n: int
    p: int
    k: int
    beta: float
    summary: str = "integral"  # fixed | max | integral
    sign_mode: str = "all"  # known | all
    lam: float | None = None  # for summary == "fixed"
    m_v: int = 50
    m_u: int = 50
    m_v_star: int = 10
    m_u_star: int = 10
    supports: str = "exhaustive"  # exhaustive | nbibd
    nbibd_blocks: int = 96
    extra_design_paths: tuple[str, ...] = ()
    seed: int = 0
    sample_budget: int = 1024
    randomizations: int = 8
    eff_floors: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8)
    ues_floors: tuple[float, ...] = (0.0,)
    max_passes: int = 200
    log_lambda_range: tuple[float, float] = (-5.0, 2.0)
    step: float = 0.02
    epsilon: float = 1e-6
    prescreen: str = "heuristic"  # heuristic | criterion
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.m_v_star > self.m_v or self.m_u_star > self.m_u:
            raise InputError("retained counts cannot exceed generated counts")
        if min(self.m_v, self.m_u, self.m_v_star, self.m_u_star) < 0:
            raise InputError("design counts must be nonnegative")
        if self.summary == "fixed" and self.lam is None:
            raise InputError("summary 'fixed' needs lam")
        if self.summary not in ("fixed", "max", "integral"):
            raise InputError("summary must be fixed, max, or integral")
        if self.sign_mode not in ("known", "all"):
            raise InputError("sign_mode must be known or all")


@dataclass(frozen=True)
class HilsReport:
    winner: Design
    winner_value: CriterionValue
    candidate_table: tuple[dict, ...]
    ue2_reference: float


def _score_design(design: Design, cfg: HilsConfig, supports: SupportSet) -> CriterionValue:
    std = standardize(design)
    qmc = QmcConfig(
        sample_budget=cfg.sample_budget,
        randomizations=cfg.randomizations,
        seed=derive_seed(cfg.seed, "score"),
    )
    signset = None if cfg.sign_mode == "known" else SignVectorSet.all_half(cfg.k)
    if cfg.summary == "fixed":
        return Phi_lambda(std, cfg.k, cfg.beta, cfg.lam, supports, signset, qmc, cfg.workers)
    if cfg.summary == "max":
        return Phi_max(
            std, cfg.k, cfg.beta, supports, signset, qmc,
            cfg.log_lambda_range, workers=cfg.workers,
        )
    return Phi_Lambda(
        std, cfg.k, cfg.beta, supports, signset, qmc,
        cfg.log_lambda_range[0], cfg.step, cfg.epsilon, cfg.log_lambda_range[1],
        workers=cfg.workers,
    )


def hils(config: HilsConfig) -> HilsReport:
    """Heuristic-initiated lasso sieve.

    Pools Var(s+)-optimal designs (floors sampled per start from the
    configured lists), UE(s^2)-optimal designs, and any extra designs; retains
    the heuristically best of each pool; scores the union under the configured
    sign-recovery criterion with common random numbers; returns the argmax.
    """
    rng = np.random.default_rng(derive_seed(config.seed, "hils"))
    ue2_ref_design = exchange_ue2(
        config.n, config.p, ExchangeConfig(starts=max(10, config.m_u), seed=derive_seed(config.seed, "ref"))
    )
    ue2_reference = heuristics(ue2_ref_design).ue_s2

    candidates: list[tuple[str, Design, HeuristicSummary]] = []
    for i in range(config.m_v):
        eff = float(rng.choice(config.eff_floors)) if config.eff_floors else None
        ues = float(rng.choice(config.ues_floors)) if config.ues_floors else None
        ex = ExchangeConfig(
            starts=1,
            max_passes=config.max_passes,
            seed=derive_seed(config.seed, "hilsv", i),
            ue2_efficiency_floor=eff,
            ue_s_floor=ues,
            ue2_reference=ue2_reference,
        )
        try:
            d = exchange_vars_plus(config.n, config.p, ex)
        except InfeasibleConstraints:
            continue
        candidates.append(("varsplus", d, heuristics(d)))
    vpool = sorted(
        (c for c in candidates if c[0] == "varsplus"),
        key=lambda c: (c[2].var_s, c[2].ue_s2),
    )[: config.m_v_star]

    upool_all = []
    for i in range(config.m_u):
        ex = ExchangeConfig(starts=1, max_passes=config.max_passes, seed=derive_seed(config.seed, "hilsu", i))
        d = exchange_ue2(config.n, config.p, ex)
        upool_all.append(("ue2", d, heuristics(d)))
    upool = sorted(upool_all, key=lambda c: (c[2].ue_s2, c[2].var_s))[: config.m_u_star]

    pool: list[tuple[str, Design, HeuristicSummary]] = list(vpool) + list(upool)
    for path in config.extra_design_paths:
        d = load_design_csv(path)
        if d.n != config.n or d.p != config.p:
            raise InputError(f"extra design {path} has shape {d.n}x{d.p}, expected {config.n}x{config.p}")
        pool.append((f"extra:{path}", d, heuristics(d)))
    if not pool:
        raise EmptyPool("no candidate designs to rank")

    if config.supports == "exhaustive":
        supports = SupportSet.exhaustive(config.p, config.k)
    elif config.supports == "nbibd":
        supports = nbibd_supports(config.p, config.k, config.nbibd_blocks, derive_seed(config.seed, "sup"))
    else:
        raise InputError("supports must be 'exhaustive' or 'nbibd'")

    def score(entry):
        return _score_design(entry[1], config, supports)

    values = parallel_map(score, pool, config.workers)
    table = []
    for (prov, d, h), cv in zip(pool, values):
        table.append(
            {
                "provenance": prov,
                "var_s": h.var_s,
                "ue_s2": h.ue_s2,
                "ue_s": h.ue_s,
                "value": cv.value,
                "p_s": cv.p_s,
                "p_i": cv.p_i,
                "std_error": cv.std_error,
                "lambda_at": cv.lambda_at,
            }
        )
    best_idx = int(np.argmax([cv.value for cv in values]))
    return HilsReport(
        winner=pool[best_idx][1],
        winner_value=values[best_idx],
        candidate_table=tuple(table),
        ue2_reference=ue2_reference,
    )
