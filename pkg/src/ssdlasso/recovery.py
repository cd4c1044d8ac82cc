"""Lasso sign-recovery criteria for exact designs.

The sign-recovery probability factorizes into two independent events:

* ``S``: the active-block estimate carries the true signs. With ``Z = diag(z)``
  the checking variable is ``u ~ N(lam sqrt(n) Z C_A^{-1} z, Z C_A^{-1} Z)``
  and the event is ``u < sqrt(n) Z V_A^{1/2} beta_A`` componentwise.
* ``I``: every inactive coefficient is estimated exactly zero. The checking
  variable ``v ~ N(lam sqrt(n) C_IA C_A^{-1} z, C_I - C_IA C_A^{-1} C_AI)``
  must fall in the box ``[-lam sqrt(n), lam sqrt(n)]``; its covariance is rank
  deficient for any supersaturated design.

Fixed-lambda operations evaluate each event through the QMC engine. The
lambda summaries (max over lambda, integral over log lambda) instead use a
shared-draw curve representation: for one set of Gaussian draws the event
indicator is monotone-decomposable in lambda, so each sample contributes a
feasibility interval ``[lo, hi]`` and the entire probability curve is an
interval-counting exercise. That makes a full criterion curve cost one
sampling pass per (support, sign) pair rather than one per lambda.

Strict vs. closed box boundaries are interchangeable here: the distributions
are continuous, boundaries have measure zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from math import comb, inf, sqrt

import numpy as np

from . import mvn
from .design import StandardizedDesign, SupportViews, submatrix_views
from .errors import (
    DegenerateSupport,
    EmptySupportSet,
    InputError,
    NonPositiveStep,
    SingularCA,
    TooManySigns,
)
from .mvn import GaussianRegion, ProbabilityEstimate, QmcConfig
from .parallel import derive_seed, parallel_map

__all__ = [
    "Scenario",
    "SignVectorSet",
    "SupportSet",
    "CriterionValue",
    "prob_S",
    "prob_I",
    "phi_lambda",
    "phi_lambda_pm",
    "Phi_lambda",
    "phi_max",
    "phi_Lambda",
    "support_recovery_prob",
    "CurveEvaluator",
    "criterion_curve",
    "Phi_max",
    "Phi_Lambda",
]

_TINY = 1e-300
DEFAULT_LOG_LAMBDA_RANGE = (-5.0, 2.0)
DEFAULT_STEP = 0.02
DEFAULT_EPSILON = 1e-6
LOG_LAMBDA_CAP = 5.0


@dataclass(frozen=True)
class Scenario:
    """A model hypothesis: support, effect magnitudes, signs, and penalty."""

    support: tuple[int, ...]
    magnitudes: np.ndarray
    signs: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        support = tuple(int(j) for j in self.support)
        k = len(support)
        mags = np.asarray(self.magnitudes, dtype=float)
        if mags.ndim == 0:
            mags = np.full(k, float(mags))
        signs = np.asarray(self.signs, dtype=int)
        if k < 1:
            raise InputError("scenario needs at least one active factor")
        if mags.shape != (k,) or np.any(mags <= 0):
            raise InputError("magnitudes must be positive, one per active factor")
        if signs.shape != (k,) or not np.all(np.isin(signs, (-1, 1))):
            raise InputError("signs must be a +-1 vector of length k")
        if not self.lam > 0:
            raise InputError("lambda must be positive")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "signs", signs)

    @property
    def k(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class SignVectorSet:
    """Sign vectors to average over: a known one, a reflection half, or custom."""

    mode: str
    vectors: tuple[tuple[int, ...], ...]

    @staticmethod
    def known(signs) -> "SignVectorSet":
        z = tuple(int(s) for s in signs)
        if not all(s in (-1, 1) for s in z):
            raise InputError("signs must be +-1")
        return SignVectorSet("known", (z,))

    @staticmethod
    def all_half(k: int) -> "SignVectorSet":
        """The 2^(k-1) reflection-class representatives (first entry +1)."""
        vecs = tuple(
            (1,) + rest for rest in itertools.product((1, -1), repeat=k - 1)
        )
        return SignVectorSet("all_half", vecs)

    @staticmethod
    def custom(vectors) -> "SignVectorSet":
        vecs = tuple(tuple(int(s) for s in v) for v in vectors)
        if not vecs:
            raise InputError("custom sign set is empty")
        klen = len(vecs[0])
        seen = set()
        for v in vecs:
            if len(v) != klen or not all(s in (-1, 1) for s in v):
                raise InputError("custom sign vectors must be +-1 of equal length")
            if tuple(-s for s in v) in seen:
                raise InputError("custom sign set contains a reflected pair")
            seen.add(v)
        return SignVectorSet("custom", vecs)

    @property
    def weight(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class SupportSet:
    """Size-k supports to average over."""

    mode: str
    supports: tuple[tuple[int, ...], ...]

    @staticmethod
    def exhaustive(p: int, k: int) -> "SupportSet":
        return SupportSet(
            "exhaustive", tuple(itertools.combinations(range(p), k))
        )

    @staticmethod
    def explicit(supports) -> "SupportSet":
        sup = tuple(tuple(sorted(int(j) for j in s)) for s in supports)
        if len(set(sup)) != len(sup):
            raise InputError("duplicate supports")
        sizes = {len(s) for s in sup}
        if len(sizes) > 1:
            raise InputError("supports must share one size")
        return SupportSet("explicit", sup)


@dataclass(frozen=True)
class CriterionValue:
    """A criterion evaluation with its components and Monte-Carlo error."""

    value: float
    p_s: float | None = None
    p_i: float | None = None
    std_error: float = 0.0
    lambda_at: float | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# fixed-lambda event probabilities through the QMC engine


def _seeded(config: QmcConfig, *tags) -> QmcConfig:
    return replace(config, seed=derive_seed(config.seed, *tags))


def _s_region(
    views: SupportViews, n: int, beta_signed: np.ndarray, z_hat: np.ndarray, lam: float
) -> GaussianRegion:
    """Region for the sign-check event under hypothesized signs ``z_hat``."""
    k = len(views.support)
    Minv = np.linalg.solve(views.C_A, np.eye(k))
    mean = lam * sqrt(n) * (z_hat * (Minv @ z_hat))
    cov = Minv * np.outer(z_hat, z_hat)
    upper = sqrt(n) * z_hat * np.sqrt(views.V_A) * beta_signed
    lower = np.full(k, -inf)
    return GaussianRegion(mean=mean, covariance=cov, lower=lower, upper=upper)


def prob_S(std: StandardizedDesign, scenario: Scenario, config: QmcConfig) -> ProbabilityEstimate:
    """P(S_lambda): the active-block estimate has the true signs."""
    views = submatrix_views(std, scenario.support)
    beta_signed = scenario.signs * scenario.magnitudes
    region = _s_region(views, std.n, beta_signed, scenario.signs.astype(float), scenario.lam)
    cfg = _seeded(config, "S", scenario.support, tuple(scenario.signs), scenario.lam)
    return mvn.box_probability(region, cfg)


def _i_region(
    views: SupportViews, n: int, signs: np.ndarray, lam: float
) -> GaussianRegion | None:
    """Region for the inactive event; None when it is exactly certain."""
    active_rows = [
        idx for idx, j in enumerate(views.inactive) if j not in views.inactive_degenerate
    ]
    if not active_rows:
        return None
    rows = np.asarray(active_rows, dtype=int)
    k = len(views.support)
    Minv = np.linalg.solve(views.C_A, np.eye(k))
    a = (views.C_IA @ (Minv @ signs))[rows]
    cov = views.C_I - views.C_IA @ Minv @ views.C_IA.T
    cov = cov[np.ix_(rows, rows)]
    cov = 0.5 * (cov + cov.T)
    lam_n = lam * sqrt(n)
    q = len(rows)
    return GaussianRegion(
        mean=lam_n * a,
        covariance=cov,
        lower=np.full(q, -lam_n),
        upper=np.full(q, lam_n),
    )


def prob_I(
    std: StandardizedDesign, support, signs, lam: float, config: QmcConfig
) -> ProbabilityEstimate:
    """P(I_lambda): every inactive coefficient is estimated exactly zero.

    Degenerate (constant) inactive columns are confounded with the intercept
    and contribute a factor of exactly one; if the inactive set is empty or
    entirely degenerate the result is exactly 1.
    """
    views = submatrix_views(std, support)
    signs = np.asarray(signs, dtype=float)
    region = _i_region(views, std.n, signs, lam)
    if region is None:
        return ProbabilityEstimate(1.0, 0.0, 0)
    cfg = _seeded(config, "I", views.support, tuple(int(s) for s in signs), lam)
    return mvn.box_probability(region, cfg)


def _product(ps: ProbabilityEstimate, pi: ProbabilityEstimate) -> tuple[float, float]:
    value = ps.value * pi.value
    var = (
        (pi.value * ps.std_error) ** 2
        + (ps.value * pi.std_error) ** 2
        + (ps.std_error * pi.std_error) ** 2
    )
    return value, sqrt(var)


def phi_lambda(std: StandardizedDesign, scenario: Scenario, config: QmcConfig) -> CriterionValue:
    """P(sign recovery) = P(S) * P(I); the events are independent."""
    ps = prob_S(std, scenario, config)
    pi = prob_I(std, scenario.support, scenario.signs, scenario.lam, config)
    value, err = _product(ps, pi)
    return CriterionValue(value=value, p_s=ps.value, p_i=pi.value, std_error=err)


def phi_lambda_pm(
    std: StandardizedDesign,
    support,
    magnitudes,
    lam: float,
    signset: SignVectorSet,
    config: QmcConfig,
) -> CriterionValue:
    """Average of phi over a sign set (reflection classes count once)."""
    if not signset.vectors:
        raise InputError("empty sign set")
    vals, errs, pss, pis = [], [], [], []
    for z in signset.vectors:
        sc = Scenario(tuple(support), magnitudes, np.asarray(z), lam)
        cv = phi_lambda(std, sc, config)
        vals.append(cv.value)
        errs.append(cv.std_error)
        pss.append(cv.p_s)
        pis.append(cv.p_i)
    m = len(vals)
    return CriterionValue(
        value=float(np.mean(vals)),
        p_s=float(np.mean(pss)),
        p_i=float(np.mean(pis)),
        std_error=float(np.sqrt(np.sum(np.square(errs))) / m),
    )


def Phi_lambda(
    std: StandardizedDesign,
    k: int,
    beta: float,
    lam: float,
    supports: SupportSet,
    signset: SignVectorSet | None,
    config: QmcConfig,
    workers: int | None = None,
) -> CriterionValue:
    """Support-averaged criterion at fixed lambda.

    ``signset=None`` means the known-sign mode, which takes z = 1 on every
    support (any known sign pattern reduces to this by flipping design
    columns first). Supports whose C_A is singular, or which touch a
    degenerate column, score zero and are tallied in the diagnostics.
    """
    if not supports.supports:
        raise EmptySupportSet("no supports to average over")
    sset = signset if signset is not None else None

    def one(support):
        try:
            if sset is None:
                sc = Scenario(support, beta, np.ones(k, dtype=int), lam)
                return phi_lambda(std, sc, config), 0
            return phi_lambda_pm(std, support, beta, lam, sset, config), 0
        except (SingularCA, DegenerateSupport):
            return CriterionValue(value=0.0, p_s=0.0, p_i=0.0), 1

    results = parallel_map(one, supports.supports, workers)
    vals = [cv.value for cv, _ in results]
    errs = [cv.std_error for cv, _ in results]
    pss = [cv.p_s for cv, _ in results]
    pis = [cv.p_i for cv, _ in results]
    skipped = sum(flag for _, flag in results)
    m = len(vals)
    return CriterionValue(
        value=float(np.mean(vals)),
        p_s=float(np.mean(pss)),
        p_i=float(np.mean(pis)),
        std_error=float(np.sqrt(np.sum(np.square(errs))) / m),
        diagnostics={"singular_supports": skipped},
    )


def support_recovery_prob(
    std: StandardizedDesign, scenario: Scenario, config: QmcConfig
) -> CriterionValue:
    """P(support recovery): sum of sign probabilities over all 2^k sign vectors.

    Each term keeps the true beta but replaces the hypothesized sign vector in
    both events.
    """
    k = scenario.k
    if k > 12:
        raise TooManySigns(f"2^{k} sign vectors exceed the enumeration guard")
    views = submatrix_views(std, scenario.support)
    beta_signed = scenario.signs * scenario.magnitudes
    total, var = 0.0, 0.0
    for z_hat in itertools.product((1, -1), repeat=k):
        zh = np.asarray(z_hat, dtype=float)
        region = _s_region(views, std.n, beta_signed, zh, scenario.lam)
        cfg = _seeded(config, "S", scenario.support, z_hat, scenario.lam)
        ps = mvn.box_probability(region, cfg)
        pi = prob_I(std, scenario.support, zh, scenario.lam, config)
        v, e = _product(ps, pi)
        total += v
        var += e * e
    return CriterionValue(value=total, std_error=sqrt(var))


# ---------------------------------------------------------------------------
# lambda summaries (generic over any fixed-lambda evaluator)


def _as_value(res) -> tuple[float, CriterionValue | None]:
    if isinstance(res, CriterionValue):
        return res.value, res
    return float(res), None


def _batch_values(evaluator, lambdas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(values, std_errors) for many lambdas, vectorized when supported."""
    if hasattr(evaluator, "curve"):
        c = evaluator.curve(lambdas)
        return np.asarray(c["value"], dtype=float), np.asarray(c["std_error"], dtype=float)
    vals = np.empty(len(lambdas))
    errs = np.zeros(len(lambdas))
    for idx, lam in enumerate(lambdas):
        v, full = _as_value(evaluator(float(lam)))
        vals[idx] = v
        if full is not None:
            errs[idx] = full.std_error
    return vals, errs


def phi_max(
    evaluator,
    log_lambda_range: tuple[float, float] = DEFAULT_LOG_LAMBDA_RANGE,
    grid_points: int = 33,
) -> CriterionValue:
    """Maximum of a fixed-lambda criterion over lambda.

    Warm start: an even grid in log lambda; the best grid point seeds a
    golden-section maximization bracketed by its neighbors. ``evaluator``
    maps lambda to a float or a :class:`CriterionValue`.
    """
    lo, hi = float(log_lambda_range[0]), float(log_lambda_range[1])
    if not lo < hi:
        raise InputError("log_lambda_range must satisfy lo < hi")
    if grid_points < 8:
        raise InputError("grid_points must be >= 8")
    grid = np.linspace(lo, hi, grid_points)
    vals, _ = _batch_values(evaluator, np.exp(grid))
    b = int(np.argmax(vals))
    a = grid[max(b - 1, 0)]
    c = grid[min(b + 1, grid_points - 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = c - invphi * (c - a)
    x2 = a + invphi * (c - a)
    f1 = _as_value(evaluator(float(np.exp(x1))))[0]
    f2 = _as_value(evaluator(float(np.exp(x2))))[0]
    while (c - a) > 1e-7:
        if f1 >= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - invphi * (c - a)
            f1 = _as_value(evaluator(float(np.exp(x1))))[0]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (c - a)
            f2 = _as_value(evaluator(float(np.exp(x2))))[0]
    w_best = x1 if f1 >= f2 else x2
    if max(f1, f2) < vals[b]:
        w_best = grid[b]
    lam_best = float(np.exp(w_best))
    v, full = _as_value(evaluator(lam_best))
    return CriterionValue(
        value=v,
        p_s=None if full is None else full.p_s,
        p_i=None if full is None else full.p_i,
        std_error=0.0 if full is None else full.std_error,
        lambda_at=lam_best,
        diagnostics={} if full is None else dict(full.diagnostics),
    )


def phi_Lambda(
    evaluator,
    log_lambda_lower: float = -5.0,
    step: float = DEFAULT_STEP,
    epsilon: float = DEFAULT_EPSILON,
    log_lambda_upper: float = LOG_LAMBDA_CAP,
) -> CriterionValue:
    """Integral of a fixed-lambda criterion over log lambda.

    Left Riemann sum walking up from ``log_lambda_lower``: a point is
    accepted while the criterion is at least ``epsilon``; once at least one
    point has been accepted, the first value below ``epsilon`` stops the walk
    (so curves that are still zero at the lower bound are not truncated).
    The walk is capped at ``log_lambda_upper`` regardless.
    """
    if step <= 0:
        raise NonPositiveStep("step must be positive")
    total = 0.0
    var = 0.0
    accepted = False
    stopped = False
    w = float(log_lambda_lower)
    chunk = 64
    while w <= log_lambda_upper + 1e-12 and not stopped:
        ws = w + step * np.arange(chunk)
        ws = ws[ws <= log_lambda_upper + 1e-12]
        if len(ws) == 0:
            break
        vals, errs = _batch_values(evaluator, np.exp(ws))
        for v, e in zip(vals, errs):
            if v >= epsilon:
                total += v
                var += e * e
                accepted = True
            elif accepted:
                stopped = True
                break
        w = ws[-1] + step
    return CriterionValue(value=total * step, std_error=sqrt(var) * step)


# ---------------------------------------------------------------------------
# shared-draw lambda curves


class _EventCurve:
    """Feasibility intervals in lambda for one event and one draw set.

    ``lo``/``hi`` have shape (R, N): sample i of randomization r satisfies the
    event exactly for lambda in (lo[r, i], hi[r, i]). ``exact_one`` marks
    events that hold with probability one for every lambda.
    """

    __slots__ = ("lo", "hi", "exact_one")

    def __init__(self, lo=None, hi=None, exact_one=False):
        self.exact_one = exact_one
        if not exact_one:
            self.lo = np.sort(lo, axis=1)
            self.hi = np.sort(hi, axis=1)

    def probabilities(self, lambdas: np.ndarray) -> np.ndarray:
        """Shape (m, R) per-randomization probability estimates."""
        m = len(lambdas)
        if self.exact_one:
            return np.ones((m, 1))
        nrand, n = self.lo.shape
        out = np.empty((m, nrand))
        for r in range(nrand):
            started = np.searchsorted(self.lo[r], lambdas, side="left")
            ended = np.searchsorted(self.hi[r], lambdas, side="right")
            out[:, r] = (started - ended) / n
        return out


def _intervals_from_linear_constraints(slopes, offsets) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample feasible lambda intervals for constraints lam*slope < offset.

    ``slopes``: (d,), ``offsets``: (N, d). Returns (lo, hi) of shape (N,),
    with infeasible samples encoded as lo = hi = +inf.
    """
    n = offsets.shape[0]
    lo = np.zeros(n)
    hi = np.full(n, inf)
    pos = slopes > _TINY
    neg = slopes < -_TINY
    zero = ~(pos | neg)
    if pos.any():
        hi = np.minimum(hi, (offsets[:, pos] / slopes[pos]).min(axis=1))
    if neg.any():
        lo = np.maximum(lo, (offsets[:, neg] / slopes[neg]).max(axis=1))
    if zero.any():
        bad = (offsets[:, zero] <= 0.0).any(axis=1)
        lo[bad] = inf
        hi[bad] = inf
    empty = lo >= hi
    lo[empty] = inf
    hi[empty] = inf
    return lo, hi


def _s_event_curve(
    views: SupportViews,
    n: int,
    beta_signed: np.ndarray,
    z_hat: np.ndarray,
    config: QmcConfig,
    seed_tag,
) -> _EventCurve:
    k = len(views.support)
    Minv = np.linalg.solve(views.C_A, np.eye(k))
    cov = Minv * np.outer(z_hat, z_hat)
    chol = np.linalg.cholesky(0.5 * (cov + cov.T))
    slope = sqrt(n) * (z_hat * (Minv @ z_hat))
    bound = sqrt(n) * z_hat * np.sqrt(views.V_A) * beta_signed
    nrand, npts = config.randomizations, config.sample_budget
    lo = np.empty((nrand, npts))
    hi = np.empty((nrand, npts))
    for r in range(nrand):
        e = mvn.std_normal_qmc(k, npts, derive_seed(config.seed, "S", seed_tag, r))
        draws = e @ chol.T
        lo[r], hi[r] = _intervals_from_linear_constraints(slope, bound[None, :] - draws)
    return _EventCurve(lo, hi)


def _i_event_curve(
    views: SupportViews,
    n: int,
    signs: np.ndarray,
    config: QmcConfig,
    seed_tag,
) -> _EventCurve:
    active_rows = [
        idx for idx, j in enumerate(views.inactive) if j not in views.inactive_degenerate
    ]
    if not active_rows:
        return _EventCurve(exact_one=True)
    rows = np.asarray(active_rows, dtype=int)
    k = len(views.support)
    Minv = np.linalg.solve(views.C_A, np.eye(k))
    a = (views.C_IA @ (Minv @ signs))[rows]
    cov = views.C_I - views.C_IA @ Minv @ views.C_IA.T
    cov = 0.5 * (cov + cov.T)[np.ix_(rows, rows)]
    factor, rank = mvn.factorize_psd(cov, config.rank_tolerance)
    rn = sqrt(n)
    # |lam rn a_j + w_j| <= lam rn  <=>  lam*(-rn(1 - a_j)) < -w_j  and
    #                                    lam*(-rn(1 + a_j)) <  w_j
    slopes = np.concatenate([-rn * (1.0 - a), -rn * (1.0 + a)])
    nrand, npts = config.randomizations, config.sample_budget
    lo = np.empty((nrand, npts))
    hi = np.empty((nrand, npts))
    for r in range(nrand):
        if rank == 0:
            w = np.zeros((npts, len(rows)))
        else:
            e = mvn.std_normal_qmc(rank, npts, derive_seed(config.seed, "I", seed_tag, r))
            w = e @ factor.T
        offsets = np.concatenate([-w, w], axis=1)
        lo[r], hi[r] = _intervals_from_linear_constraints(slopes, offsets)
    return _EventCurve(lo, hi)


@dataclass
class _PairCurve:
    s: _EventCurve
    i: _EventCurve

    def estimates(self, lambdas: np.ndarray) -> np.ndarray:
        """(m, R) per-randomization estimates of P(S)*P(I)."""
        ps = self.s.probabilities(lambdas)
        pi = self.i.probabilities(lambdas)
        if ps.shape[1] == 1 and pi.shape[1] > 1:
            ps = np.broadcast_to(ps, pi.shape)
        if pi.shape[1] == 1 and ps.shape[1] > 1:
            pi = np.broadcast_to(pi, ps.shape)
        return ps * pi

    def components(self, lambdas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.s.probabilities(lambdas).mean(axis=1), self.i.probabilities(
            lambdas
        ).mean(axis=1)


class CurveEvaluator:
    """A criterion as a function of lambda, backed by shared QMC draws.

    One sampling pass per (support, sign) pair yields the entire probability
    curve; evaluating the criterion at any lambda costs a binary search per
    stored interval array. All draws derive from the config seed and the pair
    identity, so results are deterministic and independent of evaluation
    order. Within one evaluator the estimates at different lambdas share
    draws and are therefore positively correlated across lambda --- exactly
    what a max/integral summary wants.
    """

    def __init__(
        self,
        std: StandardizedDesign,
        supports: SupportSet,
        signset: SignVectorSet | None,
        beta: float,
        config: QmcConfig,
        workers: int | None = None,
    ):
        if not supports.supports:
            raise EmptySupportSet("no supports to average over")
        self._skipped = 0
        k = len(supports.supports[0])
        vectors = signset.vectors if signset is not None else ((1,) * k,)
        jobs = []
        for support in supports.supports:
            for si, z in enumerate(vectors):
                jobs.append((support, si, z))

        def build(job):
            support, si, z = job
            try:
                views = submatrix_views(std, support)
            except (SingularCA, DegenerateSupport):
                return None
            zf = np.asarray(z, dtype=float)
            beta_signed = zf * beta
            tag = (support, si)
            s = _s_event_curve(views, std.n, beta_signed, zf, config, tag)
            i = _i_event_curve(views, std.n, zf, config, tag)
            return _PairCurve(s, i)

        built = parallel_map(build, jobs, workers)
        self._pairs = [pc for pc in built if pc is not None]
        self._skipped = sum(1 for pc in built if pc is None)
        self._total = len(jobs)
        # a skipped (singular/degenerate) pair contributes probability zero
        self._scale = len(self._pairs) / self._total if self._total else 0.0

    @property
    def singular_supports(self) -> int:
        return self._skipped

    def curve(self, lambdas) -> dict[str, np.ndarray]:
        """Vectorized criterion curve with components and standard errors."""
        lambdas = np.asarray(lambdas, dtype=float)
        if not self._pairs:
            z = np.zeros(len(lambdas))
            return {"value": z, "p_s": z, "p_i": z, "std_error": z}
        ests = None
        ps_acc = np.zeros(len(lambdas))
        pi_acc = np.zeros(len(lambdas))
        for pc in self._pairs:
            e = pc.estimates(lambdas)
            if ests is None:
                ests = np.zeros((len(lambdas), e.shape[1]))
            ests += e
            ps, pi = pc.components(lambdas)
            ps_acc += ps
            pi_acc += pi
        ests /= self._total
        nrand = ests.shape[1]
        return {
            "value": ests.mean(axis=1),
            "p_s": ps_acc / self._total,
            "p_i": pi_acc / self._total,
            "std_error": ests.std(axis=1, ddof=1) / np.sqrt(nrand),
        }

    def __call__(self, lam: float) -> CriterionValue:
        c = self.curve([lam])
        return CriterionValue(
            value=float(c["value"][0]),
            p_s=float(c["p_s"][0]),
            p_i=float(c["p_i"][0]),
            std_error=float(c["std_error"][0]),
            diagnostics={"singular_supports": self._skipped},
        )


def criterion_curve(
    std: StandardizedDesign,
    k: int,
    beta: float,
    supports: SupportSet,
    signset: SignVectorSet | None,
    config: QmcConfig,
    workers: int | None = None,
) -> CurveEvaluator:
    """Build the shared-draw evaluator for Phi (signset None: known sign z=1)."""
    del k  # implied by the supports; kept for signature symmetry
    return CurveEvaluator(std, supports, signset, beta, config, workers)


def Phi_max(
    std: StandardizedDesign,
    k: int,
    beta: float,
    supports: SupportSet,
    signset: SignVectorSet | None,
    config: QmcConfig,
    log_lambda_range: tuple[float, float] = DEFAULT_LOG_LAMBDA_RANGE,
    grid_points: int = 65,
    workers: int | None = None,
) -> CriterionValue:
    ev = criterion_curve(std, k, beta, supports, signset, config, workers)
    res = phi_max(ev, log_lambda_range, grid_points)
    res.diagnostics["singular_supports"] = ev.singular_supports
    return res


def Phi_Lambda(
    std: StandardizedDesign,
    k: int,
    beta: float,
    supports: SupportSet,
    signset: SignVectorSet | None,
    config: QmcConfig,
    log_lambda_lower: float = -5.0,
    step: float = DEFAULT_STEP,
    epsilon: float = DEFAULT_EPSILON,
    log_lambda_upper: float = LOG_LAMBDA_CAP,
    workers: int | None = None,
) -> CriterionValue:
    ev = criterion_curve(std, k, beta, supports, signset, config, workers)
    res = phi_Lambda(ev, log_lambda_lower, step, epsilon, log_lambda_upper)
    res.diagnostics["singular_supports"] = ev.singular_supports
    return res
