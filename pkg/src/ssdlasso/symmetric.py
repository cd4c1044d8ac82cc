"""Sign-recovery criteria over completely symmetric correlation matrices.

Restricting the information matrix to ``C = (1-c) I + c J`` (and fixing
``V = I``) turns design optimization into a one-dimensional problem in the
common correlation ``c``. For active size k, inactive size q, scalar effect
beta and gamma = c / (1 + c (k-1)):

* sign event: ``u ~ N( lam sqrt(n)/(1-c) [1 - zsum gamma z],
  (1/(1-c)) [I_k - gamma z z^T] )`` with the box ``u < sqrt(n) beta 1``
  (``zsum`` is the sum of the sign vector z);
* inactive event: ``v ~ N( lam sqrt(n) zsum gamma 1, (1-c) [I_q + gamma J] )``
  with the box ``|v| <= lam sqrt(n)``.

For c of one sign, exactly one of the two covariances is "identity plus a
nonnegative rank-one term", which admits an exact one-dimensional quadrature;
the other side runs through the sequential-conditioning QMC path. At c = 0
both events split into univariate closed forms. Because the event
probabilities depend on z only through zsum, the reflection-class average
collapses to k+1 weighted terms.

The module also evaluates the two analytic side conditions: the derivative
condition ``2 lam_n >= g(tau_n)/G(tau_n)`` under which some c > 0 improves the
known-sign criterion, and the local-maximum condition at c = 0 for the
sign-averaged criterion (implemented in its condensed supplementary form).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb, inf, sqrt

import numpy as np
from scipy.special import log_ndtr

from . import mvn
from .errors import DegenerateK, InputError, InvalidC
from .mvn import GaussianRegion, ProbabilityEstimate, QmcConfig
from .parallel import derive_seed
from .recovery import (
    DEFAULT_EPSILON,
    DEFAULT_STEP,
    LOG_LAMBDA_CAP,
    CriterionValue,
    phi_Lambda,
    phi_max,
)

__all__ = [
    "SymScenario",
    "ConditionReport",
    "sym_regions",
    "sym_prob_S",
    "sym_prob_I",
    "psi_lambda",
    "psi_lambda_pm",
    "SymCurveEvaluator",
    "psi_max",
    "psi_Lambda",
    "optimize_c",
    "OptimizeCResult",
    "lemma3_condition",
    "lemma3_boundary",
    "theorem3_condition",
    "theorem3_regions",
    "derivative_check",
    "DerivativeReport",
    "contour_grid",
    "dprob_s_dc_at_zero",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def _g(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _mills(x):
    """g(x)/G(x), stable far into the left tail."""
    return np.exp(-0.5 * np.square(x) - np.log(_SQRT_2PI) - log_ndtr(x))


@dataclass(frozen=True)
class SymScenario:
    """One completely-symmetric evaluation point (n enters via sqrt(n) only)."""

    n: int
    k: int
    q: int
    beta: float
    c: float

    def __post_init__(self) -> None:
        if self.k < 1 or self.q < 1:
            raise InputError("need k >= 1 and q >= 1")
        if self.beta <= 0:
            raise InputError("beta must be positive")
        lo = -1.0 / (self.k - 1) if self.k > 1 else -1.0
        if not (lo < self.c < 1.0):
            raise InvalidC(f"c={self.c} outside ({lo}, 1)")

    @property
    def gamma(self) -> float:
        return self.c / (1.0 + self.c * (self.k - 1))

    @property
    def p(self) -> int:
        return self.k + self.q


@dataclass(frozen=True)
class ConditionReport:
    lam: float
    lhs: float
    rhs: float
    holds: bool


def _check_i_feasible(sym: SymScenario) -> None:
    # the q-block covariance (1-c)[I + gamma J] is PSD only for c > -1/(p-1)
    if sym.c <= -1.0 / (sym.p - 1):
        raise InvalidC(
            f"c={sym.c} <= -1/(p-1) makes the inactive-block covariance indefinite"
        )


def sym_regions(sym: SymScenario, signs, lam: float) -> tuple[GaussianRegion, GaussianRegion]:
    """The two Gaussian integration regions for a sign vector and penalty."""
    z = np.asarray(signs, dtype=float)
    if z.shape != (sym.k,) or not np.all(np.isin(z, (-1.0, 1.0))):
        raise InputError("signs must be +-1 of length k")
    _check_i_feasible(sym)
    rn = sqrt(sym.n)
    lam_n = lam * rn
    gam = sym.gamma
    zsum = float(z.sum())
    mean_s = (lam_n / (1.0 - sym.c)) * (1.0 - gam * zsum * z)
    cov_s = (np.eye(sym.k) - gam * np.outer(z, z)) / (1.0 - sym.c)
    region_s = GaussianRegion(
        mean=mean_s,
        covariance=cov_s,
        lower=np.full(sym.k, -inf),
        upper=np.full(sym.k, rn * sym.beta),
    )
    mean_i = np.full(sym.q, lam_n * zsum * gam)
    cov_i = (1.0 - sym.c) * (np.eye(sym.q) + gam * np.ones((sym.q, sym.q)))
    region_i = GaussianRegion(
        mean=mean_i,
        covariance=cov_i,
        lower=np.full(sym.q, -lam_n),
        upper=np.full(sym.q, lam_n),
    )
    return region_s, region_i


def _event_values(
    sym: SymScenario,
    lambdas: np.ndarray,
    zsum: float,
    kplus: int,
    config: QmcConfig,
    event: str,
    seed_tag: object,
) -> tuple[np.ndarray, bool]:
    """Per-lambda values for one event; (m, R) if QMC, (m, 1) if exact."""
    n, k, q, beta, c = sym.n, sym.k, sym.q, sym.beta, sym.c
    rn = sqrt(n)
    lam_n = lambdas * rn
    gam = sym.gamma
    kminus = k - kplus
    if event == "S":
        if c == 0.0:
            vals = np.exp(k * log_ndtr(rn * (beta - lambdas)))
            return vals[:, None], True
        mu_p = (lam_n / (1.0 - c)) * (1.0 - gam * zsum)
        mu_m = (lam_n / (1.0 - c)) * (1.0 + gam * zsum)
        mean = np.empty((len(lambdas), k))
        mean[:, :kplus] = mu_p[:, None]
        mean[:, kplus:] = mu_m[:, None]
        upper = np.full((len(lambdas), k), rn * beta)
        lower = np.full((len(lambdas), k), -inf)
        if c < 0.0:
            loading = np.concatenate([np.ones(kplus), -np.ones(kminus)])
            vals = mvn.one_factor_box_probability(
                mean, 1.0 / (1.0 - c), np.sqrt(-gam / (1.0 - c)) * loading, lower, upper
            )
            return vals[:, None], True
        z = np.concatenate([np.ones(kplus), -np.ones(kminus)])
        cov = (np.eye(k) - gam * np.outer(z, z)) / (1.0 - c)
        chol = np.linalg.cholesky(cov)
        ests = mvn.genz_estimates(chol, lower, upper - mean, config, ("symS", seed_tag))
        return ests, False
    # inactive event
    _check_i_feasible(sym)
    mI = lam_n * zsum * gam
    if c == 0.0:
        one_cdf = np.exp(log_ndtr(lam_n))
        vals = np.clip(2.0 * one_cdf - 1.0, 0.0, 1.0) ** q
        return vals[:, None], True
    mean = np.repeat(mI[:, None], q, axis=1)
    lower = np.repeat(-lam_n[:, None], q, axis=1)
    upper = np.repeat(lam_n[:, None], q, axis=1)
    if c > 0.0:
        vals = mvn.one_factor_box_probability(
            mean, 1.0 - c, np.full(q, np.sqrt((1.0 - c) * gam)), lower, upper
        )
        return vals[:, None], True
    cov = (1.0 - c) * (np.eye(q) + gam * np.ones((q, q)))
    chol = np.linalg.cholesky(cov)
    ests = mvn.genz_estimates(chol, lower - mean, upper - mean, config, ("symI", seed_tag))
    return ests, False


def _summarize_event(est: np.ndarray, exact: bool, rank: int) -> ProbabilityEstimate:
    if exact:
        return ProbabilityEstimate(float(np.clip(est[0, 0], 0.0, 1.0)), 0.0, rank)
    value = float(np.clip(est[0].mean(), 0.0, 1.0))
    err = float(est[0].std(ddof=1) / np.sqrt(est.shape[1]))
    return ProbabilityEstimate(value, err, rank)


def _zstats(signs, k: int) -> tuple[float, int]:
    z = np.asarray(signs, dtype=int)
    if z.shape != (k,) or not np.all(np.isin(z, (-1, 1))):
        raise InputError("signs must be +-1 of length k")
    return float(z.sum()), int(np.count_nonzero(z == 1))


def sym_prob_S(
    sym: SymScenario,
    signs,
    lam: float,
    config: QmcConfig | None = None,
    method: str = "auto",
) -> ProbabilityEstimate:
    """P(sign event) under the completely symmetric model.

    ``method='auto'`` uses the closed form at c = 0 and the exact one-factor
    quadrature for c < 0; ``method='qmc'`` always runs the QMC engine.
    """
    config = config or QmcConfig()
    zsum, kplus = _zstats(signs, sym.k)
    if method == "qmc":
        region_s, _ = sym_regions(sym, signs, lam)
        cfg = replace(config, seed=derive_seed(config.seed, "symS", lam, zsum))
        return mvn.box_probability(region_s, cfg)
    est, exact = _event_values(
        sym, np.asarray([lam]), zsum, kplus, config, "S", (lam, zsum)
    )
    return _summarize_event(est, exact, sym.k)


def sym_prob_I(
    sym: SymScenario,
    signs,
    lam: float,
    config: QmcConfig | None = None,
    method: str = "auto",
) -> ProbabilityEstimate:
    """P(inactive event) under the completely symmetric model."""
    config = config or QmcConfig()
    zsum, kplus = _zstats(signs, sym.k)
    _check_i_feasible(sym)
    if method == "qmc":
        _, region_i = sym_regions(sym, signs, lam)
        cfg = replace(config, seed=derive_seed(config.seed, "symI", lam, zsum))
        return mvn.box_probability(region_i, cfg)
    est, exact = _event_values(
        sym, np.asarray([lam]), zsum, kplus, config, "I", (lam, zsum)
    )
    return _summarize_event(est, exact, sym.q)


def _product_cv(ps: ProbabilityEstimate, pi: ProbabilityEstimate) -> CriterionValue:
    value = ps.value * pi.value
    err = sqrt(
        (pi.value * ps.std_error) ** 2
        + (ps.value * pi.std_error) ** 2
        + (ps.std_error * pi.std_error) ** 2
    )
    return CriterionValue(value=value, p_s=ps.value, p_i=pi.value, std_error=err)


def psi_lambda(
    sym: SymScenario, lam: float, config: QmcConfig | None = None, method: str = "auto"
) -> CriterionValue:
    """Known-sign criterion: P(S | z=1) * P(I | z=1)."""
    ones = np.ones(sym.k, dtype=int)
    return _product_cv(
        sym_prob_S(sym, ones, lam, config, method),
        sym_prob_I(sym, ones, lam, config, method),
    )


def _reflection_classes(k: int):
    """(weight, zsum, kplus) over the 2^(k-1) reflection representatives.

    Representatives fix z[0] = +1; with j of the remaining k-1 entries
    negative there are binom(k-1, j) representatives, all sharing
    zsum = k - 2 j. Event probabilities depend on z only through zsum, so
    this grouping evaluates the exact reflection-class average.
    """
    for j in range(k):
        yield comb(k - 1, j), float(k - 2 * j), k - j


def psi_lambda_pm(
    sym: SymScenario, lam: float, config: QmcConfig | None = None, method: str = "auto"
) -> CriterionValue:
    """Sign-averaged criterion over the 2^(k-1) reflection classes."""
    total_w = 2 ** (sym.k - 1)
    value = 0.0
    var = 0.0
    ps_acc = 0.0
    pi_acc = 0.0
    for w, zsum, kplus in _reflection_classes(sym.k):
        signs = np.concatenate([np.ones(kplus, dtype=int), -np.ones(sym.k - kplus, dtype=int)])
        cv = _product_cv(
            sym_prob_S(sym, signs, lam, config, method),
            sym_prob_I(sym, signs, lam, config, method),
        )
        value += w * cv.value
        var += (w * cv.std_error) ** 2
        ps_acc += w * cv.p_s
        pi_acc += w * cv.p_i
    return CriterionValue(
        value=value / total_w,
        p_s=ps_acc / total_w,
        p_i=pi_acc / total_w,
        std_error=sqrt(var) / total_w,
    )


class SymCurveEvaluator:
    """psi as a function of lambda for fixed c, vectorized over lambda grids.

    Exactly one event per sign class needs QMC for c != 0; its draws derive
    from the config seed and the class identity only, so evaluations at
    different c with the same config share random numbers (useful when
    comparing or optimizing over c).
    """

    def __init__(self, sym: SymScenario, sign_mode: str, config: QmcConfig | None = None):
        if sign_mode not in ("known", "all"):
            raise InputError("sign_mode must be 'known' or 'all'")
        self.sym = sym
        self.sign_mode = sign_mode
        self.config = config or QmcConfig()
        _check_i_feasible(sym)

    def curve(self, lambdas) -> dict[str, np.ndarray]:
        lambdas = np.asarray(lambdas, dtype=float)
        sym, config = self.sym, self.config
        if self.sign_mode == "known":
            classes = [(1, float(sym.k), sym.k)]
            total_w = 1
        else:
            classes = list(_reflection_classes(sym.k))
            total_w = 2 ** (sym.k - 1)
        value_acc = None
        ps_acc = np.zeros(len(lambdas))
        pi_acc = np.zeros(len(lambdas))
        var_exact = np.zeros(len(lambdas))
        for w, zsum, kplus in classes:
            s_est, s_exact = _event_values(sym, lambdas, zsum, kplus, config, "S", zsum)
            i_est, i_exact = _event_values(sym, lambdas, zsum, kplus, config, "I", zsum)
            prod = s_est[:, :, None] * i_est[:, None, :]
            prod = prod.reshape(len(lambdas), -1)
            if value_acc is None:
                width = prod.shape[1]
                value_acc = np.zeros((len(lambdas), width))
            if prod.shape[1] != value_acc.shape[1]:
                prod = np.repeat(prod, value_acc.shape[1] // prod.shape[1], axis=1)
            value_acc += w * prod
            ps_acc += w * s_est.mean(axis=1)
            pi_acc += w * i_est.mean(axis=1)
            del s_exact, i_exact
        value_acc /= total_w
        nrep = value_acc.shape[1]
        std = (
            value_acc.std(axis=1, ddof=1) / np.sqrt(nrep) if nrep > 1 else var_exact
        )
        return {
            "value": value_acc.mean(axis=1),
            "p_s": ps_acc / total_w,
            "p_i": pi_acc / total_w,
            "std_error": std,
        }

    def __call__(self, lam: float) -> CriterionValue:
        c = self.curve([lam])
        return CriterionValue(
            value=float(c["value"][0]),
            p_s=float(c["p_s"][0]),
            p_i=float(c["p_i"][0]),
            std_error=float(c["std_error"][0]),
        )


def psi_max(
    n: int,
    k: int,
    q: int,
    beta: float,
    c: float,
    sign_mode: str = "known",
    config: QmcConfig | None = None,
    log_lambda_range: tuple[float, float] = (-5.0, 5.0),
    grid_points: int = 65,
) -> CriterionValue:
    """max over lambda of psi (or the sign-averaged psi) at fixed c."""
    ev = SymCurveEvaluator(SymScenario(n, k, q, beta, c), sign_mode, config)
    return phi_max(ev, log_lambda_range, grid_points)


def psi_Lambda(
    n: int,
    k: int,
    q: int,
    beta: float,
    c: float,
    sign_mode: str = "known",
    config: QmcConfig | None = None,
    log_lambda_lower: float = -5.0,
    step: float = DEFAULT_STEP,
    epsilon: float = DEFAULT_EPSILON,
    log_lambda_upper: float = LOG_LAMBDA_CAP,
) -> CriterionValue:
    """Integral over log lambda of psi (or sign-averaged psi) at fixed c."""
    ev = SymCurveEvaluator(SymScenario(n, k, q, beta, c), sign_mode, config)
    return phi_Lambda(ev, log_lambda_lower, step, epsilon, log_lambda_upper)


@dataclass(frozen=True)
class OptimizeCResult:
    c_star: float
    value: float
    starts: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)
    """(start, refined c, value) for every local search performed."""


def optimize_c(
    n: int,
    k: int,
    q: int,
    beta: float,
    sign_mode: str = "known",
    summary: str = "integral",
    tolerance: float = 2e-3,
    config: QmcConfig | None = None,
    log_lambda_range: tuple[float, float] = (-5.0, 5.0),
    step: float = DEFAULT_STEP,
    epsilon: float = DEFAULT_EPSILON,
) -> OptimizeCResult:
    """Search for the common correlation maximizing a lambda summary.

    The sign-averaged criterion is provably non-concave in general, so the
    golden-section refinements are run from several starting brackets (and
    from the best point of a coarse scan); all local results are reported.
    The search interval is clipped to keep both event covariances positive
    semidefinite: c in (max(-1/(k-1), -1/(p-1)) + 1e-3, 0.99], additionally
    bounded below by -0.5.
    """
    if tolerance <= 0:
        raise InputError("tolerance must be positive")
    if summary not in ("max", "integral"):
        raise InputError("summary must be 'max' or 'integral'")
    config = config or QmcConfig()
    p = k + q
    lo = max(-1.0 / (k - 1) if k > 1 else -1.0, -1.0 / (p - 1), -0.5) + 1e-3
    hi = 0.99

    def objective(c: float) -> float:
        if summary == "integral":
            return psi_Lambda(
                n, k, q, beta, c, sign_mode, config,
                log_lambda_range[0], step, epsilon, log_lambda_range[1],
            ).value
        return psi_max(n, k, q, beta, c, sign_mode, config, log_lambda_range).value

    grid = np.linspace(lo, hi, 25)
    grid_vals = [objective(float(c)) for c in grid]
    best_grid = float(grid[int(np.argmax(grid_vals))])

    starts = sorted({min(max(s, lo), hi) for s in (-0.2, 0.0, 0.2, 0.5, best_grid)})
    invphi = (sqrt(5.0) - 1.0) / 2.0
    results = []
    for start in starts:
        a = max(lo, start - 0.15)
        b = min(hi, start + 0.15)
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1, f2 = objective(x1), objective(x2)
        while (b - a) > tolerance:
            if f1 >= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = objective(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = objective(x2)
        c_loc = x1 if f1 >= f2 else x2
        results.append((float(start), float(c_loc), float(max(f1, f2))))
    best = max(results, key=lambda t: t[2])
    return OptimizeCResult(c_star=best[1], value=best[2], starts=tuple(results))


# ---------------------------------------------------------------------------
# analytic side conditions


def lemma3_condition(n: int, beta: float, lam: float) -> ConditionReport:
    """2 lam sqrt(n) >= g(tau_n)/G(tau_n) with tau_n = sqrt(n)(beta - lam).

    Where this holds, the known-sign criterion has nonnegative derivative in
    c at c = 0 (so some positive c improves on the orthogonal structure).
    """
    if beta <= 0 or lam <= 0:
        raise InputError("beta and lambda must be positive")
    rn = sqrt(n)
    lhs = 2.0 * lam * rn
    rhs = float(_mills(rn * (beta - lam)))
    return ConditionReport(lam=lam, lhs=lhs, rhs=rhs, holds=lhs >= rhs)


def lemma3_boundary(
    n: int, beta: float, log_range: tuple[float, float] = (-40.0, 5.0)
) -> float:
    """log(lambda) at which the lemma's inequality starts to hold."""
    def gap(w: float) -> float:
        r = lemma3_condition(n, beta, float(np.exp(w)))
        return r.lhs - r.rhs

    lo, hi = log_range
    if gap(lo) > 0 or gap(hi) < 0:
        raise InputError("no sign change of the condition in log_range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-10:
            break
    return 0.5 * (lo + hi)


def theorem3_condition(n: int, k: int, q: int, beta: float, lam: float) -> ConditionReport:
    """Local-maximum condition for the sign-averaged criterion at c = 0.

    Condensed form: with lam_n = lam sqrt(n), tau_n = sqrt(n)(beta - lam),
    beta_n = beta sqrt(n) and G(Delta_n) = G(lam_n) - G(-lam_n),

        q/binom(k,2) * lam_n g(lam_n)/G(Delta_n)
            * ( k (1 - lam_n^2) + (q-1) lam_n g(lam_n)/G(Delta_n) )
        <=  g(tau_n)/G(tau_n)
            * ( beta_n + lam_n + lam_n^2 tau_n
                - [ (beta_n^2 - lam_n^2)/2 + beta_n lam_n ] g(tau_n)/G(tau_n) )
    """
    if k < 2:
        raise DegenerateK("condition involves binom(k, 2); not applicable for k < 2")
    rn = sqrt(n)
    lam_n = lam * rn
    tau = rn * (beta - lam)
    beta_n = beta * rn
    g_del = float(np.exp(log_ndtr(lam_n)) - np.exp(log_ndtr(-lam_n)))
    mills_lam = lam_n * float(_g(lam_n)) / g_del
    mills_tau = float(_mills(tau))
    lhs = (q / comb(k, 2)) * mills_lam * (k * (1.0 - lam_n**2) + (q - 1) * mills_lam)
    rhs = mills_tau * (
        beta_n
        + lam_n
        + lam_n**2 * tau
        - ((beta_n**2 - lam_n**2) / 2.0 + beta_n * lam_n) * mills_tau
    )
    return ConditionReport(lam=lam, lhs=lhs, rhs=rhs, holds=lhs <= rhs)


def theorem3_regions(
    n: int,
    k: int,
    q: int,
    beta: float,
    log_range: tuple[float, float] = (-5.0, 5.0),
    scan_points: int = 2001,
    refine_tol: float = 1e-4,
) -> list[tuple[float, float]]:
    """Intervals of log(lambda) where the c = 0 local-maximum condition holds."""
    ws = np.linspace(log_range[0], log_range[1], scan_points)

    def gap(w: float) -> float:
        r = theorem3_condition(n, k, q, beta, float(np.exp(w)))
        return r.rhs - r.lhs

    vals = np.array([gap(float(w)) for w in ws])
    holds = vals >= 0

    def refine(a: float, b: float) -> float:
        fa = gap(a)
        for _ in range(100):
            mid = 0.5 * (a + b)
            fm = gap(mid)
            if (fa >= 0) == (fm >= 0):
                a, fa = mid, fm
            else:
                b = mid
            if b - a < refine_tol:
                break
        return 0.5 * (a + b)

    regions = []
    start = None
    for idx in range(len(ws)):
        if holds[idx] and start is None:
            start = ws[idx] if idx == 0 else refine(float(ws[idx - 1]), float(ws[idx]))
        elif not holds[idx] and start is not None:
            regions.append((float(start), refine(float(ws[idx - 1]), float(ws[idx]))))
            start = None
    if start is not None:
        regions.append((float(start), float(ws[-1])))
    return regions


def dprob_s_dc_at_zero(n: int, k: int, beta: float, lam: float) -> float:
    """Analytic d/dc P(S | c, z=1) at c = 0 (used as a test oracle)."""
    rn = sqrt(n)
    tau = rn * (beta - lam)
    lam_n = lam * rn
    g_tau = float(_g(tau))
    G_tau = float(np.exp(log_ndtr(tau)))
    return k * (k - 1) * (lam_n * G_tau**(k - 1) * g_tau - 0.5 * G_tau**(k - 2) * g_tau**2)


@dataclass(frozen=True)
class DerivativeReport:
    estimate: float
    qmc_error: float
    step_disagreement: float
    prediction: str
    consistent: bool


def _richardson(fvals: dict[float, tuple[float, float]], h: float) -> tuple[float, float, float]:
    """Richardson-extrapolated central difference from values at +-h, +-h/2."""
    def central(hh):
        (vp, ep), (vm, em) = fvals[hh], fvals[-hh]
        return (vp - vm) / (2 * hh), sqrt(ep**2 + em**2) / (2 * hh)

    d1, e1 = central(h)
    d2, e2 = central(h / 2)
    est = (4.0 * d2 - d1) / 3.0
    err = sqrt((4.0 / 3.0 * e2) ** 2 + (1.0 / 3.0 * e1) ** 2)
    return est, err, abs(d2 - d1)


def derivative_check(
    n: int,
    k: int,
    q: int,
    beta: float,
    lam: float,
    config: QmcConfig | None = None,
    h: float = 1e-2,
) -> dict[str, DerivativeReport]:
    """Finite-difference derivatives in c at c = 0 against the theory.

    Predictions: d P(I)/dc = 0 for any signs; d psi/dc > 0 where the
    Lemma-3 condition holds; d psi_pm/dc = 0. Central differences at
    h and h/2 with Richardson extrapolation; the noise bound combines the
    QMC standard errors of the non-exact event sides.
    """
    config = config or QmcConfig(sample_budget=8192, randomizations=8)
    ones = np.ones(k, dtype=int)
    out: dict[str, DerivativeReport] = {}

    def eval_at(c: float, fn) -> tuple[float, float]:
        sym = SymScenario(n, k, q, beta, c)
        cv = fn(sym)
        return cv.value, cv.std_error

    cases = {
        "prob_i": lambda sym: _as_cv(sym_prob_I(sym, ones, lam, config)),
        "psi": lambda sym: psi_lambda(sym, lam, config),
        "psi_pm": lambda sym: psi_lambda_pm(sym, lam, config),
    }
    lemma_holds = lemma3_condition(n, beta, lam).holds
    predictions = {
        "prob_i": "zero",
        "psi": "positive" if lemma_holds else "unconstrained",
        "psi_pm": "zero",
    }
    for name, fn in cases.items():
        fvals = {}
        for hh in (h, -h, h / 2, -h / 2):
            fvals[hh] = eval_at(hh, fn)
        est, err, disagreement = _richardson(fvals, h)
        bound = max(5.0 * err, 2.0 * disagreement, 1e-7)
        pred = predictions[name]
        if pred == "zero":
            consistent = abs(est) <= bound
        elif pred == "positive":
            consistent = est > -bound
        else:
            consistent = True
        out[name] = DerivativeReport(
            estimate=est,
            qmc_error=err,
            step_disagreement=disagreement,
            prediction=pred,
            consistent=bool(consistent),
        )
    return out


def _as_cv(pe: ProbabilityEstimate) -> CriterionValue:
    return CriterionValue(value=pe.value, std_error=pe.std_error)


def contour_grid(
    n: int,
    k: int,
    q: int,
    beta: float,
    sign_mode: str,
    c_range: tuple[float, float],
    log_lambda_range: tuple[float, float],
    resolution: int,
    config: QmcConfig | None = None,
) -> list[tuple[float, float, float]]:
    """(c, log_lambda, value) rows, row-major in c then log lambda."""
    if resolution < 1:
        raise InputError("resolution must be >= 1")
    cs = np.linspace(c_range[0], c_range[1], resolution)
    ws = np.linspace(log_lambda_range[0], log_lambda_range[1], resolution)
    rows = []
    for c in cs:
        ev = SymCurveEvaluator(SymScenario(n, k, q, beta, float(c)), sign_mode, config)
        vals = ev.curve(np.exp(ws))["value"]
        for w, v in zip(ws, vals):
            rows.append((float(c), float(w), float(v)))
    return rows
