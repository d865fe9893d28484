"""Maximum-likelihood fitting of 2-IFC psychometric functions and cohort statistics.

The model is a cumulative Gaussian rising from the 50% guess rate:

    psi(a) = 0.5 + 0.5 * Phi((a - mu) / sigma)

so psi(mu) = 0.75 and the 75%-correct threshold is mu itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
from scipy.special import erfc

GUESS_RATE = 0.5
PSI_CLAMP = 1e-9
MIN_THRESHOLD_P = 0.501
CHANCE_CEILING = 0.55
# search box in units of the stimulus range
SIGMA_BOUNDS = (1.0 / 100.0, 3.0)
MU_BOUNDS = (-1.0, 2.0)


class FitError(ValueError):
    pass


def normal_cdf(z):
    """Standard normal CDF, computed through erfc so both tails keep full precision."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * erfc(-z / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def _normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def normal_quantile(p: float, tol: float = 1e-13) -> float:
    """Inverse of `normal_cdf`: Newton steps safeguarded by a shrinking bracket."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile needs 0 < p < 1, got {p}")
    lo, hi = -38.0, 38.0
    z = 0.0
    for _ in range(200):
        f = normal_cdf(z) - p
        if f == 0.0:
            return z
        if f > 0:
            hi = z
        else:
            lo = z
        d = _normal_pdf(z)
        step = f / d if d > 0 else math.inf
        z_new = z - step
        if not lo < z_new < hi:
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) < tol or hi - lo < tol:
            return z_new
        z = z_new
    return z


def psychometric(a, mu: float, sigma: float, lapse: float = 0.0):
    """Probability correct: lapse/2 + (1 - lapse) * (0.5 + 0.5 * Phi((a - mu) / sigma))."""
    core = GUESS_RATE + (1.0 - GUESS_RATE) * normal_cdf((np.asarray(a, dtype=float) - mu) / sigma)
    return lapse * 0.5 + (1.0 - lapse) * core


@dataclass(frozen=True, eq=False)
class ResponseTable:
    levels: np.ndarray
    n_trials: np.ndarray
    n_correct: np.ndarray
    condition: str = ""
    participant: str = ""

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        n = np.asarray(self.n_trials, dtype=np.int64)
        k = np.asarray(self.n_correct, dtype=np.int64)
        if not lv.shape == n.shape == k.shape or lv.ndim != 1:
            raise ValueError("levels, n_trials and n_correct must be equal-length 1-D arrays")
        if np.any(k < 0) or np.any(k > n):
            raise ValueError("need 0 <= n_correct <= n_trials")
        if len(np.unique(lv)) != len(lv):
            raise ValueError("stimulus levels must be distinct")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "n_trials", n)
        object.__setattr__(self, "n_correct", k)

    @property
    def proportions(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.n_correct / self.n_trials

    def rows(self):
        return list(zip(self.levels.tolist(), self.n_trials.tolist(), self.n_correct.tolist()))


@dataclass(frozen=True)
class PsychometricFit:
    mu: float
    sigma: float
    log_likelihood: float
    converged: bool
    n_points: int
    condition: str = ""
    participant: str = ""
    reason: str = ""

    def to_dict(self) -> dict:
        return {"participant": self.participant, "condition": self.condition, "mu": self.mu,
                "sigma": self.sigma, "log_likelihood": self.log_likelihood,
                "converged": self.converged, "n_points": self.n_points, "reason": self.reason}

    @classmethod
    def from_dict(cls, d: dict) -> "PsychometricFit":
        return cls(float(d["mu"]), float(d["sigma"]), float(d["log_likelihood"]),
                   bool(d["converged"]), int(d["n_points"]), d.get("condition", ""),
                   str(d.get("participant", "")), d.get("reason", ""))


def _nll(mu, sigma, levels, n, k):
    psi = psychometric(levels, mu, sigma)
    psi = np.clip(psi, PSI_CLAMP, 1.0 - PSI_CLAMP)
    return -float(np.sum(k * np.log(psi) + (n - k) * np.log1p(-psi)))


def nll(mu: float, sigma: float, table: ResponseTable) -> float:
    """Binomial negative log-likelihood (without the constant binomial coefficient)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return _nll(mu, sigma, table.levels, table.n_trials, table.n_correct)


def fit(table: ResponseTable, sigma_bounds=SIGMA_BOUNDS, mu_bounds=MU_BOUNDS,
        xtol: float = 1e-6) -> PsychometricFit:
    """Two-parameter maximum-likelihood fit.

    Works on the stimulus axis rescaled to [0, 1] over the tested range, so
    results transform exactly with affine relabelling of the stimulus. A
    coarse grid (mu across the range, sigma from 1/20 to 1 range) seeds a
    Nelder-Mead refinement in (mu, log sigma) inside the given bounds. The fit
    is flagged unconverged if the optimiser stalls, if it ends on the sigma
    upper bound or on a mu bound, or if no level rises above chance
    (every proportion <= 0.55).
    """
    used = table.n_trials > 0
    levels = table.levels[used]
    n = table.n_trials[used].astype(float)
    k = table.n_correct[used].astype(float)
    if len(levels) < 3:
        raise FitError("fitting needs at least 3 distinct stimulus levels with trials")
    lo, span = float(levels.min()), float(levels.max() - levels.min())
    x = (levels - lo) / span
    s_lo, s_hi = (float(b) for b in sigma_bounds)
    m_lo, m_hi = (float(b) for b in mu_bounds)

    mus = np.linspace(0.0, 1.0, 21)
    sigmas = np.geomspace(1.0 / 20.0, 1.0, 15)
    M, S = np.meshgrid(mus, sigmas, indexing="ij")
    psi = np.clip(psychometric(x[None, None, :], M[..., None], S[..., None]),
                  PSI_CLAMP, 1.0 - PSI_CLAMP)
    grid = -np.sum(k * np.log(psi) + (n - k) * np.log1p(-psi), axis=-1)
    i, j = np.unravel_index(int(np.argmin(grid)), grid.shape)

    def objective(theta):
        return _nll(theta[0], math.exp(theta[1]), x, n, k)

    start = np.array([mus[i], math.log(sigmas[j])])
    res = scipy.optimize.minimize(
        objective, start, method="Nelder-Mead",
        bounds=[(m_lo, m_hi), (math.log(s_lo), math.log(s_hi))],
        options={"xatol": xtol * 1e-2, "fatol": 1e-12, "maxiter": 4000,
                 "initial_simplex": [start, start + [0.05, 0.0], start + [0.0, 0.2]]})
    mu_n, sigma_n = float(res.x[0]), math.exp(float(res.x[1]))

    reasons = []
    if not res.success:
        reasons.append("optimiser stalled")
    if sigma_n >= s_hi * (1.0 - 1e-6):
        reasons.append("sigma at upper bound")
    if mu_n <= m_lo + 1e-6 or mu_n >= m_hi - 1e-6:
        reasons.append("mu at search bound")
    if np.all(k / n <= CHANCE_CEILING):
        reasons.append("all proportions at chance")

    mu, sigma = lo + span * mu_n, span * sigma_n
    return PsychometricFit(mu, sigma, -_nll(mu, sigma, levels, n, k), not reasons,
                           len(levels), table.condition, table.participant, "; ".join(reasons))


def threshold(fit_result: PsychometricFit, p: float = 0.75) -> float:
    """Stimulus level at which the fitted function reaches proportion correct p."""
    if not MIN_THRESHOLD_P <= p < 1.0:
        raise ValueError(f"threshold needs {MIN_THRESHOLD_P} <= p < 1, got {p}")
    if not fit_result.converged:
        raise FitError(f"no threshold for an unconverged fit ({fit_result.reason})")
    return fit_result.mu + fit_result.sigma * normal_quantile(2.0 * p - 1.0)


def exclude_unfittable(fits) -> tuple[list[str], list[str]]:
    """Split participants into (included, excluded); any unconverged condition excludes.

    `fits` is an iterable of PsychometricFit carrying participant ids.
    """
    status: dict[str, bool] = {}
    for f in fits:
        status[f.participant] = status.get(f.participant, True) and f.converged
    included = sorted((p for p, ok in status.items() if ok), key=_id_key)
    excluded = sorted((p for p, ok in status.items() if not ok), key=_id_key)
    return included, excluded


def _id_key(pid: str):
    return (0, int(pid), "") if str(pid).isdigit() else (1, 0, str(pid))


# -- Student t distribution --------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_beta(x: float, a: float, b: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) of Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * regularized_beta(df / (df + t * t), 0.5 * df, 0.5)
    return tail if t >= 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    mean_difference: float
    tail: str = "greater"


def paired_t_test(slow, fast, tail: str = "greater") -> TTestResult:
    """Paired t-test on d = fast - slow; `greater` tests mean(d) > 0."""
    slow = np.asarray(slow, dtype=float)
    fast = np.asarray(fast, dtype=float)
    if slow.shape != fast.shape or slow.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    if len(slow) < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = fast - slow
    n = len(d)
    sd = float(np.std(d, ddof=1))
    if not sd > 0:
        raise ValueError("differences have zero variance; t is undefined")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    df = n - 1
    if tail == "greater":
        p = t_sf(t, df)
    elif tail == "less":
        p = t_sf(-t, df)
    elif tail == "two-sided":
        p = min(1.0, 2.0 * t_sf(abs(t), df))
    else:
        raise ValueError(f"unknown tail {tail!r}")
    return TTestResult(t, df, p, float(np.mean(d)), tail)


@dataclass(frozen=True)
class CohortStats:
    thresholds: dict[str, list[float]]
    means: dict[str, float]
    sds: dict[str, float]
    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    n_included: int
    included_ids: list[str] = field(default_factory=list)
    excluded_ids: list[str] = field(default_factory=list)
    threshold_p: float = 0.75

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds, "mean": self.means, "sd": self.sds,
            "t_statistic": self.t_statistic, "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value, "tail": "greater", "n_included": self.n_included,
            "included_ids": self.included_ids, "excluded_ids": self.excluded_ids,
            "threshold_p": self.threshold_p,
        }


def cohort_stats(fits, slow: str = "slow", fast: str = "fast", p: float = 0.75) -> CohortStats:
    """Exclude unfittable participants, then compare thresholds (fast > slow, one-tailed)."""
    fits = list(fits)
    included, excluded = exclude_unfittable(fits)
    by_key = {(f.participant, f.condition): f for f in fits}
    thresholds = {c: [threshold(by_key[(pid, c)], p) for pid in included] for c in (slow, fast)}
    if len(included) < 2:
        raise FitError(f"only {len(included)} participant(s) left after exclusion")
    res = paired_t_test(thresholds[slow], thresholds[fast], "greater")
    return CohortStats(
        thresholds,
        {c: float(np.mean(v)) for c, v in thresholds.items()},
        {c: float(np.std(v, ddof=1)) for c, v in thresholds.items()},
        res.t, res.df, res.p, len(included), included, excluded, p)
