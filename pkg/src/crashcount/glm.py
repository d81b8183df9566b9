"""Maximum-likelihood Poisson and NB2 regression with a log link.

Poisson is fitted by IRLS (working response z = eta + (y - mu)/mu, weights
mu). NB2 (variance mu + alpha*mu^2) alternates IRLS for beta (weights
mu/(1 + alpha*mu)) with a safeguarded Newton step for alpha on the log
scale, until the joint log-likelihood stabilizes.

Because responses are integer counts, the awkward gamma-function pieces of
the NB2 likelihood reduce to exact partial sums:

    lnGamma(y + r) - lnGamma(r) = sum_{k<y} ln(r + k)
    psi(y + r) - psi(r)         = sum_{k<y} 1 / (r + k)      (r = 1/alpha)

which stay stable all the way down to the alpha = 1e-8 boundary.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DataError, NumericError
from .features import FULL_DUMMY, DesignMatrix, FeatureSchema
from .numerics import normal_cdf, solve_weighted_ls

FAMILY_POISSON = "poisson"
FAMILY_NEGBIN2 = "negbin2"

_ALPHA_LO = 1e-8
_ALPHA_HI = 1e4
_ETA_CAP = 30.0


@dataclass(frozen=True)
class FitOptions:
    tol_beta: float = 1e-8
    tol_ll_rel: float = 1e-10
    max_iter: int = 100
    tol_joint: float = 1e-9
    outer_max: int = 100


@dataclass
class FittedGlm:
    family: str
    schema: FeatureSchema
    column_names: tuple[str, ...]
    beta: np.ndarray
    alpha: float
    cov_beta: np.ndarray
    log_likelihood: float
    n_obs: int
    converged: bool
    iterations: int
    identifiable: bool = True
    alpha_pinned: bool = False
    data_fingerprint: str = ""

    @property
    def p(self) -> int:
        return int(self.beta.shape[0])


@dataclass(frozen=True)
class DispersionReport:
    pearson_ratio: float
    ct_coefficient: float
    ct_p_value: float
    overdispersed: bool


@dataclass(frozen=True)
class WaldStat:
    name: str
    std_err: float
    z: float
    p_value: float
    degenerate: bool = False


def _design_fingerprint(design: DesignMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(design.x).tobytes())
    h.update(np.ascontiguousarray(design.y).tobytes())
    h.update("|".join(design.column_names).encode())
    return h.hexdigest()


def _partial_log_sums(ymax: int, r: float) -> np.ndarray:
    """L[k] = sum_{j<k} ln(r + j) for k = 0..ymax."""
    out = np.zeros(ymax + 1)
    if ymax > 0:
        out[1:] = np.cumsum(np.log(r + np.arange(ymax, dtype=float)))
    return out


def _partial_recip_sums(ymax: int, r: float) -> np.ndarray:
    """H[k] = sum_{j<k} 1 / (r + j) for k = 0..ymax."""
    out = np.zeros(ymax + 1)
    if ymax > 0:
        out[1:] = np.cumsum(1.0 / (r + np.arange(ymax, dtype=float)))
    return out


def _check_counts(y: np.ndarray) -> np.ndarray:
    if (y < 0).any():
        raise DataError("response must be non-negative counts")
    if not np.array_equal(y, np.round(y)):
        raise DataError("response must be integer counts")
    return y.astype(np.int64)


def _ln_factorials(y: np.ndarray) -> np.ndarray:
    table = _partial_log_sums(int(y.max()) if y.size else 0, 1.0)
    return table[y]


def poisson_log_likelihood(beta: np.ndarray, design: DesignMatrix) -> float:
    y = _check_counts(design.y)
    eta = design.x @ beta
    if not np.isfinite(eta).all() or (eta > 700).any():
        return -math.inf
    mu = np.exp(eta)
    return float(np.sum(y * eta - mu - _ln_factorials(y)))


def nb_log_likelihood(beta: np.ndarray, alpha: float, design: DesignMatrix) -> float:
    """Exact NB2 log-likelihood; -inf sentinel on non-finite means."""
    if not alpha > 0:
        raise DataError(f"alpha must be positive, got {alpha}")
    y = _check_counts(design.y)
    eta = design.x @ beta
    if not np.isfinite(eta).all() or (eta > 700).any():
        return -math.inf
    mu = np.exp(eta)
    return _nb_ll_arrays(y, eta, mu, alpha, _ln_factorials(y))


def _nb_ll_arrays(
    y: np.ndarray, eta: np.ndarray, mu: np.ndarray, alpha: float, lnfact: np.ndarray
) -> float:
    # r*(ln r - ln(r+mu)) is written as -r*log1p(mu/r): the direct form
    # cancels catastrophically for r ~ 1e8 (the alpha lower bound)
    r = 1.0 / alpha
    rising = _partial_log_sums(int(y.max()) if y.size else 0, r)[y]
    log_rpm = np.log(r + mu)
    ll = rising - lnfact + y * (eta - log_rpm) - r * np.log1p(mu / r)
    return float(ll.sum())


def _nb_alpha_score_arrays(y: np.ndarray, mu: np.ndarray, alpha: float) -> float:
    """Analytic d ll / d alpha at fixed mu."""
    r = 1.0 / alpha
    harmonic = _partial_recip_sums(int(y.max()) if y.size else 0, r)[y]
    # ln r + 1 - ln(r+mu) - (r+y)/(r+mu) == -log1p(mu/r) + (mu-y)/(r+mu),
    # which avoids O(1) cancellation near the alpha lower bound
    dldr = harmonic - np.log1p(mu / r) + (mu - y) / (r + mu)
    return float(-(r * r) * dldr.sum())


def nb_alpha_score(beta: np.ndarray, alpha: float, design: DesignMatrix) -> float:
    """Analytic partial derivative of the NB2 log-likelihood in alpha."""
    if not alpha > 0:
        raise DataError(f"alpha must be positive, got {alpha}")
    y = _check_counts(design.y)
    eta = design.x @ beta
    if not np.isfinite(eta).all() or (eta > 700).any():
        raise NumericError("alpha score undefined: non-finite mean predictions")
    return _nb_alpha_score_arrays(y, np.exp(eta), alpha)


def _solve_mode(schema: FeatureSchema) -> str:
    return "min_norm" if schema.coding == FULL_DUMMY else "strict"


def _irls(
    x: np.ndarray,
    y: np.ndarray,
    weight_of_mu: Callable[[np.ndarray], np.ndarray],
    ll_of_beta: Callable[[np.ndarray], float],
    mode: str,
    options: FitOptions,
    init_beta: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, int, bool]:
    """Shared IRLS loop. Returns (beta, iterations, converged)."""
    if init_beta is None:
        mu = y + 0.5
        eta = np.log(mu)
    else:
        eta = np.clip(x @ init_beta, -_ETA_CAP, _ETA_CAP)
        mu = np.exp(eta)
    beta = init_beta
    ll_prev = ll_of_beta(beta) if beta is not None else -math.inf
    for it in range(1, options.max_iter + 1):
        w = weight_of_mu(mu)
        z = eta + (y - mu) / mu
        res = solve_weighted_ls(x, w, z, mode=mode)
        new_beta = res.solution
        delta = math.inf if beta is None else float(np.abs(new_beta - beta).max())
        beta = new_beta
        eta = np.clip(x @ beta, -_ETA_CAP, _ETA_CAP)
        mu = np.exp(eta)
        ll = ll_of_beta(beta)
        if delta <= options.tol_beta or abs(ll - ll_prev) <= options.tol_ll_rel * (1.0 + abs(ll)):
            # one polishing step so the returned iterate sits at the optimum,
            # not one Newton step behind the stopping test
            w = weight_of_mu(mu)
            z = eta + (y - mu) / mu
            beta = solve_weighted_ls(x, w, z, mode=mode).solution
            return beta, it, True
        ll_prev = ll
    return beta, options.max_iter, False


def _covariance(x: np.ndarray, w: np.ndarray, mode: str) -> tuple[np.ndarray, bool]:
    a = (x * w[:, None]).T @ x
    if mode == "strict":
        try:
            cov = np.linalg.inv(a)
        except np.linalg.LinAlgError:
            from .numerics import _dependent_columns

            raise NumericError(
                "information matrix singular (a level may never occur in the data); "
                f"dependent columns {_dependent_columns(a)}"
            )
        identifiable = True
    else:
        vals, vecs = np.linalg.eigh(a)
        cutoff = 1e-8 * max(float(np.abs(np.diag(a)).max()), 1e-300)
        keep = vals > cutoff
        inv = np.zeros_like(vals)
        inv[keep] = 1.0 / vals[keep]
        cov = (vecs * inv) @ vecs.T
        identifiable = bool(keep.all())
    cov = 0.5 * (cov + cov.T)
    return cov, identifiable


def fit_poisson(design: DesignMatrix, options: Optional[FitOptions] = None) -> FittedGlm:
    """IRLS maximum-likelihood Poisson regression."""
    opts = options or FitOptions()
    y = _check_counts(design.y)
    if y.sum() == 0:
        raise DataError("all-zero response: log-link Poisson fit is degenerate")
    mode = _solve_mode(design.schema)
    if mode == "strict" and design.n <= design.p:
        raise DataError(f"need n > p for identifiable fit (n={design.n}, p={design.p})")
    lnfact = _ln_factorials(y)

    def ll_of(beta: Optional[np.ndarray]) -> float:
        if beta is None:
            return -math.inf
        eta = np.clip(design.x @ beta, -_ETA_CAP, _ETA_CAP)
        return float(np.sum(y * eta - np.exp(eta) - lnfact))

    beta, iters, converged = _irls(
        design.x, y.astype(float), lambda mu: mu, ll_of, mode, opts
    )
    if not converged:
        raise NumericError(
            f"Poisson IRLS did not converge in {opts.max_iter} iterations; "
            f"last beta={np.array2string(beta, precision=6)}"
        )
    mu = np.exp(np.clip(design.x @ beta, -_ETA_CAP, _ETA_CAP))
    cov, identifiable = _covariance(design.x, mu, mode)
    return FittedGlm(
        family=FAMILY_POISSON,
        schema=design.schema,
        column_names=design.column_names,
        beta=beta,
        alpha=0.0,
        cov_beta=cov,
        log_likelihood=ll_of(beta),
        n_obs=design.n,
        converged=True,
        iterations=iters,
        identifiable=identifiable,
        data_fingerprint=_design_fingerprint(design),
    )


def moment_alpha(y: np.ndarray) -> float:
    """Method-of-moments NB2 dispersion start value, floored at 1e-6."""
    y = np.asarray(y, dtype=float)
    ybar = float(y.mean())
    s2 = float(y.var(ddof=1)) if y.size > 1 else 0.0
    return max(1e-6, (s2 - ybar) / (ybar * ybar))


def _optimize_alpha(
    y: np.ndarray, mu: np.ndarray, alpha_start: float
) -> tuple[float, bool]:
    """Safeguarded Newton on theta = ln(alpha) for the profile likelihood."""
    lo, hi = math.log(_ALPHA_LO), math.log(_ALPHA_HI)
    n = y.size

    def g(theta: float) -> float:
        a = math.exp(theta)
        return a * _nb_alpha_score_arrays(y, mu, a)

    tol_g = 1e-9 * max(1.0, float(n))
    if g(lo) <= 0.0:
        return _ALPHA_LO, True
    if g(hi) >= 0.0:
        return _ALPHA_HI, True
    a_br, b_br = lo, hi  # g(a_br) > 0 > g(b_br)
    theta = min(max(math.log(alpha_start), lo), hi)
    for _ in range(100):
        gth = g(theta)
        if abs(gth) <= tol_g:
            break
        if gth > 0:
            a_br = theta
        else:
            b_br = theta
        h = 1e-5
        slope = (g(theta + h) - g(theta - h)) / (2.0 * h)
        candidate = theta - gth / slope if slope < 0 else None
        if candidate is None or not (a_br < candidate < b_br):
            candidate = 0.5 * (a_br + b_br)
        if abs(candidate - theta) <= 1e-11:
            theta = candidate
            break
        theta = candidate
    return math.exp(theta), False


def fit_negbin(design: DesignMatrix, options: Optional[FitOptions] = None) -> FittedGlm:
    """NB2 fit: moment-initialized alpha, alternating IRLS and profile Newton."""
    opts = options or FitOptions()
    y = _check_counts(design.y)
    if y.sum() == 0:
        raise DataError("all-zero response: log-link NB fit is degenerate")
    mode = _solve_mode(design.schema)
    if mode == "strict" and design.n <= design.p:
        raise DataError(f"need n > p for identifiable fit (n={design.n}, p={design.p})")
    lnfact = _ln_factorials(y)
    yf = y.astype(float)

    poisson = fit_poisson(design, options)
    beta = poisson.beta
    alpha = min(max(moment_alpha(yf), _ALPHA_LO), _ALPHA_HI)

    def ll_at(b: np.ndarray, a: float) -> float:
        eta = np.clip(design.x @ b, -_ETA_CAP, _ETA_CAP)
        return _nb_ll_arrays(y, eta, np.exp(eta), a, lnfact)

    ll_prev = ll_at(beta, alpha)
    pinned = False
    total_inner = 0
    converged = False
    for _ in range(opts.outer_max):
        weight = lambda mu, a=alpha: mu / (1.0 + a * mu)
        beta, inner_iters, _ = _irls(
            design.x, yf, weight, lambda b, a=alpha: ll_at(b, a), mode, opts, init_beta=beta
        )
        total_inner += inner_iters
        mu = np.exp(np.clip(design.x @ beta, -_ETA_CAP, _ETA_CAP))
        alpha, pinned = _optimize_alpha(y, mu, alpha)
        ll = ll_at(beta, alpha)
        if abs(ll - ll_prev) <= opts.tol_joint * (1.0 + abs(ll)):
            converged = True
            break
        ll_prev = ll
    if not converged:
        raise NumericError(
            f"NB2 alternation did not converge in {opts.outer_max} rounds; "
            f"last ll={ll_prev:.6f}, alpha={alpha:.6g}"
        )
    mu = np.exp(np.clip(design.x @ beta, -_ETA_CAP, _ETA_CAP))
    cov, identifiable = _covariance(design.x, mu / (1.0 + alpha * mu), mode)
    return FittedGlm(
        family=FAMILY_NEGBIN2,
        schema=design.schema,
        column_names=design.column_names,
        beta=beta,
        alpha=float(alpha),
        cov_beta=cov,
        log_likelihood=ll_at(beta, alpha),
        n_obs=design.n,
        converged=True,
        iterations=total_inner,
        identifiable=identifiable,
        alpha_pinned=pinned,
        data_fingerprint=_design_fingerprint(design),
    )


def dispersion_check(model: FittedGlm, design: DesignMatrix) -> DispersionReport:
    """Pearson ratio plus the Cameron-Trivedi auxiliary regression.

    The auxiliary regression puts ((y - mu)^2 - y) / mu on mu without an
    intercept; a positive, one-sided-significant slope means overdispersion.
    """
    if model.family != FAMILY_POISSON or not model.converged:
        raise DataError("dispersion check requires a converged Poisson fit")
    y = _check_counts(design.y).astype(float)
    n, p = design.n, design.p
    if n <= p:
        raise DataError(f"dispersion check needs n > p (n={n}, p={p})")
    mu = np.exp(np.clip(design.x @ model.beta, -_ETA_CAP, _ETA_CAP))
    pearson = float(np.sum((y - mu) ** 2 / mu))
    ratio = pearson / (n - p)

    g = ((y - mu) ** 2 - y) / mu
    smm = float(np.sum(mu * mu))
    slope = float(np.sum(g * mu)) / smm
    resid = g - slope * mu
    s2 = float(np.sum(resid * resid)) / (n - 1)
    se = math.sqrt(s2 / smm) if s2 > 0 else 0.0
    if se == 0.0:
        t = 0.0 if slope == 0.0 else math.copysign(math.inf, slope)
        p_value = 0.0 if t > 0 else 1.0
    else:
        t = slope / se
        p_value = 1.0 - normal_cdf(t)
    overdispersed = (p_value < 0.05 and slope > 0) or ratio > 1.5
    return DispersionReport(
        pearson_ratio=ratio, ct_coefficient=slope, ct_p_value=p_value,
        overdispersed=overdispersed,
    )


def wald_inference(model: FittedGlm) -> list[WaldStat]:
    """Per-coefficient standard errors, z scores and two-sided p-values."""
    if not model.converged:
        raise DataError("Wald inference requires a converged model")
    out: list[WaldStat] = []
    diag = np.diag(model.cov_beta)
    for name, coef, var in zip(model.column_names, model.beta, diag):
        se = math.sqrt(var) if var > 0 else 0.0
        if se == 0.0:
            out.append(WaldStat(name, 0.0, 0.0 if coef == 0 else math.inf, 0.0, True))
            continue
        z = float(coef) / se
        p = 2.0 * (1.0 - normal_cdf(abs(z)))
        out.append(WaldStat(name, se, z, min(max(p, 0.0), 1.0), False))
    return out


def percent_change(coefficient: float) -> float:
    """Multiplicative effect of the coefficient on the mean, in percent."""
    return 100.0 * (math.exp(coefficient) - 1.0)


def predict_mean(model: FittedGlm, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.p,):
        raise DataError(f"feature vector has shape {x.shape}, expected ({model.p},)")
    return float(np.exp(x @ model.beta))


def predict_mean_matrix(model: FittedGlm, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.p:
        raise DataError(f"design has shape {x.shape}, expected (*, {model.p})")
    return np.exp(x @ model.beta)


def rmse(model: FittedGlm, design: DesignMatrix) -> float:
    """Root mean squared error of the model's mean predictions."""
    if design.n == 0:
        raise DataError("cannot compute RMSE on an empty design")
    mu = predict_mean_matrix(model, design.x)
    resid = design.y.astype(float) - mu
    return float(np.sqrt(np.mean(resid * resid)))
