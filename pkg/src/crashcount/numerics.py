"""Self-contained special functions and the weighted least-squares core.

Everything the estimators need beyond basic array arithmetic lives here:
log-gamma (Lanczos), the standard normal CDF (rational approximation), and
the symmetric normal-equation solver used by every IRLS step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# Lanczos approximation, g = 7, 9 coefficients.
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_HALF_LN_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0.

    Relative accuracy is well inside 1e-10 across [1e-3, 1e6].
    """
    x = float(x)
    if not x > 0.0:
        raise NumericError(f"ln_gamma requires x > 0, got {x!r}")
    if x < 0.5:
        # reflection: ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x)
        return math.log(math.pi / math.sin(math.pi * x)) - ln_gamma(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS_C[0]
    for k in range(1, 9):
        acc += _LANCZOS_C[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LN_TWO_PI + (z + 0.5) * math.log(t) - t + math.log(acc)


def ln_factorial(n: int) -> float:
    """ln(n!) via ln_gamma(n + 1)."""
    return ln_gamma(float(n) + 1.0)


def normal_cdf(z: float) -> float:
    """Standard normal CDF via Hart's rational approximation (double precision).

    Absolute error is around 1e-15, far inside the 1e-7 contract.
    """
    z = float(z)
    if math.isnan(z):
        return math.nan
    a = abs(z)
    if a > 37.0:
        p = 0.0
    else:
        e = math.exp(-0.5 * a * a)
        if a < 7.071067811865475:
            num = 3.52624965998911e-2 * a + 0.700383064443688
            num = num * a + 6.37396220353165
            num = num * a + 33.912866078383
            num = num * a + 112.079291497871
            num = num * a + 221.213596169931
            num = num * a + 220.206867912376
            den = 8.83883476483184e-2 * a + 1.75566716318264
            den = den * a + 16.064177579207
            den = den * a + 86.7807322029461
            den = den * a + 296.564248779674
            den = den * a + 637.333633378831
            den = den * a + 793.826512519948
            den = den * a + 440.413735824752
            p = e * num / den
        else:
            b = a + 0.65
            b = a + 4.0 / b
            b = a + 3.0 / b
            b = a + 2.0 / b
            b = a + 1.0 / b
            p = e / (b * 2.506628274631000502)
    return 1.0 - p if z > 0.0 else p


@dataclass(frozen=True)
class SymmetricSolveResult:
    solution: np.ndarray
    jitter_applied: float
    condition_flag: bool


# escalation schedule for the strict path, relative to max |diag|
_JITTER_LEVELS = (1e-10, 1e-8, 1e-6)
_MIN_NORM_RTOL = 1e-8


def _dependent_columns(a: np.ndarray) -> list[int]:
    """Indices of columns implicated in the smallest eigenvector of A."""
    vals, vecs = np.linalg.eigh(a)
    v = np.abs(vecs[:, 0])
    return [int(i) for i in np.nonzero(v >= 0.1 * v.max())[0]]


def solve_weighted_ls(
    x: np.ndarray,
    w: np.ndarray,
    z: np.ndarray,
    mode: str = "strict",
) -> SymmetricSolveResult:
    """Solve the weighted normal equations (X'WX) b = X'Wz.

    strict: Cholesky with escalating diagonal jitter on failure (flagged).
    min_norm: eigendecomposition pseudo-solve returning the minimum-norm
    solution, for rank-deficient designs (full-dummy coding).
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.ndim != 2:
        raise NumericError("design must be a 2-d array")
    xw = x * w[:, None]
    a = xw.T @ x
    b = xw.T @ z

    if mode == "min_norm":
        vals, vecs = np.linalg.eigh(a)
        cutoff = _MIN_NORM_RTOL * max(float(np.abs(np.diag(a)).max()), 1e-300)
        keep = vals > cutoff
        inv = np.zeros_like(vals)
        inv[keep] = 1.0 / vals[keep]
        sol = vecs @ (inv * (vecs.T @ b))
        return SymmetricSolveResult(sol, 0.0, bool((~keep).any()))

    if mode != "strict":
        raise NumericError(f"unknown solve mode {mode!r}")

    scale = max(float(np.abs(np.diag(a)).max()), 1.0)
    eye = np.eye(a.shape[0])
    first_failure = True
    for attempt, level in enumerate((0.0,) + _JITTER_LEVELS):
        jitter = level * scale
        try:
            chol = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            if first_failure:
                first_failure = False
                # jitter is for borderline conditioning; a structurally
                # rank-deficient system must error, not become a ridge
                vals = np.linalg.eigvalsh(a)
                if vals[0] <= 1e-12 * max(float(vals[-1]), 1e-300):
                    raise NumericError(
                        "normal equations are rank deficient; "
                        f"dependent columns {_dependent_columns(a)}"
                    )
            continue
        y = np.linalg.solve(chol, b)
        sol = np.linalg.solve(chol.T, y)
        if not np.isfinite(sol).all():
            continue
        return SymmetricSolveResult(sol, jitter, attempt > 0)
    cols = _dependent_columns(a)
    raise NumericError(
        f"normal equations singular beyond jitter; dependent columns {cols}"
    )
