"""Cross-checks of the GLM fits against an independent library."""

import math

import numpy as np
import pytest

from conftest import design_from_xy
from crashcount.glm import fit_negbin, fit_poisson

sm = pytest.importorskip("statsmodels.api")


def _dataset(seed=42, n=2000, alpha=0.6):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.uniform(-1, 1, n), rng.integers(0, 2, n).astype(float)])
    mu = np.exp(math.log(4.0) + 0.4 * x[:, 1] - 0.25 * x[:, 2])
    lam = rng.gamma(shape=1.0 / alpha, scale=alpha * mu)
    return x, rng.poisson(lam)


def test_poisson_matches_statsmodels():
    x, y = _dataset()
    ours = fit_poisson(design_from_xy(x, y))
    theirs = sm.GLM(y, x, family=sm.families.Poisson()).fit()
    np.testing.assert_allclose(ours.beta, theirs.params, atol=1e-6)
    np.testing.assert_allclose(
        np.sqrt(np.diag(ours.cov_beta)), theirs.bse, rtol=1e-4
    )
    assert ours.log_likelihood == pytest.approx(theirs.llf, abs=1e-4)


def test_negbin_matches_statsmodels():
    from statsmodels.discrete.discrete_model import NegativeBinomial

    x, y = _dataset()
    ours = fit_negbin(design_from_xy(x, y))
    theirs = NegativeBinomial(y, x).fit(disp=0, maxiter=200)
    np.testing.assert_allclose(ours.beta, theirs.params[:-1], atol=5e-4)
    assert ours.alpha == pytest.approx(theirs.params[-1], rel=5e-3)
    assert ours.log_likelihood >= theirs.llf - 1e-3
