import numpy as np
import pytest

from qbcf.datasets import MnpDataset
from qbcf.rng import RandomStream
from qbcf.stats import cholesky


def synth_mnp(seed, n, coef=(1.0, 0.6), sigma=None, J=2):
    """Draw an MNP dataset straight from the latent-utility model.

    Covariate rows are standard normal; latents are W_ij' coef + correlated
    normal errors; the choice is the argmax against the zero baseline.
    Returns (dataset, coef, sigma).
    """
    coef = np.asarray(coef, dtype=float)
    sigma = np.eye(J) if sigma is None else np.asarray(sigma, dtype=float)
    gen = RandomStream(seed).gen
    W = gen.standard_normal((n, J, coef.size))
    eps = gen.standard_normal((n, J)) @ cholesky(sigma).T
    U = W @ coef + eps
    best = U.max(axis=1)
    choices = np.where(best <= 0.0, 0, U.argmax(axis=1) + 1)
    return MnpDataset(choices, W), coef, sigma


@pytest.fixture
def mnp_fixture():
    return synth_mnp
