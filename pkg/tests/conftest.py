import pytest

from hotspot import CoefficientField, ModelParams, isotropic_params


@pytest.fixture
def sym_params():
    """L=1, A0=1, A_bar=2, D_hat=1 at eps=0.05 on the default resolving grid."""
    return isotropic_params(L=1.0, epsilon=0.05, D_hat=1.0, A0=1.0, A_bar=2.0)


@pytest.fixture
def asym_params():
    """L=1, A0=1, A_bar=5, D_hat=0.1: inside the asymmetric two-spike regime."""
    return isotropic_params(L=1.0, epsilon=0.05, D_hat=0.1, A0=1.0, A_bar=5.0)


@pytest.fixture
def aniso_params():
    """gamma(x) = 2 + x with constant A0 = 1."""
    p = ModelParams(
        L=1.0,
        epsilon=0.05,
        D_hat=1.0,
        A0=CoefficientField.constant(1.0),
        gamma=CoefficientField.affine(2.0, 1.0),
        grid_n=16,
    )
    return p.with_resolution()
