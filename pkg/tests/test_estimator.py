import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from laplace_asymptotics import LaplaceExpansion, PolynomialFunctional
from laplace_asymptotics.estimator import check_n, check_support


def test_fit_curie_weiss():
    est = LaplaceExpansion(phi={2: np.array([[0.25]])}, series_order=1).fit([[-1.0], [1.0]])
    assert est.c0_ == pytest.approx(np.sqrt(2))
    assert est.c2_ == pytest.approx(-0.3535534, abs=1e-7)
    assert est.series_.coefficients[2] == pytest.approx(est.c2_, abs=1e-12)
    np.testing.assert_allclose(est.predict([100, 1000]), np.sqrt(2) + est.c2_ / np.array([100, 1000]))


def test_sample_weight_and_functional_object():
    phi = PolynomialFunctional.from_tensors(1, {2: np.array([[0.15]]), 3: np.array([[[0.02]]])})
    est = LaplaceExpansion(phi=phi).fit([[-1.0], [0.0], [2.0]], sample_weight=[5, 3, 2])
    assert est.c2_ == pytest.approx(0.261588856411261, rel=1e-10)
    assert est.predict_log_Zn(10) == pytest.approx(10 * est.lambda_ + np.log(est.c0_ + est.c2_ / 10))


def test_params_and_clone():
    est = LaplaceExpansion(crit_tol=1e-5, multistart=3)
    params = est.get_params()
    assert params["crit_tol"] == 1e-5 and params["multistart"] == 3
    assert clone(est).get_params()["multistart"] == 3
    est.set_params(random_state=7)
    assert est.random_state == 7


def test_not_fitted():
    with pytest.raises(NotFittedError):
        LaplaceExpansion().predict(10)


def test_validation_helpers():
    X, w = check_support([[0.0], [1.0]], [1, 3])
    np.testing.assert_allclose(w, [0.25, 0.75])
    with pytest.raises(ValueError):
        check_support([[0.0], [1.0]], [1, -1])
    with pytest.raises(ValueError):
        check_support([[np.nan], [1.0]])
    with pytest.raises(ValueError):
        check_n([0, 10])
    with pytest.raises(ValueError):
        LaplaceExpansion(phi={2: np.eye(2)}).fit([[0.0], [1.0]])
