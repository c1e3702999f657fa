import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmastab.fitting import FitError, fit_power_law


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 1e3), st.floats(0.5, 6))
def test_exact_power_law_recovered(slope, scale, decades):
    x = np.geomspace(1.0, 10.0**decades, 6)
    f = fit_power_law(x, scale * x**slope)
    assert f.slope == pytest.approx(slope, abs=1e-9)
    assert np.exp(f.intercept) == pytest.approx(scale, rel=1e-8)
    assert f.decades == pytest.approx(decades, rel=1e-12)


def test_residual_reports_worst_point():
    x = np.geomspace(1e-3, 1, 5)
    y = x**0.5
    y[2] *= np.e**0.1
    f = fit_power_law(x, y)
    assert 0.05 < f.residual <= 0.1
    d = f.as_dict()
    assert d["n_samples"] == 5 and d["residual"] == f.residual


def test_fit_errors():
    x = np.geomspace(1e-3, 1, 5)
    with pytest.raises(FitError):
        fit_power_law(x[:3], x[:3])
    with pytest.raises(FitError):
        fit_power_law(x, -x)
    with pytest.raises(FitError):
        fit_power_law(x, x[:4])
    with pytest.raises(FitError):
        fit_power_law(np.ones(5), x)
    with pytest.raises(FitError, match="decades"):
        fit_power_law(x, x, min_decades=4)
