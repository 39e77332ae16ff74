import math

import numpy as np
import pytest

from modelcritic.dsl import parse_spec
from modelcritic.errors import FamilyError
from modelcritic.families import (
    FAMILY_IDS,
    GAUSSIAN,
    GLM,
    LINREG,
    LOGISTIC,
    NEGBIN,
    POISSON,
    STUDENT_T,
    ModelFamily,
    generator_moments,
    posterior_predictive,
    sample_data,
)
from modelcritic.statistic import evaluate


def test_reproducible():
    a = sample_data(ModelFamily(GAUSSIAN), 4, 11).y
    b = sample_data(ModelFamily(GAUSSIAN), 4, 11).y
    np.testing.assert_array_equal(a, b)
    assert a.shape == (4,)


def test_invalid_hyperparameters():
    with pytest.raises(FamilyError):
        ModelFamily(STUDENT_T, {"df": 2})
    with pytest.raises(FamilyError):
        ModelFamily(NEGBIN, {"p": 1.5})
    with pytest.raises(FamilyError):
        sample_data(ModelFamily(GAUSSIAN), 1, 0)


def _within_3se(sample, mean, var):
    n = len(sample)
    assert abs(sample.mean() - mean) <= 3 * math.sqrt(var / n)
    # standard error of the sample variance from the sample's fourth moment
    c = sample - sample.mean()
    se_var = math.sqrt(max(np.mean(c ** 4) - np.mean(c ** 2) ** 2, 0.0) / n)
    assert abs(np.mean(c ** 2) - var) <= 3 * se_var + 1e-12


@pytest.mark.parametrize("fid", [GAUSSIAN, POISSON, NEGBIN])
def test_moment_fidelity(fid):
    f = ModelFamily(fid)
    mean, var = generator_moments(f)
    _within_3se(sample_data(f, 100_000, 5).y, mean, var)


@pytest.mark.parametrize("fid", [GLM, LOGISTIC, LINREG])
def test_conditional_moment_fidelity(fid):
    f = ModelFamily(fid)
    hp = f.hyperparameters
    d = sample_data(f, 100_000, 5)
    if fid == GLM:
        x = d["x"].values
        mu = np.exp(hp["a"] + hp["b"] * x)
        z = (d.y - mu) / np.sqrt(mu)
    elif fid == LOGISTIC:
        x = d["x"].values
        mu = hp["K"] / (1 + np.exp(-hp["r"] * (x - hp["x0"])))
        z = (d.y - mu) / hp["sigma"]
    else:
        mu = hp["intercept"] + hp["coef"][0] * d["x"].values
        z = (d.y - mu) / hp["sigma"]
    _within_3se(z, 0.0, 1.0)


def test_student_t_kurtosis_large():
    y = sample_data(ModelFamily(STUDENT_T), 100_000, 1)
    assert evaluate(parse_spec("excess_kurtosis()"), y) > 1


def test_negbin_overdispersed():
    d = sample_data(ModelFamily(NEGBIN), 100_000, 2)
    ratio = evaluate(parse_spec("dispersion_ratio()"), d)
    assert ratio > 1.5
    # numpy convention: mean r(1-p)/p, variance r(1-p)/p^2, ratio 1/p
    assert ratio == pytest.approx(1 / 0.3, rel=0.05)


@pytest.mark.parametrize("fid", FAMILY_IDS)
def test_posterior_predictive_shape_and_determinism(fid):
    f = ModelFamily(fid)
    d = sample_data(f, 60, 3)
    a = posterior_predictive(f, d, 20, 9)
    b = posterior_predictive(f, d, 20, 9)
    assert a.replicates.shape == (20, 60)
    assert np.all(np.isfinite(a.replicates))
    np.testing.assert_array_equal(a.replicates, b.replicates)
    assert a.model_id == fid


def test_record_round_trip():
    f = ModelFamily(LINREG, {"features": ("uppm", "floor"), "coef": (0.0, 0.0)})
    assert ModelFamily.from_record(f.to_record()) == f
