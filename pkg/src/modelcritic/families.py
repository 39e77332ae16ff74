"""Model families used by the synthetic benchmarks.

Each family can simulate a dataset from fixed generator parameters and draw
posterior-predictive replicates after conditioning on a dataset. Conjugate
families use their exact posteriors; the rest use a plug-in bootstrap: fit by
maximum likelihood on ``m`` resamples of the rows, then simulate one replicate
from each refit.

Datasets produced here use ``y`` for the target and ``x`` for the single
covariate (families without covariates have only ``y``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import optimize, special

from .data import INTEGER, REAL, Column, Dataset, ModelSampleSet
from .errors import FamilyError, FitError

GAUSSIAN = "gaussian_conjugate"
POISSON = "poisson_gamma"
STUDENT_T = "student_t"
NEGBIN = "negative_binomial"
GLM = "glm_log_link"
LOGISTIC = "logistic_growth"
LINREG = "linear_regression_conjugate"

# Generator parameters and priors. The Gaussian location prior is strong on
# purpose (kappa0 pseudo-observations at mu0): with a weak prior the
# posterior-predictive mean is centred on the sample mean and location
# statistics can never reject, see the README section on calibration.
DEFAULTS: dict[str, dict[str, Any]] = {
    GAUSSIAN: {"mu": 0.0, "sigma": 1.0, "mu0": 0.0, "kappa0": 1e4, "a0": 1.0, "b0": 1.0},
    POISSON: {"rate": 2 * 0.7 / 0.3, "a0": 1.0, "b0": 0.1},
    STUDENT_T: {"df": 3.0, "loc": 0.0, "scale": 1.0},
    NEGBIN: {"r": 2.0, "p": 0.3},
    GLM: {"a": 0.5, "b": 0.8, "x_lo": 0.0, "x_hi": 3.0},
    LOGISTIC: {"K": 20.0, "r": 1.5, "x0": 1.5, "sigma": 1.5, "x_lo": 0.0, "x_hi": 3.0},
    LINREG: {
        "features": ("x",),
        "intercept": 1.0,
        "coef": (0.5,),
        "sigma": 0.3,
        "x_lo": 0.0,
        "x_hi": 2.0,
        "v0": 100.0,
        "a0": 1.0,
        "b0": 1.0,
    },
}

FAMILY_IDS = tuple(DEFAULTS)
COVARIATE_FAMILIES = (GLM, LOGISTIC)


def _freeze(v):
    return tuple(v) if isinstance(v, list) else v


@dataclass(frozen=True)
class ModelFamily:
    """A family id plus its hyperparameters (missing keys take defaults)."""

    family_id: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family_id not in DEFAULTS:
            raise FamilyError(f"unknown family {self.family_id!r}; known: {', '.join(FAMILY_IDS)}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.family_id])
        if unknown:
            raise FamilyError(f"{self.family_id}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[self.family_id], **{k: _freeze(v) for k, v in self.hyperparameters.items()}}
        object.__setattr__(self, "hyperparameters", merged)
        _validate(self.family_id, merged)

    def __getitem__(self, key):
        return self.hyperparameters[key]

    def to_record(self) -> dict[str, Any]:
        hp = {k: list(v) if isinstance(v, tuple) else v for k, v in self.hyperparameters.items()}
        return {"family_id": self.family_id, "hyperparameters": hp}

    @classmethod
    def from_record(cls, rec) -> "ModelFamily":
        if isinstance(rec, str):
            return cls(rec)
        return cls(rec["family_id"], dict(rec.get("hyperparameters", {})))


def _validate(fid: str, hp: dict) -> None:
    def positive(*keys):
        for k in keys:
            if not hp[k] > 0:
                raise FamilyError(f"{fid}: {k} must be > 0, got {hp[k]}")

    if fid == GAUSSIAN:
        positive("sigma", "kappa0", "a0", "b0")
    elif fid == POISSON:
        positive("rate", "a0", "b0")
    elif fid == STUDENT_T:
        positive("scale")
        if not hp["df"] > 2:
            raise FamilyError(f"{fid}: df must exceed 2 so the variance exists, got {hp['df']}")
    elif fid == NEGBIN:
        positive("r")
        if not 0 < hp["p"] < 1:
            raise FamilyError(f"{fid}: p must lie in (0, 1), got {hp['p']}")
    elif fid == LOGISTIC:
        positive("K", "r", "sigma")
    elif fid == LINREG:
        positive("sigma", "v0", "a0", "b0")
        if len(hp["features"]) != len(hp["coef"]):
            raise FamilyError(f"{fid}: need one coefficient per feature")
    if fid in COVARIATE_FAMILIES or fid == LINREG:
        if not hp["x_lo"] < hp["x_hi"]:
            raise FamilyError(f"{fid}: x_lo must be below x_hi")


# --- data generation ------------------------------------------------------

def _grid(hp, n):
    return np.linspace(hp["x_lo"], hp["x_hi"], n)


def logistic_curve(x, K, r, x0):
    return K / (1.0 + np.exp(-r * (x - x0)))


def sample_data(f: ModelFamily, n: int, seed, name: str | None = None) -> Dataset:
    """Draw a dataset of ``n`` rows from the family's generator parameters."""
    if n < 2:
        raise FamilyError("n must be at least 2")
    rng = np.random.default_rng(seed)
    hp = f.hyperparameters
    fid = f.family_id
    cols: dict[str, Column] = {}
    if fid == GAUSSIAN:
        y = rng.normal(hp["mu"], hp["sigma"], n)
    elif fid == STUDENT_T:
        y = hp["loc"] + hp["scale"] * rng.standard_t(hp["df"], n)
    elif fid == POISSON:
        y = rng.poisson(hp["rate"], n)
    elif fid == NEGBIN:
        y = rng.negative_binomial(hp["r"], hp["p"], n)
    elif fid == GLM:
        x = _grid(hp, n)
        cols["x"] = Column("x", REAL, x)
        y = rng.poisson(np.exp(hp["a"] + hp["b"] * x))
    elif fid == LOGISTIC:
        x = _grid(hp, n)
        cols["x"] = Column("x", REAL, x)
        y = rng.normal(logistic_curve(x, hp["K"], hp["r"], hp["x0"]), hp["sigma"])
    else:  # LINREG
        X = rng.uniform(hp["x_lo"], hp["x_hi"], (n, len(hp["features"])))
        for j, feat in enumerate(hp["features"]):
            cols[feat] = Column(feat, REAL, X[:, j])
        y = hp["intercept"] + X @ np.asarray(hp["coef"], float) + rng.normal(0, hp["sigma"], n)
    kind = INTEGER if fid in (POISSON, NEGBIN, GLM) else REAL
    cols["y"] = Column("y", kind, y)
    return Dataset(name or f"{fid}_data", cols, "y")


# --- conjugate posteriors -------------------------------------------------

def _nig_replicates(X, y, m0, V0, a0, b0, m, rng) -> np.ndarray:
    """Normal-inverse-gamma regression: posterior-predictive draws at ``X``."""
    V0_inv = np.linalg.inv(V0)
    Vn_inv = V0_inv + X.T @ X
    Vn = np.linalg.inv(Vn_inv)
    bn_vec = Vn @ (V0_inv @ m0 + X.T @ y)
    an = a0 + len(y) / 2.0
    bn = b0 + 0.5 * (y @ y + m0 @ V0_inv @ m0 - bn_vec @ Vn_inv @ bn_vec)
    bn = max(bn, 1e-300)
    sigma2 = bn / rng.gamma(an, 1.0, m)
    L = np.linalg.cholesky(Vn)
    z = rng.standard_normal((m, len(bn_vec)))
    beta = bn_vec + np.sqrt(sigma2)[:, None] * (z @ L.T)
    mean = beta @ X.T
    return mean + np.sqrt(sigma2)[:, None] * rng.standard_normal((m, len(y)))


def _design(d: Dataset, features) -> np.ndarray:
    cols = [np.ones(d.n_rows)]
    for feat in features:
        if feat not in d:
            raise FamilyError(f"dataset lacks required covariate {feat!r}")
        cols.append(d[feat].as_float())
    return np.column_stack(cols)


# --- maximum-likelihood fits (used by the bootstrap) ----------------------

def fit_student_t(y: np.ndarray, start=None):
    """MLE of (loc, scale, df); df bounded to [0.5, 500]."""
    med = float(np.median(y))
    mad = float(np.median(np.abs(y - med))) * 1.4826 or float(np.std(y)) or 1.0
    x0 = np.array(start if start is not None else (med, math.log(mad), math.log(5.0)))

    def nll(theta):
        loc, log_s, log_df = theta
        s, df = math.exp(log_s), math.exp(log_df)
        z = (y - loc) / s
        ll = (special.gammaln((df + 1) / 2) - special.gammaln(df / 2) - 0.5 * math.log(df * math.pi)
              - log_s - (df + 1) / 2 * np.log1p(z * z / df))
        return -float(ll.sum())

    res = optimize.minimize(nll, x0, method="L-BFGS-B",
                            bounds=[(None, None), (math.log(mad) - 10, math.log(mad) + 10),
                                    (math.log(0.5), math.log(500.0))])
    if not np.all(np.isfinite(res.x)):
        raise FitError(STUDENT_T, "non-finite estimate", {"message": res.message})
    loc, log_s, log_df = res.x
    return {"loc": float(loc), "scale": math.exp(log_s), "df": math.exp(log_df)}


def fit_negative_binomial(y: np.ndarray, start=None):
    """MLE of (r, p) by profiling: for fixed r the MLE of p is r / (r + mean)."""
    ybar = float(y.mean())
    if ybar == 0:
        raise FitError(NEGBIN, "all-zero data", {"mean": 0.0})
    lgy1 = special.gammaln(y + 1).sum()

    def nll(log_r):
        r = math.exp(log_r)
        p = r / (r + ybar)
        ll = special.gammaln(y + r).sum() - len(y) * special.gammaln(r) - lgy1
        ll += len(y) * r * math.log(p) + y.sum() * math.log1p(-p)
        return -ll

    res = optimize.minimize_scalar(nll, bounds=(-6.0, 12.0), method="bounded")
    r = math.exp(res.x)
    return {"r": r, "p": r / (r + ybar)}


def fit_poisson_glm(x: np.ndarray, y: np.ndarray, start=None, max_iter: int = 100):
    """Poisson regression with log link by iteratively reweighted least squares."""
    X = np.column_stack([np.ones_like(x), x])
    beta = np.array(start if start is not None else (math.log(max(y.mean(), 1e-3)), 0.0), dtype=float)
    for it in range(max_iter):
        eta = np.clip(X @ beta, -30, 30)
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        W = mu
        XtW = X.T * W
        try:
            new = np.linalg.solve(XtW @ X, XtW @ z)
        except np.linalg.LinAlgError as exc:
            raise FitError(GLM, "singular IRLS system", {"iteration": it}) from exc
        if np.max(np.abs(new - beta)) < 1e-10:
            beta = new
            break
        beta = new
    else:
        raise FitError(GLM, "IRLS did not converge", {"iterations": max_iter, "beta": beta.tolist()})
    return {"a": float(beta[0]), "b": float(beta[1])}


def fit_logistic_growth(x: np.ndarray, y: np.ndarray, start=None):
    """Least-squares (Gaussian MLE) fit of ``K / (1 + exp(-r (x - x0)))``."""
    span = float(x.max() - x.min()) or 1.0
    if start is None:
        K0 = max(float(np.max(y)) * 1.2, 1e-3)
        start = (K0, 4.0 / span, float(np.median(x)))
    # bounded so exponential-looking data converges to a boundary solution
    # instead of drifting K, x0 -> infinity
    lo = [1e-6, 1e-4, float(x.min()) - 2 * span]
    hi = [10 * max(float(np.max(np.abs(y))), 1e-3), 100.0 / span, float(x.max()) + 2 * span]
    start = np.clip(start, np.array(lo) + 1e-9, np.array(hi) - 1e-9)

    def resid(theta):
        return logistic_curve(x, *theta) - y

    res = optimize.least_squares(resid, start, bounds=(lo, hi), method="trf", x_scale="jac")
    if not res.success or not np.all(np.isfinite(res.x)):
        raise FitError(LOGISTIC, "least squares failed", {"status": int(res.status), "message": res.message})
    K, r, x0 = res.x
    sigma = math.sqrt(max(float(np.mean(res.fun ** 2)), 1e-12))
    return {"K": float(K), "r": float(r), "x0": float(x0), "sigma": sigma}


def _bootstrap(fit: Callable, rows: int, m: int, rng, full_fit: dict, family: str,
               max_failure_rate: float = 0.2) -> list[dict]:
    """Refit on ``m`` row resamples; failed refits are redrawn up to a budget."""
    fits, failures = [], 0
    while len(fits) < m:
        idx = rng.integers(0, rows, rows)
        try:
            fits.append(fit(idx, full_fit))
        except FitError:
            failures += 1
            if failures > max_failure_rate * m:
                raise FitError(family, "too many bootstrap refits failed",
                               {"failures": failures, "successes": len(fits)}) from None
    return fits


def posterior_predictive(f: ModelFamily, d: Dataset, m: int, seed) -> ModelSampleSet:
    """Draw ``m`` replicate target vectors from ``f`` conditioned on ``d``."""
    if m < 1:
        raise FamilyError("m must be at least 1")
    rng = np.random.default_rng(seed)
    hp = f.hyperparameters
    fid = f.family_id
    y = d.y
    n = d.n_rows

    if fid == GAUSSIAN:
        X = np.ones((n, 1))
        reps = _nig_replicates(X, y, np.array([hp["mu0"]]), np.array([[1.0 / hp["kappa0"]]]),
                               hp["a0"], hp["b0"], m, rng)
    elif fid == LINREG:
        X = _design(d, hp["features"])
        k = X.shape[1]
        reps = _nig_replicates(X, y, np.zeros(k), hp["v0"] * np.eye(k), hp["a0"], hp["b0"], m, rng)
    elif fid == POISSON:
        if np.any(y < 0):
            raise FamilyError("poisson_gamma needs non-negative counts")
        lam = rng.gamma(hp["a0"] + y.sum(), 1.0 / (hp["b0"] + n), m)
        reps = rng.poisson(lam[:, None], (m, n)).astype(float)
    elif fid == STUDENT_T:
        full = fit_student_t(y)
        start = (full["loc"], math.log(full["scale"]), math.log(full["df"]))
        fits = _bootstrap(lambda idx, _: fit_student_t(y[idx], start), n, m, rng, full, fid)
        par = np.array([[p["loc"], p["scale"], p["df"]] for p in fits])
        reps = par[:, :1] + par[:, 1:2] * rng.standard_t(par[:, 2:3], (m, n))
    elif fid == NEGBIN:
        if np.any(y < 0):
            raise FamilyError("negative_binomial needs non-negative counts")
        full = fit_negative_binomial(y)
        fits = _bootstrap(lambda idx, _: fit_negative_binomial(y[idx]), n, m, rng, full, fid)
        r = np.array([p["r"] for p in fits])[:, None]
        p = np.array([p["p"] for p in fits])[:, None]
        reps = rng.negative_binomial(r, p, (m, n)).astype(float)
    elif fid == GLM:
        x = _design(d, ["x"])[:, 1]
        full = fit_poisson_glm(x, y)
        start = (full["a"], full["b"])
        fits = _bootstrap(lambda idx, _: fit_poisson_glm(x[idx], y[idx], start), n, m, rng, full, fid)
        ab = np.array([[p["a"], p["b"]] for p in fits])
        reps = rng.poisson(np.exp(ab[:, :1] + ab[:, 1:2] * x[None, :])).astype(float)
    else:  # LOGISTIC
        x = _design(d, ["x"])[:, 1]
        full = fit_logistic_growth(x, y)
        start = (full["K"], full["r"], full["x0"])
        fits = _bootstrap(lambda idx, _: fit_logistic_growth(x[idx], y[idx], start), n, m, rng, full, fid)
        par = np.array([[p["K"], p["r"], p["x0"], p["sigma"]] for p in fits])
        mean = logistic_curve(x[None, :], par[:, :1], par[:, 1:2], par[:, 2:3])
        reps = mean + par[:, 3:4] * rng.standard_normal((m, n))
    return ModelSampleSet(reps, model_id=fid)


# --- closed-form moments used by tests -----------------------------------

def generator_moments(f: ModelFamily) -> tuple[float, float]:
    """(mean, variance) of the univariate generator distribution."""
    hp = f.hyperparameters
    if f.family_id == GAUSSIAN:
        return hp["mu"], hp["sigma"] ** 2
    if f.family_id == STUDENT_T:
        return hp["loc"], hp["scale"] ** 2 * hp["df"] / (hp["df"] - 2)
    if f.family_id == POISSON:
        return hp["rate"], hp["rate"]
    if f.family_id == NEGBIN:
        r, p = hp["r"], hp["p"]
        return r * (1 - p) / p, r * (1 - p) / p ** 2
    raise FamilyError(f"{f.family_id} has covariates; no single marginal moment pair")
