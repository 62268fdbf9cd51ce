"""Pearson-system marginals fitted from the first four moments.

Moments are passed as (mean, variance, skewness, kurtosis) with kurtosis the
non-excess fourth standardised moment (3 for the normal).  The type follows
from the roots of the quadratic in the Pearson differential equation

    p'(x) / p(x) = -(a + x) / (b0 + b1 x + b2 x^2)

written for the standardised variable.  Every family is sampled exactly with
numpy generators; type IV uses ratio-of-uniforms on the arctan scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

TOL = 1e-8
FAMILIES = ("normal", "beta", "gamma", "inverse-gamma", "beta-prime", "pearson-iv", "student-t",
            "empirical")


class MomentRegionError(ValueError):
    """Moments outside the region any distribution can attain."""


@dataclass
class MarginalModel:
    family: str
    params: dict
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    pearson_type: str = ""
    data: np.ndarray | None = field(default=None, repr=False)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` independent draws in the original units."""
        return _SAMPLERS[self.family](self, int(n), rng)

    def to_json(self) -> dict:
        return {"family": self.family, "type": self.pearson_type,
                "params": {k: float(v) for k, v in self.params.items()},
                "moments": {"mean": self.mean, "variance": self.variance,
                            "skewness": self.skewness, "kurtosis": self.kurtosis}}


def ode_coefficients(skewness: float, kurtosis: float) -> tuple[float, float, float, float]:
    """(a, b0, b1, b2) of the standardised Pearson equation."""
    b1sq = skewness ** 2
    den = 10 * kurtosis - 12 * b1sq - 18
    b0 = (4 * kurtosis - 3 * b1sq) / den
    b1 = skewness * (kurtosis + 3) / den
    b2 = (2 * kurtosis - 3 * b1sq - 6) / den
    return b1, b0, b1, b2


def kappa(skewness: float, kurtosis: float) -> float:
    """Pearson's type criterion b1^2 / (4 b0 b2)."""
    b1sq = skewness ** 2
    den = 4 * (4 * kurtosis - 3 * b1sq) * (2 * kurtosis - 3 * b1sq - 6)
    if den == 0:
        return math.inf
    return b1sq * (kurtosis + 3) ** 2 / den


def fit_pearson(mean: float, variance: float, skewness: float, kurtosis: float,
                tol: float = TOL) -> MarginalModel:
    """Member of the Pearson system with the given four moments."""
    if not variance > 0:
        raise MomentRegionError(f"variance must be positive, got {variance}")
    b1sq = skewness ** 2
    if kurtosis <= b1sq + 1 + tol:
        raise MomentRegionError(
            f"kurtosis {kurtosis:.6g} must exceed skewness^2 + 1 = {b1sq + 1:.6g}")
    sd = math.sqrt(variance)
    base = dict(mean=float(mean), variance=float(variance), skewness=float(skewness), kurtosis=float(kurtosis))
    sym = abs(skewness) <= tol
    if sym and abs(kurtosis - 3) <= tol:
        return MarginalModel("normal", {"loc": mean, "scale": sd}, pearson_type="0", **base)
    if sym and kurtosis > 3:
        df = 4 + 6 / (kurtosis - 3)
        return MarginalModel("student-t", {"df": df, "loc": mean, "scale": sd * math.sqrt((df - 2) / df)},
                             pearson_type="VII", **base)
    sign = 1.0 if skewness >= 0 else -1.0
    line3 = 2 * kurtosis - 3 * b1sq - 6
    if sym or (line3 < -tol and kappa(skewness, kurtosis) < 0):
        return _fit_beta(mean, sd, skewness, kurtosis, base)
    if abs(line3) <= tol:
        k = 4 / b1sq
        return MarginalModel("gamma", {"shape": k, "scale": sd / math.sqrt(k), "loc": mean, "sign": sign},
                             pearson_type="III", **base)
    kp = kappa(skewness, kurtosis)
    if abs(kp - 1) <= tol:
        g2 = b1sq
        alpha = (3 * g2 + 8 + 4 * math.sqrt(g2 + 4)) / g2
        beta = sd * (alpha - 1) * math.sqrt(alpha - 2)
        return MarginalModel("inverse-gamma", {"shape": alpha, "scale": beta, "loc": mean, "sign": sign},
                             pearson_type="V", **base)
    a, b0, b1, b2 = ode_coefficients(abs(skewness), kurtosis)
    if kp > 1:
        # two real roots of the same sign; support lies beyond the larger one
        disc = math.sqrt(b1 * b1 - 4 * b2 * b0)
        r1, r2 = sorted(((-b1 - disc) / (2 * b2), (-b1 + disc) / (2 * b2)))
        A = (a + r1) / (r1 - r2)
        B = (a + r2) / (r2 - r1)
        p = 1 - B / b2
        q = A / b2 + B / b2 - 1
        return MarginalModel("beta-prime", {"p": p, "q": q, "origin": r2, "width": r2 - r1,
                                            "loc": mean, "scale": sd, "sign": sign},
                             pearson_type="VI", **base)
    # complex roots: type IV in arctan form
    lam = -b1 / (2 * b2)
    width = math.sqrt(b0 / b2 - lam * lam)
    m = 1 / (2 * b2)
    nu = (a + lam) / (width * b2)
    return MarginalModel("pearson-iv", {"m": m, "nu": nu, "lam": lam, "width": width,
                                        "loc": mean, "scale": sd, "sign": sign},
                         pearson_type="IV", **base)


def _fit_beta(mean, sd, skewness, kurtosis, base) -> MarginalModel:
    b1sq = skewness ** 2
    nu = 6 * (kurtosis - b1sq - 1) / (6 + 3 * b1sq - 2 * kurtosis)
    root = math.sqrt((nu + 2) ** 2 * b1sq + 16 * (nu + 1))
    t = (nu + 2) * abs(skewness) / root
    sign = 1.0 if skewness >= 0 else -1.0
    # positive skew puts the smaller exponent on the left end
    alpha = nu / 2 * (1 - sign * t)
    beta = nu / 2 * (1 + sign * t)
    width = sd / 2 * root
    lower = mean - width * alpha / (alpha + beta)
    return MarginalModel("beta", {"alpha": alpha, "beta": beta, "lower": lower, "width": width},
                         pearson_type="I" if abs(skewness) > TOL else "II", **base)


def empirical_marginal(data: np.ndarray) -> MarginalModel:
    """Inverse-ECDF marginal built from observations (linear quantile interpolation)."""
    x = np.sort(np.asarray(data, dtype=float))
    if x.size < 2:
        raise ValueError("empirical marginal needs at least 2 observations")
    mu = float(x.mean())
    var = float(((x - mu) ** 2).mean())
    sd = math.sqrt(var) if var > 0 else 0.0
    skew = float(((x - mu) ** 3).mean() / sd ** 3) if sd else float("nan")
    kurt = float(((x - mu) ** 4).mean() / sd ** 4) if sd else float("nan")
    return MarginalModel("empirical", {"n": x.size}, mu, var, skew, kurt, pearson_type="empirical", data=x)


def _type4_theta(m: float, nu: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draws from the density proportional to cos(t)^(2m-2) exp(-nu t) on (-pi/2, pi/2)."""
    half = math.pi / 2

    def logg(t):
        return (2 * m - 2) * np.log(np.cos(t)) - nu * t

    mode = math.atan(-nu / (2 * m - 2))
    u_max = math.exp(0.5 * logg(mode))

    def tsqrtg(t):
        return t * np.exp(0.5 * logg(t))

    lo, hi = -half + 1e-12, half - 1e-12
    v_min = optimize.minimize_scalar(tsqrtg, bounds=(lo, 0.0), method="bounded", options={"xatol": 1e-12}).fun
    v_max = -optimize.minimize_scalar(lambda t: -tsqrtg(t), bounds=(0.0, hi), method="bounded",
                                      options={"xatol": 1e-12}).fun
    # small outward padding guards against the optimiser stopping short of the extremum
    v_min, v_max = 1.001 * min(v_min, 0.0), 1.001 * max(v_max, 0.0)
    u_max *= 1.001
    out = np.empty(0)
    while out.size < n:
        batch = max(2 * (n - out.size), 64)
        u = rng.uniform(0, u_max, batch)
        v = rng.uniform(v_min, v_max, batch)
        t = v / u
        ok = (np.abs(t) < half)
        ok[ok] = 2 * np.log(u[ok]) <= logg(t[ok])
        out = np.concatenate([out, t[ok]])
    return out[:n]


def _sample_normal(mm, n, rng):
    return mm.params["loc"] + mm.params["scale"] * rng.standard_normal(n)


def _sample_t(mm, n, rng):
    return mm.params["loc"] + mm.params["scale"] * rng.standard_t(mm.params["df"], n)


def _sample_beta(mm, n, rng):
    p = mm.params
    return p["lower"] + p["width"] * rng.beta(p["alpha"], p["beta"], n)


def _sample_gamma(mm, n, rng):
    p = mm.params
    g = rng.gamma(p["shape"], p["scale"], n)
    return p["loc"] + p["sign"] * (g - p["shape"] * p["scale"])


def _sample_invgamma(mm, n, rng):
    p = mm.params
    x = p["scale"] / rng.gamma(p["shape"], 1.0, n)
    return p["loc"] + p["sign"] * (x - p["scale"] / (p["shape"] - 1))


def _sample_betaprime(mm, n, rng):
    p = mm.params
    y = rng.gamma(p["p"], 1.0, n) / rng.gamma(p["q"], 1.0, n)
    z = p["origin"] + p["width"] * y
    return p["loc"] + p["sign"] * p["scale"] * z


def _sample_iv(mm, n, rng):
    p = mm.params
    z = p["lam"] + p["width"] * np.tan(_type4_theta(p["m"], p["nu"], n, rng))
    return p["loc"] + p["sign"] * p["scale"] * z


def _sample_empirical(mm, n, rng):
    x = mm.data
    q = rng.uniform(0.0, 1.0, n)
    return np.interp(q, np.linspace(0.0, 1.0, x.size), x)


_SAMPLERS = {
    "normal": _sample_normal,
    "student-t": _sample_t,
    "beta": _sample_beta,
    "gamma": _sample_gamma,
    "inverse-gamma": _sample_invgamma,
    "beta-prime": _sample_betaprime,
    "pearson-iv": _sample_iv,
    "empirical": _sample_empirical,
}
