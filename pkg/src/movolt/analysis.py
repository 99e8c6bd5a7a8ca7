"""Closed-form convergence analysis of the momentum kernels.

Everything here works on the continuous-time parameters (gamma1, gamma2,
theta) of the kernel and a spectral measure: the kernel mass ||I|| (whose
position relative to 1 decides convergence), the limiting loss plateau,
the Malthusian exponent lambda* solving int e^{x tau} I(tau) dtau = 1
(the linear convergence rate when it exists), closed lower/upper rate
bounds, and the polynomial decay exponents at a hard spectral edge.
"""

import json

import numpy as np

from .spectrum import MP_KIND

BISECTION_ITERS = 200
ROOT_TOL = 1e-10
# discrete measures: smallest positive atom above this counts as a gap
EDGE_ATOM_TOL = 1e-12

_POLY_EXPONENTS = {"sgd": (-1.5, -0.5), "shb": (-1.5, -0.5),
                   "sdahb": (-1.5, -0.5), "sdana": (-3.0, -1.0)}


def _continuous(params, n=None):
    """(gamma1, gamma2, theta) of the kernel; SHB needs n to be mapped onto
    its dimension-adjusted twin."""
    p = params.params
    if params.name == "sgd":
        return 0.0, p["gamma"], 0.0
    if params.name == "shb":
        if n is None:
            raise ValueError("SHB analysis needs n (finite-n kernel scaling)")
        return n * p["gamma"], 0.0, n * p["theta"]
    if params.name == "sdahb":
        return p["gamma"], 0.0, p["theta"]
    if params.name == "sdana":
        return p["gamma1"], p["gamma2"], p["theta"]
    raise ValueError("no closed-form analysis for %r" % (params.name,))


def positive_edges(measure):
    """(lambda_min, lambda_max) of the positive part of the support."""
    lo, hi = measure.support_edges()
    if measure.kind == MP_KIND:
        return lo, hi
    pos = measure.points[measure.weights > 0]
    return (float(pos.min()) if pos.size else 0.0,
            float(pos.max()) if pos.size else 0.0)


def kernel_norm(params, measure):
    """||I|| = int_0^inf I(tau) dtau in closed form.

    SGD: gamma*m/2.  SHB/SDAHB: gamma*m/(2 theta) (the n-scalings cancel).
    SDANA: gamma1*(1-p)/(2*gamma2) + gamma2*m/2.
    """
    m = measure.trace_moment()
    p = params.params
    if params.name == "sgd":
        return 0.5 * p["gamma"] * m
    if params.name in ("shb", "sdahb"):
        if p["theta"] <= 0:
            raise ValueError("kernel norm needs theta > 0")
        return p["gamma"] * m / (2.0 * p["theta"])
    if params.name == "sdana":
        if p["gamma2"] <= 0:
            raise ValueError("SDANA kernel norm needs gamma2 > 0")
        bulk = 1.0 - measure.zero_mass
        return p["gamma1"] * bulk / (2.0 * p["gamma2"]) + 0.5 * p["gamma2"] * m
    raise ValueError("no closed-form norm for %r" % (params.name,))


def limiting_loss(norm, zero_mass, R_tilde):
    """Plateau value R_tilde * mu({0}) / (2 (1 - ||I||)); needs ||I|| < 1."""
    if norm >= 1.0:
        raise ValueError("kernel norm %.4f >= 1: not convergent" % norm)
    return R_tilde * zero_mass / (2.0 * (1.0 - norm))


def _laplace_sgd(x, gamma, measure):
    lam = measure.points
    den = 2.0 * gamma * lam - x
    if np.any(den <= 0.0):
        return np.inf
    return float(np.sum(measure.weights * gamma**2 * lam**2 / den))


def _laplace_sdahb(x, gamma1, theta, measure):
    lam = measure.points
    first = theta - x
    second = x**2 - 2.0 * theta * x + 4.0 * gamma1 * lam
    if first <= 0.0 or np.any(second <= 0.0):
        return np.inf
    return float(np.sum(measure.weights * 2.0 * gamma1**2 * lam**2
                        / (first * second)))


def _laplace_sdana(x, gamma1, gamma2, measure):
    lam = measure.points
    shifted = gamma2 * lam - x
    omega = 4.0 * gamma1 - gamma2**2 * lam
    quad = shifted**2 + lam * omega
    if np.any(shifted <= 0.0) or np.any(quad <= 0.0):
        return np.inf
    num = (gamma2**2 * shifted**2 + gamma2 * (omega - 2.0 * gamma1) * shifted
           + 2.0 * gamma1**2)
    return float(np.sum(measure.weights * lam**2 * num / (quad * shifted)))


def laplace_transform(params, measure, x, n=None):
    """Tilted kernel mass F(x) = int e^{x tau} I(tau) dtau; +inf once x
    crosses a decay rate of the kernel.  F(0) = ||I||."""
    g1, g2, theta = _continuous(params, n)
    name = "sgd" if params.name == "sgd" else params.name
    if name == "sgd":
        return _laplace_sgd(x, g2, measure)
    if name in ("shb", "sdahb"):
        return _laplace_sdahb(x, g1, theta, measure)
    if name == "sdana":
        return _laplace_sdana(x, g1, g2, measure)
    raise ValueError("no Laplace transform for %r" % (params.name,))


def _malthusian_cap(params, measure, n=None):
    g1, g2, theta = _continuous(params, n)
    lam_min, _ = positive_edges(measure)
    if params.name == "sgd":
        return 2.0 * g2 * lam_min
    if params.name in ("shb", "sdahb"):
        return theta - np.sqrt(max(theta**2 - 4.0 * g1 * lam_min, 0.0))
    if params.name == "sdana":
        return g2 * lam_min
    raise ValueError("no Malthusian cap for %r" % (params.name,))


def malthusian_exponent(params, measure, n=None):
    """Root lambda* of F(x) = 1 on (0, cap), or None when absent.

    Absence is a value, not an error: when F stays below 1 up to the cap
    the convergence rate is dominated by the forcing decay instead.
    """
    value, _ = _malthusian(params, measure, n)
    return value


def _malthusian(params, measure, n=None):
    lam_min, _ = positive_edges(measure)
    if lam_min <= 0.0:
        return None, "absent: spectrum touches zero (no exponential regime)"
    cap = _malthusian_cap(params, measure, n)
    if cap <= 0.0:
        return None, "absent: kernel decay cap is zero"
    F = lambda x: laplace_transform(params, measure, x, n=n)
    f0 = F(0.0)
    if f0 >= 1.0:
        return None, "absent: kernel norm %.4f >= 1 (not convergent)" % f0
    hi = cap * (1.0 - 1e-12)
    fhi = F(hi)
    if fhi < 1.0:
        return None, ("absent: F(cap)=%.4f < 1, forcing-dominated regime"
                      % fhi)
    lo = 0.0
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if F(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return float(root), "root residual %.3g" % abs(F(root) - 1.0)


def forcing_rate(params, measure, n=None):
    """Exponential decay rate of the slowest forcing component (the mode at
    the smallest positive eigenvalue)."""
    g1, g2, theta = _continuous(params, n)
    lam_min, _ = positive_edges(measure)
    if params.name == "sgd":
        return 2.0 * g2 * lam_min
    if params.name in ("shb", "sdahb"):
        return theta - np.sqrt(max(theta**2 - 4.0 * g1 * lam_min, 0.0))
    if params.name == "sdana":
        omega = 4.0 * g1 - g2**2 * lam_min
        if omega >= 0.0:
            return g2 * lam_min
        return g2 * lam_min - np.sqrt(g2**2 * lam_min**2 - 4.0 * g1 * lam_min)
    raise ValueError("no forcing rate for %r" % (params.name,))


def effective_rate(params, measure, n=None):
    """The exponential loss decay rate: lambda* when it exists, otherwise
    the forcing rate (the two regimes of the renewal analysis)."""
    value, _ = _malthusian(params, measure, n)
    if value is not None:
        return value
    return forcing_rate(params, measure, n=n)


def rate_lower_bound(params, measure, n=None):
    """Closed lower bound on the convergence rate (gap regime).

    SGD: gamma*lam_min.  SHB/SDAHB: gamma1*lam_min*theta /
    (2*gamma1*lam_min + theta^2).  SDANA: 3*gamma1*gamma2*lam_min /
    (2*gamma2^2*lam_min + 4*gamma1).
    """
    g1, g2, theta = _continuous(params, n)
    lam_min, _ = positive_edges(measure)
    if params.name == "sgd":
        return g2 * lam_min
    if params.name in ("shb", "sdahb"):
        return g1 * lam_min * theta / (2.0 * g1 * lam_min + theta**2)
    if params.name == "sdana":
        return 3.0 * g1 * g2 * lam_min / (2.0 * g2**2 * lam_min + 4.0 * g1)
    raise ValueError("no rate bound for %r" % (params.name,))


def rate_upper_bound(params, measure, n=None):
    lam_min, _ = positive_edges(measure)
    m = measure.trace_moment()
    if params.name == "sdana":
        return min(lam_min / m, 0.5)
    if params.name in ("sgd", "shb", "sdahb"):
        return 4.0 * lam_min / m
    raise ValueError("no rate bound for %r" % (params.name,))


def classify(measure):
    """'hard_edge' when the positive support reaches 0 (MP at r=1), else
    'strongly_convex' (positive spectral gap, possibly plus a zero atom)."""
    if measure.kind == MP_KIND:
        return "hard_edge" if measure.r == 1.0 else "strongly_convex"
    lam_min, _ = positive_edges(measure)
    return "strongly_convex" if lam_min > EDGE_ATOM_TOL else "hard_edge"


class AnalysisReport:
    """JSON-serializable convergence summary for (algorithm, measure)."""

    FIELDS = ("algo", "params", "m", "p", "lam_min", "lam_max", "kernel_norm",
              "convergent", "limiting_loss", "malthusian", "malthusian_note",
              "effective_rate", "rate_lower_bound", "rate_upper_bound",
              "predicted_poly_exponents", "classification", "R_tilde")

    def __init__(self, **kw):
        for f in self.FIELDS:
            setattr(self, f, kw.pop(f, None))
        if kw:
            raise TypeError("unknown report fields %r" % sorted(kw))

    def to_dict(self):
        return {f: getattr(self, f) for f in self.FIELDS}

    def to_json(self, indent=1):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def rate_report(params, measure, R_tilde=1.0, n=None):
    """Full convergence report: norm, threshold, plateau, rates, exponents."""
    m = measure.trace_moment()
    lam_min, lam_max = positive_edges(measure)
    norm = kernel_norm(params, measure)
    convergent = bool(norm < 1.0)
    limit = limiting_loss(norm, measure.zero_mass, R_tilde) if convergent else None
    malthusian, note = _malthusian(params, measure, n)
    kind = classify(measure)
    if kind == "hard_edge" and measure.kind == MP_KIND:
        exponents = _POLY_EXPONENTS.get(params.name)
    else:
        exponents = None
    eff = malthusian if malthusian is not None else (
        forcing_rate(params, measure, n=n) if lam_min > 0 else 0.0)
    return AnalysisReport(
        algo=params.name, params=params.describe(), m=m, p=measure.zero_mass,
        lam_min=lam_min, lam_max=lam_max, kernel_norm=norm,
        convergent=convergent, limiting_loss=limit, malthusian=malthusian,
        malthusian_note=note, effective_rate=eff,
        rate_lower_bound=rate_lower_bound(params, measure, n=n),
        rate_upper_bound=rate_upper_bound(params, measure, n=n),
        predicted_poly_exponents=exponents, classification=kind,
        R_tilde=R_tilde)


def fit_poly_rate(times, values, t_window):
    """Least-squares slope of log(value) vs log(t) inside t_window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = t_window
    mask = (times >= lo) & (times <= hi)
    if mask.sum() < 2:
        raise ValueError("need at least two samples inside the window")
    t, v = times[mask], values[mask]
    if np.any(v <= 0.0) or np.any(t <= 0.0):
        raise ValueError("log-log fit needs positive times and values")
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])
