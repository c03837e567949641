"""Volume-growth estimators, small-parameter limit studies and their diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DivergenceError, UsageError
from .quadrature import Estimate, SeminormContext, double_integral_shellmc, finiteness_gate, seminorm, tail_integral, far_field
from .spaces.dilation import unit_ball_volume

AVR_SLOPE_TOL = 0.05


# -- volume growth -------------------------------------------------------------------


@dataclass
class AvrEstimate:
    """``lim m(B_r(x0)) / r^N``; ``flag`` is ``finite``, ``infinite`` or ``zero``."""

    value: float
    N: float
    basepoint: list
    radii: np.ndarray
    ratios: np.ndarray
    fit_slope: float
    reliable: bool
    flag: str
    uncertainty: float

    def to_dict(self):
        return {
            "value": self.value,
            "N": self.N,
            "basepoint": self.basepoint,
            "fit_slope": self.fit_slope,
            "reliable": self.reliable,
            "flag": self.flag,
            "uncertainty": self.uncertainty,
        }


def _check_radii(radii, min_decades=None, min_max=None):
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 3 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise UsageError("radii must be >= 3 positive, strictly increasing values")
    if min_decades is not None and r[-1] / r[0] < 10**min_decades * (1 - 1e-12):
        raise UsageError(f"radii must span at least {min_decades} decades")
    if min_max is not None and r[-1] < min_max:
        raise UsageError(f"largest radius must be at least {min_max}")
    return r


def _log_volumes(space, x, radii):
    return np.array([float(space.log_ball_volume(r, x)) for r in radii])


def estimate_avr(space, basepoint=None, N=None, radii=None, k=3):
    """Asymptotic volume ratio at ``basepoint`` with exponent ``N``.

    The value is the mean of the last ``k`` ratios; their spread is the
    uncertainty.  The slope of ``log m(B_r)`` against ``log r`` over the largest
    decade decides the flags: well above ``N`` with growing ratios means
    ``+inf``, well below with shrinking ratios means ``0``, and any deviation
    above 0.05 marks the value unreliable.
    """
    N = float(space.volume_dimension if N is None else N)
    if not N > 0:
        raise UsageError("N must be positive")
    radii = _check_radii(np.logspace(0, 6, 25) if radii is None else radii, min_decades=2)
    x = None if basepoint is None else space.validate(basepoint)
    logv = _log_volumes(space, x, radii)
    log_ratio = logv - N * np.log(radii)
    model = space.power_model(x)
    if model is not None and model[1] == N:
        # exact power volume: the ratio is the constant itself at every radius
        ratios = np.full(radii.size, float(model[0]))
    else:
        with np.errstate(over="ignore"):
            ratios = np.exp(log_ratio)
    top = radii >= radii[-1] / 10.0 * (1 - 1e-12)
    if top.sum() < 2:
        top[-2:] = True
    slope = float(np.polyfit(np.log(radii[top]), logv[top], 1)[0])
    trend = np.diff(log_ratio[top])
    flag = "finite"
    if slope > N + AVR_SLOPE_TOL and np.all(trend > 0):
        flag, value, unc = "infinite", float("inf"), 0.0
    elif slope < N - AVR_SLOPE_TOL and np.all(trend < 0):
        flag, value, unc = "zero", 0.0, float(ratios[-1])
    else:
        tail = ratios[-k:]
        value = float(np.mean(tail))
        unc = float(np.max(tail) - np.min(tail)) / 2.0
    reliable = abs(slope - N) <= AVR_SLOPE_TOL
    bp = (space.basepoint if x is None else x).tolist()
    return AvrEstimate(value, N, bp, radii, ratios, slope, reliable, flag, unc)


@dataclass
class EntropyEstimate:
    """``lim log m(B_r(x0)) / r``."""

    value: float
    basepoint: list
    radii: np.ndarray
    quotients: np.ndarray
    uncertainty: float
    log_power: float

    def to_dict(self):
        return {
            "value": self.value,
            "basepoint": self.basepoint,
            "uncertainty": self.uncertainty,
            "log_power": self.log_power,
            "last_quotient": float(self.quotients[-1]),
        }


def estimate_entropy(space, basepoint=None, radii=None):
    """Volume entropy from the tail of ``log m(B_r)``.

    ``log m(B_r) / r`` converges slowly (the constant and polynomial factors
    enter as ``O(log r / r)``), so the value is the ``r`` coefficient of a
    least-squares fit ``log m = h r + a log r + b`` over radii in the upper half
    of the range, clipped at zero.
    """
    radii = _check_radii(np.linspace(1.0, 40.0, 40) if radii is None else radii, min_max=20.0)
    x = None if basepoint is None else space.validate(basepoint)
    logv = _log_volumes(space, x, radii)
    quotients = logv / radii
    tail = radii >= radii[-1] / 2.0
    if tail.sum() < 4:
        tail[-4:] = True
    rt = radii[tail]
    A = np.stack([rt, np.log(rt), np.ones_like(rt)], axis=1)
    coef, *_ = np.linalg.lstsq(A, logv[tail], rcond=None)
    resid = logv[tail] - A @ coef
    dof = max(rt.size - 3, 1)
    cov = np.linalg.pinv(A.T @ A) * float(resid @ resid) / dof
    bp = (space.basepoint if x is None else x).tolist()
    return EntropyEstimate(
        float(max(coef[0], 0.0)), bp, radii, quotients, float(np.sqrt(max(cov[0, 0], 0.0))), float(coef[1])
    )


@dataclass
class BasepointCheck:
    passed: bool
    first: object
    second: object
    difference: float
    tolerance: float

    def to_dict(self):
        return {
            "passed": self.passed,
            "first": self.first.to_dict(),
            "second": self.second.to_dict(),
            "difference": self.difference,
            "tolerance": self.tolerance,
        }


def check_basepoint_independence(space, x0, x1, N=None, radii=None, quantity="avr", rtol=None):
    """Compare the AVR (or entropy) estimated at two basepoints.

    Passes when the values agree within ``max(rtol * |v0|, combined
    uncertainty)``; ``rtol`` defaults to 1e-3 for the AVR and 1e-2 for the
    entropy.
    """
    x0 = space.validate(x0)
    x1 = space.validate(x1)
    if np.allclose(x0, x1):
        raise UsageError("basepoints must differ")
    if quantity == "avr":
        a = estimate_avr(space, x0, N, radii)
        b = estimate_avr(space, x1, N, radii)
        rtol = 1e-3 if rtol is None else rtol
        if a.flag != "finite" or b.flag != "finite":
            ok = a.flag == b.flag
            return BasepointCheck(ok, a, b, 0.0 if ok else float("inf"), 0.0)
    elif quantity == "entropy":
        a = estimate_entropy(space, x0, radii)
        b = estimate_entropy(space, x1, radii)
        rtol = 1e-2 if rtol is None else rtol
    else:
        raise UsageError("quantity must be 'avr' or 'entropy'")
    diff = abs(a.value - b.value)
    tol = max(rtol * abs(a.value), float(np.hypot(a.uncertainty, b.uncertainty)))
    return BasepointCheck(bool(diff <= tol), a, b, float(diff), float(tol))


# -- extrapolation ---------------------------------------------------------------------


@dataclass
class Extrapolation:
    limit: float
    uncertainty: float
    slope: float
    used: int
    chi2_red: float


def fit_limit(points, drop=True, level=0.999):
    """Weighted linear fit ``value = limit + slope * param``.

    While the reduced chi-square exceeds its ``level`` quantile and more than
    three points remain, the point with the largest parameter is dropped.
    Without standard errors the points are weighted equally and the fit
    residual sets the scale.  The intercept's standard error is inflated by
    ``sqrt(chi2_red)`` when that exceeds one.
    """
    pts = sorted(((float(a), float(v), float(e)) for a, v, e in points), key=lambda t: -t[0])
    if len(pts) < 3:
        raise UsageError("extrapolation needs at least 3 points")
    s = np.array([t[0] for t in pts])
    v = np.array([t[1] for t in pts])
    e = np.array([t[2] for t in pts])
    if np.any(s <= 0) or np.any(np.diff(s) >= 0):
        raise UsageError("parameters must be positive and distinct")
    have_err = np.all(e > 0)
    start = 0
    while True:
        ss, vv, ee = s[start:], v[start:], e[start:]
        w = 1.0 / ee**2 if have_err else np.ones_like(ss)
        X = np.stack([np.ones_like(ss), ss], axis=1)
        cov = np.linalg.inv(X.T @ (X * w[:, None]))
        coef = cov @ (X.T @ (w * vv))
        resid = vv - X @ coef
        dof = ss.size - 2
        chi2 = float(np.sum(w * resid**2))
        if have_err:
            chi2_red = chi2 / dof if dof > 0 else 0.0
            too_big = dof > 0 and chi2 > stats.chi2.ppf(level, dof)
        else:
            scale = chi2 / dof if dof > 0 else 0.0
            cov = cov * scale
            chi2_red = 1.0
            rel = np.max(np.abs(resid)) / max(np.max(np.abs(vv)), 1e-300)
            too_big = rel > 1e-9
        if drop and too_big and ss.size > 3:
            start += 1
            continue
        break
    unc = float(np.sqrt(cov[0, 0] * max(1.0, chi2_red)))
    return Extrapolation(float(coef[0]), unc, float(coef[1]), int(ss.size), float(chi2_red))


def extrapolate(points, drop=True):
    """``(limit, uncertainty)`` of a linear-in-parameter fit; see :func:`fit_limit`."""
    fit = fit_limit(points, drop=drop)
    return fit.limit, fit.uncertainty


# -- limit studies -----------------------------------------------------------------------


@dataclass
class LimitStudyResult:
    params: list
    estimates: list
    extrapolated: float
    uncertainty: float
    predicted: float
    L: float
    lp_norm: float
    relative_error: float
    p: float
    numeric_L: float = float("nan")
    fit: Extrapolation | None = None
    gate: dict | None = None
    meta: dict = field(default_factory=dict)

    def rows(self):
        return [
            {"parameter": a, "estimate": e.value, "stderr": e.stderr, "samples": e.samples}
            for a, e in zip(self.params, self.estimates)
        ]

    def to_dict(self):
        return {
            "extrapolated": self.extrapolated,
            "uncertainty": self.uncertainty,
            "predicted": self.predicted,
            "relative_error": self.relative_error,
            "L": self.L,
            "numeric_L": self.numeric_L,
            "lp_norm": self.lp_norm,
            "p": self.p,
            "fit_points_used": None if self.fit is None else self.fit.used,
            "gate": self.gate,
            **self.meta,
        }


def numeric_structural_constant(family, space, delta=100.0, param=1e-6):
    """Tail integral at a large cut-off and a small parameter: the constant the kernels actually produce.

    The defaults keep ``param * delta`` small while leaving ``param`` well
    above the error of an estimated entropy ``h``; an exponential kernel whose
    rate undershoots the true growth by more than ``param`` is not integrable.
    """
    return float(tail_integral(space, family.with_param(param), None, delta))


def limit_study(space, u, family, plan, schedule=None, workers=None, tau=0.1, gate=True, L=None):
    """Seminorms along a decreasing parameter schedule, extrapolated to zero.

    The predicted limit is ``2 L ||u||_p^p`` with ``L`` from
    :func:`mollifiers.predicted_L` unless given.  Every schedule point uses the
    same seed (common random numbers), which correlates the Monte Carlo errors
    across the schedule and stabilizes the fit.
    """
    from .mollifiers import predicted_L

    p = family.p
    params = list(family.schedule if schedule is None else schedule)
    if len(params) < 3:
        raise UsageError("limit study needs at least 3 schedule points")
    if np.any(np.diff(params) >= 0):
        raise UsageError("schedule must be strictly decreasing")
    gate_info = None
    if gate:
        res = finiteness_gate(space, u, family.with_param(tau), plan.scaled(0.25), p=p, workers=workers)
        gate_info = res.to_dict()
        if not res.passed:
            raise DivergenceError("finiteness gate failed", gate=gate_info)
    estimates = []
    for a in params:
        est = seminorm(space, u, family.with_param(a), plan, p=p, workers=workers)
        estimates.append(est)
    fit = fit_limit([(a, e.value, e.stderr) for a, e in zip(params, estimates)])
    norm = u.lp_norm(p).value
    L = predicted_L(family, space) if L is None else float(L)
    predicted = 2.0 * L * norm
    rel = abs(fit.limit - predicted) / predicted if predicted > 0 else float("nan")
    try:
        nL = numeric_structural_constant(family, space)
    except Exception:  # the numeric constant is diagnostic only
        nL = float("nan")
    return LimitStudyResult(
        [float(a) for a in params],
        estimates,
        fit.limit,
        fit.uncertainty,
        float(predicted),
        float(L),
        float(norm),
        float(rel),
        float(p),
        nL,
        fit,
        gate_info,
        {"numeric_predicted": 2.0 * nL * norm},
    )


# -- proof decomposition ---------------------------------------------------------------------


@dataclass
class DecompositionRow:
    R: float
    param: float
    I: Estimate
    II: Estimate
    III: Estimate
    total: Estimate

    def to_dict(self):
        return {
            "R": self.R,
            "parameter": self.param,
            "I": self.I.value,
            "I_stderr": self.I.stderr,
            "II": self.II.value,
            "II_stderr": self.II.stderr,
            "III": self.III.value,
            "III_stderr": self.III.stderr,
            "total": self.total.value,
            "total_stderr": self.total.stderr,
        }


@dataclass
class DecompositionDiagnostic:
    rows: list
    L: float
    lp_norm: float
    reference: Estimate | None = None
    verdicts: dict = field(default_factory=dict)

    def term(self, R, param):
        for r in self.rows:
            if r.R == R and r.param == param:
                return r
        raise KeyError((R, param))


def decomposition_terms(space, u, profile, R, plan, p, x0=None, workers=None):
    """``I`` (pairs within ``R``), ``II`` (half of ``B`` and its mirror) and ``III`` (``C`` and its mirror)."""
    x0 = space.basepoint if x0 is None else space.validate(x0)
    Rs = u.support_radius
    reach = float(space._dist(x0, u.center)) + Rs
    # far pairs (beyond D) then satisfy d(y, x0) > 2 d(x, x0): they all lie in B or its mirror
    D = max(float(R), plan.far_factor * Rs, 3.0 * reach)
    edges = plan.edges(Rs, far=D)
    ctx = SeminormContext(space, u, profile, p, D)

    def integrand(x, y, t, inside):
        vals = ctx.pair_values(x, y, t, inside)
        dx = space._dist(x0, x)
        dy = space._dist(x0, y)
        mirror_b = (dy > 2.0 * dx) | (dy < 0.5 * dx)
        lab = np.where(t <= R, 0, np.where(mirror_b, 1, 2))
        return vals, lab

    near = double_integral_shellmc(space, ctx.sample_outer, integrand, edges, plan, workers, labels=3)
    far_val, far_err = far_field(space, u, profile, p, D, workers)
    (i_v, i_e), (b_v, b_e), (c_v, c_e) = near.meta["labels"]
    I = Estimate(i_v, i_e, near.samples)
    II = Estimate(0.5 * (b_v + far_val), 0.5 * np.hypot(b_e, far_err), near.samples)
    III = Estimate(c_v, c_e, near.samples)
    total = Estimate(near.value + far_val, float(np.hypot(near.stderr, far_err)), near.samples, meta={"far_radius": D})
    return I, II, III, total


def decomposition_diagnostic(space, u, family, plan, params=None, R_values=(4.0, 16.0, 64.0), x0=None, workers=None, L=None):
    """Trend tables of the three proof terms over the cut-off ``R`` and the parameter.

    Verdicts at the largest ``(R, n)``: ``I`` falls by at least 10x along the
    schedule, ``II / (L ||u||_p^p)`` lies in ``[0.9, 1.1]``, ``III`` is at most 5%
    of the total, and ``I + 2 II + III`` matches an independent full seminorm
    estimate within four combined standard errors.
    """
    from .mollifiers import predicted_L

    p = family.p
    params = list(family.schedule if params is None else params)
    R_values = sorted(float(r) for r in R_values)
    if R_values[0] <= u.support_radius:
        raise UsageError("R must exceed the support radius of u")
    rows = []
    for R in R_values:
        for a in params:
            I, II, III, total = decomposition_terms(space, u, family.with_param(a), R, plan, p, x0, workers)
            rows.append(DecompositionRow(R, float(a), I, II, III, total))
    L = predicted_L(family, space) if L is None else float(L)
    norm = u.lp_norm(p).value
    last = [r for r in rows if r.R == R_values[-1]]
    best = min(last, key=lambda r: r.param)
    ref = seminorm(space, u, family.with_param(best.param), plan, p=p, workers=workers)
    i_fixed = [r for r in rows if r.R == R_values[0]]
    i_first = max(i_fixed, key=lambda r: r.param).I.value
    i_last = min(i_fixed, key=lambda r: r.param).I.value
    ident = abs(best.total.value - ref.value) <= 4.0 * np.hypot(best.total.stderr, ref.stderr)
    ratio = best.II.value / (L * norm) if L * norm > 0 else float("nan")
    verdicts = {
        "I_decrease_factor": float(i_first / i_last) if i_last > 0 else float("inf"),
        "I_decreases_10x": bool(i_last <= i_first / 10.0),
        "II_ratio": float(ratio),
        "II_ratio_ok": bool(0.9 <= ratio <= 1.1),
        "III_fraction": float(best.III.value / best.total.value),
        "III_small": bool(best.III.value <= 0.05 * best.total.value),
        "partition_total": best.total.value,
        "reference_total": ref.value,
        "partition_identity": bool(ident),
    }
    return DecompositionDiagnostic(rows, float(L), float(norm), ref, verdicts)


# -- rigidity bounds ---------------------------------------------------------------------------


@dataclass
class SharpnessReport:
    kind: str
    bound: float
    ratio: float
    ratio_uncertainty: float
    slack: float
    equality: bool
    exceeds: bool
    tolerance: float

    def to_dict(self):
        return dict(self.__dict__)


SHARPNESS_TOL = {"cone-bound": 0.05, "entropy-bound": 0.10}


def sharpness_check(kind, space, study, N, p, tolerance=None):
    """Compare ``lim E / ||u||_p^p`` with ``2 N omega_N / p`` or ``2 (N - 1)``.

    ``slack`` is the relative gap below the bound; ``equality`` is set when
    the ratio is within ``tolerance`` of the bound; ``exceeds`` when it is
    above the bound by more than four standard errors.
    """
    N, p = float(N), float(p)
    if abs(study.p - p) > 1e-12:
        raise UsageError(f"study used p = {study.p}, check asked for p = {p}")
    if kind == "cone-bound":
        bound = 2.0 * N * unit_ball_volume(N) / p
    elif kind == "entropy-bound":
        bound = 2.0 * (N - 1.0)
    else:
        raise UsageError("kind must be 'cone-bound' or 'entropy-bound'")
    tol = SHARPNESS_TOL[kind] if tolerance is None else float(tolerance)
    ratio = study.extrapolated / study.lp_norm
    sigma = study.uncertainty / study.lp_norm
    slack = (bound - ratio) / bound
    return SharpnessReport(
        kind,
        float(bound),
        float(ratio),
        float(sigma),
        float(slack),
        bool(abs(ratio - bound) <= tol * bound),
        bool(ratio > bound + 4.0 * sigma),
        tol,
    )
