"""Layer-cake tail integrals and shell-stratified Monte Carlo for singular double integrals.

The seminorm ``E(u) = iint |u(x) - u(y)|^p rho(d(x, y)) dm(x) dm(y)`` of a
function supported in ``S = B(c, R)`` is split as

* near field: ``x`` uniform in ``S``, ``y`` in log-spaced distance shells
  around ``x`` between ``r_min`` and ``D >= 2R``; a pair with ``y`` outside
  ``S`` stands for both orders and carries weight 2;
* far field: ``d(x, y) > D`` forces ``u(y) = 0``, leaving exactly
  ``2 int_S |u(x)|^p T(x, D) dm(x)`` with ``T`` the kernel's tail integral;
* core: pairs closer than ``r_min`` are not sampled; their contribution is
  bounded analytically and reported as a bias bound.

Each (shell, block) work item draws from its own keyed stream and results
are reduced in a fixed order, so estimates do not depend on the number of
worker threads.
"""

from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, NumericalError, UsageError
from .rng import default_workers, stream

LOG_TAIL_CUTOFF = np.log(1e16)
_GL16 = np.polynomial.legendre.leggauss(16)
_GL48 = np.polynomial.legendre.leggauss(48)


@dataclass
class Estimate:
    """Monte Carlo (or deterministic) value with its standard error."""

    value: float
    stderr: float
    samples: int
    breakdown: list | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rel_stderr(self):
        return self.stderr / abs(self.value) if self.value else np.inf

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples, **self.meta}


@dataclass(frozen=True)
class SamplingPlan:
    """How the near-field double integral is sampled.

    Parameters
    ----------
    total_samples : int
        Number of ``(x, y)`` pairs over all shells.
    shells : array_like, optional
        Explicit increasing shell edges; by default log-spaced from
        ``r_min_factor * R`` to ``far_factor * R`` with ``per_decade`` shells per
        decade (``R`` the support radius).
    inner : int
        ``y`` draws per outer ``x`` sample; the outer samples are the i.i.d. units.
    """

    total_samples: int = 1_000_000
    seed: int = 0
    shells: tuple | None = None
    per_decade: int = 4
    r_min_factor: float = 1e-6
    far_factor: float = 4.0
    inner: int = 1
    block_size: int = 1 << 14
    target_rel_stderr: float | None = None

    def __post_init__(self):
        if int(self.total_samples) < 1 or int(self.inner) < 1 or int(self.per_decade) < 1:
            raise UsageError("sample counts must be positive")
        if self.shells is not None:
            edges = np.asarray(self.shells, dtype=float)
            if edges.ndim != 1 or edges.size < 2 or edges[0] <= 0 or np.any(np.diff(edges) <= 0):
                raise UsageError("shell edges must be positive and strictly increasing")
            object.__setattr__(self, "shells", tuple(float(e) for e in edges))
        if not 0 < self.r_min_factor < 1:
            raise UsageError("r_min_factor must lie in (0, 1)")
        if self.far_factor < 2.0:
            raise UsageError("far_factor must be at least 2 (far pairs must leave the support)")

    def edges(self, support_radius, far=None):
        if self.shells is not None:
            return np.asarray(self.shells)
        r_max = self.far_factor * support_radius if far is None else far
        r_min = self.r_min_factor * support_radius
        k = max(1, int(np.ceil(self.per_decade * np.log10(r_max / r_min))))
        return np.geomspace(r_min, r_max, k + 1)

    def samples_per_shell(self, n_shells):
        return max(1, int(self.total_samples) // n_shells)

    @property
    def outer_samples(self):
        return max(1, int(self.total_samples) // int(self.inner))

    def scaled(self, factor):
        return replace(self, total_samples=max(1, int(round(self.total_samples * factor))))


# -- tail integrals -------------------------------------------------------------


def _log_volume_at(space, x, lr):
    model = space.power_model(x)
    if model is not None:
        c, n = model
        return np.log(c) + n * lr
    with np.errstate(over="ignore"):
        r = np.exp(np.minimum(lr, 700.0))
    return space.log_ball_volume(r, x)


def _closed_tail(space, profile, x, delta):
    from .mollifiers import ExponentialProfile, PowerProfile
    from .spaces import HyperbolicPlane

    model = space.power_model(x)
    if model is not None:
        c, n = model
        if isinstance(profile, PowerProfile):
            excess = profile.exponent - n
            if excess <= 0:
                raise NumericalError("tail integral diverges: kernel decays too slowly", excess=excess)
            return c * n * profile.a * delta ** (-excess) / excess
        if isinstance(profile, ExponentialProfile):
            b = profile.rate
            if b <= 0:
                raise NumericalError("tail integral diverges: nonpositive decay rate", rate=b)
            return c * n * profile.s * special.gamma(n) * special.gammaincc(n, b * delta) / b**n
    if isinstance(space, HyperbolicPlane):
        if isinstance(profile, ExponentialProfile):
            b = profile.rate
            if b <= 1.0:
                raise NumericalError("tail integral diverges: decay rate <= volume entropy", rate=b)
            return (
                np.pi
                * profile.s
                * (np.exp(-(b - 1.0) * delta) / (b - 1.0) - np.exp(-(b + 1.0) * delta) / (b + 1.0))
            )
        if isinstance(profile, PowerProfile):
            raise NumericalError("power kernels are not integrable against exponential volume growth")
    return None


def _cavalieri_tail(space, profile, x, delta):
    """``int_delta^inf V(t) (-rho'(t)) dt - V(delta) rho(delta)`` in ``w = log(t / delta)``."""
    ld = np.log(delta)
    probe = ld + np.linspace(0.0, 50.0, 201)
    with np.errstate(over="ignore", invalid="ignore"):
        der = profile.deriv(np.exp(np.minimum(probe, 700.0)))
    if np.any(der > 0):
        j = int(np.argmax(der > 0))
        raise UsageError(f"profile increases beyond delta (at r = {np.exp(probe[j]):.6g})")

    def log_g(w):
        lr = ld + np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return _log_volume_at(space, x, lr) + profile.log_neg_deriv(lr) + lr

    # locate the peak and the truncation point on an expanding grid
    w_hi = 64.0
    while True:
        grid = np.linspace(0.0, w_hi, 4097)
        lg = np.nan_to_num(log_g(grid), nan=-np.inf)
        peak = np.max(lg)
        if not np.isfinite(peak):
            raise NumericalError("tail integrand is not finite", delta=delta)
        below = np.nonzero((lg < peak - LOG_TAIL_CUTOFF) & (grid > grid[np.argmax(lg)]))[0]
        if below.size:
            w_max = grid[below[0]]
            break
        w_hi *= 4.0
        if w_hi > 1e6:
            raise NumericalError("tail truncation did not converge", delta=delta, w_max=w_hi)

    def g(w):
        return float(np.exp(log_g(w) - peak))

    pts = np.linspace(0.0, w_max, 33)[1:-1]
    val, err = integrate.quad(g, 0.0, w_max, points=pts, limit=500, epsabs=0.0, epsrel=1e-13)
    head = np.exp(_log_volume_at(space, x, ld) + profile.log_eval(delta))
    return float(np.exp(peak) * val - head)


def _polar_tail_sector(space, profile, x, delta):
    """Tail integral on a sector about a non-apex point, direction by direction."""
    from .mollifiers import ExponentialProfile, PowerProfile

    if isinstance(profile, PowerProfile):
        e = profile.exponent - 2.0
        if e <= 0:
            raise NumericalError("tail integral diverges: kernel decays too slowly", excess=e)

        def G(l):
            l = np.maximum(l, delta)
            with np.errstate(divide="ignore"):
                return profile.a * (delta ** (-e) - l ** (-e)) / e

    elif isinstance(profile, ExponentialProfile):
        b = profile.rate

        def prim(t):
            with np.errstate(invalid="ignore"):
                out = (1.0 + b * t) * np.exp(-b * t) / (b * b)
            return np.where(np.isinf(t), 0.0, out)

        def G(l):
            return profile.s * (prim(delta) - prim(np.maximum(l, delta)))

    else:

        def G(l):
            flat = np.ravel(l)
            out = np.empty(flat.size)
            for i, li in enumerate(flat):
                out[i] = (
                    integrate.quad(lambda t: float(profile.eval(t)) * t, delta, li, limit=200)[0]
                    if li > delta
                    else 0.0
                )
            return out.reshape(np.shape(l))

    return space.polar_integral(x, G, (delta,))


def tail_integral(space, profile, x, delta, method="auto"):
    """``int_{d(x, y) >= delta} rho(d(x, y)) dm(y)``.

    ``method`` is ``auto`` (closed form when the volume model and kernel
    allow, otherwise the layer-cake formula), ``closed``, ``cavalieri`` or
    ``polar`` (sector spaces about non-apex points).
    """
    from .spaces import Sector

    delta = float(delta)
    if not delta > 0:
        raise UsageError("delta must be positive")
    if x is not None:
        x = space.validate(x)
    if method in ("auto", "closed"):
        val = _closed_tail(space, profile, x, delta)
        if val is not None:
            return float(val)
        if method == "closed":
            raise UsageError("no closed form for this kernel on this space")
    if isinstance(space, Sector) and not space.is_basepoint(x):
        if method in ("auto", "polar"):
            return float(_polar_tail_sector(space, profile, x, delta))
    elif method == "polar":
        raise UsageError("polar tail integrals are only implemented for sectors")
    return _cavalieri_tail(space, profile, x, delta)


# -- shell-stratified Monte Carlo -------------------------------------------------


def _run(tasks, fn, workers):
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _blocks(n, block):
    out, b, done = [], 0, 0
    while done < n:
        m = min(block, n - done)
        out.append((b, m))
        done += m
        b += 1
    return out


@dataclass
class _Shell:
    lo: float
    hi: float
    units: int = 0
    draws: int = 0
    sums: np.ndarray = None  # per label: sum, sumsq; last row is the total
    halves: np.ndarray = None  # sum and sumsq of even / odd units


def _shell_summary(shell):
    n = shell.units
    s, ss = shell.sums[:, 0], shell.sums[:, 1]
    mean = s / n
    var = np.maximum(ss / n - mean**2, 0.0) * n / max(n - 1, 1)
    return mean, np.sqrt(var / n)


def double_integral_shellmc(space, sample_outer, integrand, edges, plan, workers=None, labels=1):
    """Stratified estimator of ``int_x int_{lo_k < d(x,y) <= hi_k} f(x, y) dm dm`` summed over shells.

    Parameters
    ----------
    sample_outer : callable
        ``(m, rng) -> (x, measure)``: ``m`` points from the outer region and its measure.
    integrand : callable
        ``(x, y, t, inside) -> values`` for repeated outer points ``x``, inner
        points ``y`` at distance ``t`` and the in-space mask; with
        ``labels > 1`` it returns ``(values, label)`` with integer labels.
    edges : array_like
        Shell edges ``r_0 < ... < r_K``.

    Returns
    -------
    Estimate
        With per-shell breakdown (and per-label totals in ``meta['labels']``).
    """
    edges = np.asarray(edges, dtype=float)
    k_shells = edges.size - 1
    per_shell = plan.samples_per_shell(k_shells)
    inner = int(plan.inner)
    units = max(2, per_shell // inner)
    tasks = [(k, b, m) for k in range(k_shells) for b, m in _blocks(units, plan.block_size)]

    def work(task):
        k, b, m = task
        lo, hi = edges[k], edges[k + 1]
        rng = stream(plan.seed, k, b)
        x, m_outer = sample_outer(m, rng)
        xr = np.repeat(x, inner, axis=0) if inner > 1 else x
        y, t, measure, inside = space.sample_annulus(xr, lo, hi, rng)
        res = integrand(xr, y, t, inside)
        if labels > 1:
            vals, lab = res
        else:
            vals, lab = res, np.zeros(len(res), dtype=int)
        scale = m_outer * measure
        out = np.zeros((labels + 1, 2))
        unit_tot = vals.reshape(m, inner).mean(axis=1) * scale
        for L in range(labels):
            u = np.where(lab == L, vals, 0.0).reshape(m, inner).mean(axis=1) * scale
            out[L] = (u.sum(), (u * u).sum())
        out[labels] = (unit_tot.sum(), (unit_tot * unit_tot).sum())
        # units alternate between the two half-samples (global unit index parity)
        first = b * plan.block_size
        even = ((np.arange(m) + first) % 2) == 0
        halves = np.array(
            [
                [unit_tot[even].sum(), (unit_tot[even] ** 2).sum(), even.sum()],
                [unit_tot[~even].sum(), (unit_tot[~even] ** 2).sum(), (~even).sum()],
            ]
        )
        return k, m, out, halves, bool(np.any(inside)) or measure > 0

    results = _run(tasks, work, workers)
    shells = [_Shell(edges[k], edges[k + 1], 0, 0, np.zeros((labels + 1, 2)), np.zeros((2, 3))) for k in range(k_shells)]
    for k, m, out, halves, _ in results:  # fixed order: shell, then block
        sh = shells[k]
        sh.units += m
        sh.draws += m * inner
        sh.sums += out
        sh.halves += halves
    breakdown, label_vals, label_var = [], np.zeros(labels), np.zeros(labels)
    half_vals, half_var = np.zeros(2), np.zeros(2)
    total = 0.0
    var = 0.0
    for sh in shells:
        mean, se = _shell_summary(sh)
        breakdown.append(
            {
                "shell_lo": float(sh.lo),
                "shell_hi": float(sh.hi),
                "contribution": float(mean[-1]),
                "stderr": float(se[-1]),
                "samples": int(sh.draws),
            }
        )
        total += mean[-1]
        var += se[-1] ** 2
        label_vals += mean[:-1]
        label_var += se[:-1] ** 2
        for h in range(2):
            s, ss, n = sh.halves[h]
            mu = s / n
            half_vals[h] += mu
            half_var[h] += max(ss / n - mu * mu, 0.0) / max(n - 1, 1)
    return Estimate(
        float(sum(row["contribution"] for row in breakdown)),
        float(np.sqrt(var)),
        int(sum(sh.draws for sh in shells)),
        breakdown,
        {
            "labels": [(float(v), float(np.sqrt(e))) for v, e in zip(label_vals, label_var)],
            "halves": [(float(v), float(np.sqrt(e))) for v, e in zip(half_vals, half_var)],
        },
    )


# -- seminorm ---------------------------------------------------------------------


def far_field(space, u, profile, p, far, workers=None):
    """``2 int_S |u|^p T(x, far) dm``: exact for homogeneous spaces, tensor quadrature otherwise."""
    from .spaces import Sector

    if space.homogeneous:
        norm = u.lp_norm(p)
        tail = tail_integral(space, profile, None, far)
        return 2.0 * tail * norm.value, 2.0 * tail * norm.stderr
    if not isinstance(space, Sector):
        raise UsageError(f"no far-field rule for {space.kind}")
    # polar coordinates about the center, restricted to the sector
    nodes, weights = _GL48
    R = u.support_radius
    r = 0.5 * R * (nodes + 1.0)
    wr = 0.5 * R * weights
    if space.is_basepoint(u.center):
        a0, a1 = 0.0, space.theta
    else:
        a0, a1 = 0.0, 2.0 * np.pi
    ang = a0 + 0.5 * (a1 - a0) * (nodes + 1.0)
    wa = 0.5 * (a1 - a0) * weights
    total = 0.0
    for ri, wri in zip(r, wr):
        pts = u.center + ri * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        ok = space.contains(pts)
        vals = np.abs(u.profile(ri * np.ones(ang.size))) ** p
        for j in np.nonzero(ok & (vals > 0))[0]:
            tail = tail_integral(space, profile, pts[j], far, method="polar")
            total += wri * wa[j] * ri * vals[j] * tail
    return 2.0 * total, 0.0


def _local_volume_derivative(space, t):
    from .spaces import Sector

    if isinstance(space, Sector):
        return 2.0 * np.pi * t  # a sector ball is contained in the full disk
    return space.ball_volume_derivative(t)


def core_bias_bound(space, u, profile, p, r_min):
    """Upper bound on the unsampled contribution of pairs with ``d(x, y) < r_min``.

    Lipschitz ``u``: ``Lip^p m(B(c, R + r_min)) int_0^r_min t^p rho(t) dV(t)``.
    Indicator: pairs closer than ``t`` straddling the boundary have ``x``
    within ``t`` of it, giving ``2 int_0^r_min (V(R + t) - V(R - t)) rho(t) dV(t)``.
    Returns ``inf`` when the bound diverges.
    """
    R = u.support_radius
    if u.kind == "indicator":
        jump = u.total_variation_jump**p
        # first-order collar for thin shells, where the volume difference cancels in floating point
        thin = 1e-6 * R
        edge = float(space.ball_volume_derivative(R + thin, u.center)) * (1.0 + 1e-6)

        def collar(t):
            if t < thin:
                return 2.0 * t * edge
            return float(space.ball_volume(R + t, u.center) - space.ball_volume(max(R - t, 0.0), u.center))

        def f(w):
            t = np.exp(w)
            return 2.0 * jump * collar(t) * float(profile.eval(t)) * float(_local_volume_derivative(space, t)) * t

    else:
        lip = u.lipschitz**p
        mass = float(space.ball_volume(R + r_min, u.center))

        def f(w):
            t = np.exp(w)
            return lip * mass * t**p * float(profile.eval(t)) * float(_local_volume_derivative(space, t)) * t

    w_hi = np.log(r_min)
    # integrable iff the integrand decays as w -> -inf; beyond the window the
    # decay is geometric, so the remainder is f(w_lo) / rate
    w_lo = w_hi - 60.0
    f0, f1 = f(w_lo), f(w_lo + 1.0)
    if f0 == 0.0:
        rem = 0.0
    elif not (np.isfinite(f0) and f0 < f1):
        return np.inf
    else:
        rem = f0 / np.log(f1 / f0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, w_lo, w_hi, limit=400, epsabs=0.0, epsrel=1e-8)
    return float(val + rem)


def _shell_slope(breakdown, decades=1.0):
    """Log-log slope of per-shell contributions over the lowest ``decades``."""
    lo = breakdown[0]["shell_lo"]
    rows = [b for b in breakdown if b["shell_hi"] <= lo * 10**decades * (1 + 1e-9)]
    r = np.array([np.sqrt(b["shell_lo"] * b["shell_hi"]) for b in rows])
    c = np.array([b["contribution"] for b in rows])
    keep = c > 0
    if keep.sum() < 2:
        return np.inf
    return float(np.polyfit(np.log(r[keep]), np.log(c[keep]), 1)[0])


@dataclass
class SeminormContext:
    """Geometry shared by the seminorm estimator and the decomposition diagnostic."""

    space: object
    u: object
    profile: object
    p: float
    far: float

    def sample_outer(self, m, rng):
        return self.space.sample_ball(self.u.center, self.u.support_radius, m, rng)

    def pair_values(self, x, y, t, inside):
        u = self.u
        ux = u.profile(u.center_distance(x))
        dy = u.center_distance(y)
        uy = np.where(inside, u.profile(dy), 0.0)
        weight = np.where(dy < u.support_radius, 1.0, 2.0)
        return np.where(inside, np.abs(ux - uy) ** self.p * self.profile.eval(t) * weight, 0.0)


def seminorm(space, u, profile, plan, p=None, workers=None, check=True):
    """Estimate ``E^p(u) = iint |u(x) - u(y)|^p rho(d(x, y)) dm dm``.

    Returns an :class:`Estimate` whose breakdown lists each distance shell
    and a final far-field row (stderr 0 when ball volumes are exact); the
    ``meta`` dict carries the core bias bound, the far-field value, the
    lowest-decade shell slope and the two half-sample estimates.

    Raises
    ------
    DivergenceError
        If the core bias bound is infinite, i.e. the pair integral is not
        finite near the diagonal (``u`` outside the seminorm's domain).
    UsageError
        If explicit shells do not reach ``2 R`` (far pairs must leave the support).
    """
    p = float(getattr(profile, "p", 2.0) if p is None else p)
    if u.amplitude == 0.0:
        return Estimate(0.0, 0.0, 0, [], {"far_field": 0.0, "core_bias_bound": 0.0})
    R = u.support_radius
    edges = plan.edges(R)
    far = float(edges[-1])
    if far < 2.0 * R * (1 - 1e-12):
        raise UsageError(f"shells end at {far:g} but must reach 2 x support radius = {2 * R:g}")
    ctx = SeminormContext(space, u, profile, p, far)
    near = double_integral_shellmc(space, ctx.sample_outer, ctx.pair_values, edges, plan, workers)
    far_val, far_err = far_field(space, u, profile, p, far, workers)
    bias = core_bias_bound(space, u, profile, p, float(edges[0]))
    slope = _shell_slope(near.breakdown)
    if check and not np.isfinite(bias):
        raise DivergenceError(
            "pair integral diverges near the diagonal", core_bias_bound=bias, lowest_decade_slope=slope
        )
    breakdown = near.breakdown + [
        {"shell_lo": far, "shell_hi": float("inf"), "contribution": far_val, "stderr": far_err, "samples": 0}
    ]
    value = float(sum(b["contribution"] for b in breakdown))
    halves = [(v + far_val, e) for v, e in near.meta["halves"]]
    return Estimate(
        value,
        float(np.hypot(near.stderr, far_err)),
        near.samples,
        breakdown,
        {
            "near_field": near.value,
            "far_field": far_val,
            "far_radius": far,
            "core_bias_bound": bias,
            "lowest_decade_slope": slope,
            "halves": halves,
        },
    )


@dataclass
class GateResult:
    passed: bool
    tau: float
    estimate: float
    lowest_decade_slope: float
    halves: list
    reason: str = ""

    def to_dict(self):
        return {
            "passed": self.passed,
            "tau": self.tau,
            "estimate": self.estimate,
            "lowest_decade_slope": self.lowest_decade_slope,
            "halves": self.halves,
            "reason": self.reason,
        }


def finiteness_gate(space, u, profile, plan, p=None, workers=None, slope_floor=-0.05):
    """Empirical check that ``E^p(u)`` is finite for a moderate-exponent profile.

    Passes when the core bias bound is finite, the lowest-decade shell
    contributions do not grow toward the diagonal (log-log slope above
    ``slope_floor``) and the two half-sample estimates agree within four
    combined standard errors.
    """
    try:
        est = seminorm(space, u, profile, plan, p=p, workers=workers, check=True)
    except DivergenceError as exc:
        return GateResult(False, float(profile.param), np.inf, exc.payload.get("lowest_decade_slope", np.nan), [], str(exc))
    slope = est.meta["lowest_decade_slope"]
    (h1, e1), (h2, e2) = est.meta["halves"]
    agree = abs(h1 - h2) <= 4.0 * np.hypot(e1, e2) + 1e-12 * abs(est.value)
    ok = slope >= slope_floor and agree
    reason = "" if ok else ("shell contributions grow toward the diagonal" if slope < slope_floor else "half-sample estimates disagree")
    return GateResult(bool(ok), float(profile.param), est.value, slope, [h1, h2], reason)


def breakdown_csv(estimate, out=None):
    """Per-shell breakdown as CSV text (columns shell_lo, shell_hi, contribution, stderr, samples)."""
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["shell_lo", "shell_hi", "contribution", "stderr", "samples"])
    for row in estimate.breakdown or []:
        w.writerow([repr(float(row["shell_lo"])), repr(float(row["shell_hi"])), repr(float(row["contribution"])), repr(float(row["stderr"])), int(row["samples"])])
    return buf.getvalue() if out is None else None
