"""Radial mollifier families and an empirical checker for their structural assumptions.

A family is a sequence of radial profiles ``rho_n(r)`` indexed by a small
parameter that decreases to zero along the schedule.  Two closed-form
families are provided:

* power law ``a / r^(N + a p)`` with schedule ``a_n``;
* exponential ``s / exp((h + s) r)`` with schedule ``s_n``.

The checker evaluates, on finite grids, the three structural properties a
family must have for the small-parameter limit of the seminorm to exist:
radial monotonicity plus monotone decay in ``n`` (item 1), monotone ratios
``rho_n / rho_m`` for ``n > m`` (item 2), and a finite iterated limit of tail
integrals (item 3).  Existential thresholds are detected, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import StateError, UsageError

# item-3 grid of cut-off radii
TAIL_DELTAS = (10.0, 30.0, 100.0, 300.0)
# relative slack for monotonicity comparisons (floating-point noise)
MONO_RTOL = 1e-12


def _radii(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise UsageError("profile radius must be positive")
    return r


class RadialProfile:
    """A positive kernel ``r -> rho(r)`` on ``(0, inf)`` with its derivative."""

    kind = "abstract"
    param = np.nan

    def eval(self, r):
        raise NotImplementedError

    def deriv(self, r):
        raise NotImplementedError

    def log_eval(self, r):
        with np.errstate(divide="ignore"):
            return np.log(self.eval(r))

    def log_neg_deriv(self, lr):
        """``log(-rho'(r))`` as a function of ``lr = log r`` (no overflow in ``r``)."""
        with np.errstate(over="ignore", divide="ignore"):
            return np.log(-self.deriv(np.exp(lr)))

    def __call__(self, r):
        return self.eval(r)


@dataclass(frozen=True)
class PowerProfile(RadialProfile):
    """``a / r^(N + a p)``."""

    N: float
    p: float
    a: float
    kind = "power"

    @property
    def param(self):
        return self.a

    @property
    def exponent(self):
        return self.N + self.a * self.p

    def eval(self, r):
        return self.a * _radii(r) ** (-self.exponent)

    def deriv(self, r):
        r = _radii(r)
        return -self.exponent * self.a * r ** (-self.exponent - 1.0)

    def log_eval(self, r):
        return np.log(self.a) - self.exponent * np.log(_radii(r))

    def log_neg_deriv(self, lr):
        return np.log(self.exponent * self.a) - (self.exponent + 1.0) * np.asarray(lr, dtype=float)


@dataclass(frozen=True)
class ExponentialProfile(RadialProfile):
    """``s / exp((h + s) r)``."""

    h: float
    p: float
    s: float
    kind = "exponential"

    @property
    def param(self):
        return self.s

    @property
    def rate(self):
        return self.h + self.s

    def eval(self, r):
        return self.s * np.exp(-self.rate * _radii(r))

    def deriv(self, r):
        return -self.rate * self.eval(r)

    def log_eval(self, r):
        return np.log(self.s) - self.rate * _radii(r)

    def log_neg_deriv(self, lr):
        with np.errstate(over="ignore"):
            return np.log(self.rate * self.s) - self.rate * np.exp(np.asarray(lr, dtype=float))


@dataclass(frozen=True)
class CustomProfile(RadialProfile):
    """User-supplied profile; the derivative must be given explicitly."""

    f: Callable
    df: Callable
    param: float = np.nan
    kind = "custom"

    def eval(self, r):
        return np.asarray(self.f(_radii(r)), dtype=float)

    def deriv(self, r):
        return np.asarray(self.df(_radii(r)), dtype=float)


def validate_schedule(schedule):
    """Strictly positive, non-increasing, finite; returned as a float array."""
    sched = np.asarray(schedule, dtype=float)
    if sched.ndim != 1 or sched.size == 0:
        raise UsageError("schedule must be a non-empty list of numbers")
    if np.any(~np.isfinite(sched)) or np.any(sched <= 0):
        raise UsageError("schedule entries must be strictly positive")
    bad = np.nonzero(np.diff(sched) > 0)[0]
    if bad.size:
        i = int(bad[0])
        raise UsageError(
            f"schedule must be non-increasing: entry {i + 1} ({sched[i + 1]}) > entry {i} ({sched[i]})"
        )
    return sched


def schedule_from_rule(rule):
    """Expand a schedule rule dict.

    ``{"type": "geometric", "start": a0, "ratio": q, "length": n}`` gives
    ``a0 q^k``; ``{"type": "harmonic", "start": a0, "length": n}`` gives
    ``a0 / k`` for ``k = 1..n``.
    """
    kind = rule.get("type")
    n = int(rule.get("length", 0))
    if n < 1:
        raise UsageError("schedule rule needs length >= 1")
    a0 = float(rule.get("start", 1.0))
    if kind == "geometric":
        q = float(rule["ratio"])
        if not 0 < q <= 1:
            raise UsageError("geometric ratio must lie in (0, 1]")
        return a0 * q ** np.arange(n)
    if kind == "harmonic":
        return a0 / np.arange(1, n + 1)
    raise UsageError(f"unknown schedule rule {kind!r}")


@dataclass(frozen=True)
class MollifierFamily:
    """An indexed sequence of radial profiles.

    ``kind`` is ``power``, ``exponential`` or ``custom``.  Power and
    exponential families carry a validated schedule; custom families hold an
    explicit profile list (which is what the checker is for).
    """

    kind: str
    p: float
    profiles: tuple
    schedule: np.ndarray
    N: float | None = None
    h: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def power_law(cls, N, p, schedule):
        N, p = float(N), float(p)
        if not (N > 0 and p > 1):
            raise UsageError("power family needs N > 0 and p > 1")
        sched = validate_schedule(schedule)
        return cls("power", p, tuple(PowerProfile(N, p, a) for a in sched), sched, N=N)

    @classmethod
    def exponential(cls, h, p, schedule):
        h, p = float(h), float(p)
        if not (h >= 0 and p > 1):
            raise UsageError("exponential family needs h >= 0 and p > 1")
        sched = validate_schedule(schedule)
        return cls("exponential", p, tuple(ExponentialProfile(h, p, s) for s in sched), sched, h=h)

    @classmethod
    def custom(cls, profiles: Sequence[RadialProfile], p, N=None, h=None):
        """Any profile list; the schedule is whatever parameters the profiles carry."""
        profiles = tuple(profiles)
        if not profiles:
            raise UsageError("custom family needs at least one profile")
        if not float(p) > 1:
            raise UsageError("p must exceed 1")
        sched = np.array([float(getattr(q, "param", np.nan)) for q in profiles])
        return cls("custom", float(p), profiles, sched, N=N, h=h)

    def __len__(self):
        return len(self.profiles)

    def profile(self, n):
        if not 0 <= n < len(self.profiles):
            raise UsageError(f"index {n} outside the schedule (length {len(self.profiles)})")
        return self.profiles[n]

    def with_param(self, value):
        """The profile of this family's closed form at parameter ``value``."""
        if self.kind == "power":
            return PowerProfile(self.N, self.p, float(value))
        if self.kind == "exponential":
            return ExponentialProfile(self.h, self.p, float(value))
        base = self.profiles[0]
        if isinstance(base, PowerProfile):
            return PowerProfile(base.N, base.p, float(value))
        if isinstance(base, ExponentialProfile):
            return ExponentialProfile(base.h, base.p, float(value))
        raise UsageError("custom families cannot be re-parametrized")

    def extended(self, floor, ratio=0.5):
        """Continue the schedule geometrically until the parameter drops below ``floor``.

        Used to approximate ``n -> inf`` in item 3.  Only closed-form families
        (or custom families built from one closed form) can be extended;
        otherwise the family is returned unchanged.
        """
        try:
            self.with_param(1.0)
        except UsageError:
            return self
        last = float(self.schedule[-1])
        extra = []
        while last > floor:
            last *= ratio
            extra.append(last)
        if not extra:
            return self
        profiles = self.profiles + tuple(self.with_param(a) for a in extra)
        return replace(self, profiles=profiles, schedule=np.concatenate([self.schedule, extra]))

    def describe(self):
        out = {"kind": self.kind, "p": self.p, "schedule": [float(a) for a in self.schedule]}
        if self.N is not None:
            out["N"] = self.N
        if self.h is not None:
            out["h"] = self.h
        return out


def eval_profile(family, n, r):
    """``rho_n(r)``; ``r`` must be positive."""
    return family.profile(n).eval(_radii(r))


# -- assumption checker ------------------------------------------------------


@dataclass
class Verdict:
    passed: bool
    witness: dict | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"passed": bool(self.passed), "witness": self.witness, **self.detail}


@dataclass
class AssumptionReport:
    radial_monotone: Verdict
    n_monotone_tail: Verdict
    pointwise_limit_zero: Verdict
    ratio_monotone: Verdict
    tail_limit: Verdict
    tail_limit_estimate: float
    tail_table: list
    thresholds: dict
    small_r_notes: list = field(default_factory=list)

    @property
    def overall(self):
        return all(
            v.passed
            for v in (
                self.radial_monotone,
                self.n_monotone_tail,
                self.pointwise_limit_zero,
                self.ratio_monotone,
                self.tail_limit,
            )
        )

    def failures(self):
        names = ("radial_monotone", "n_monotone_tail", "pointwise_limit_zero", "ratio_monotone", "tail_limit")
        return {k: getattr(self, k).witness for k in names if not getattr(self, k).passed}

    def to_dict(self):
        return {
            "overall": self.overall,
            "radial_monotone": self.radial_monotone.to_dict(),
            "n_monotone_tail": self.n_monotone_tail.to_dict(),
            "pointwise_limit_zero": self.pointwise_limit_zero.to_dict(),
            "ratio_monotone": self.ratio_monotone.to_dict(),
            "tail_limit": self.tail_limit.to_dict(),
            "tail_limit_estimate": self.tail_limit_estimate,
            "tail_table": self.tail_table,
            "thresholds": self.thresholds,
            "small_r_notes": self.small_r_notes,
        }


def default_index_pairs(n):
    """Consecutive pairs plus widely separated ones, as ``(n, m)`` with ``n > m``."""
    pairs = {(i + 1, i) for i in range(n - 1)}
    for m in (0, n // 4, n // 2):
        for k in (n - 1, (n - 1 + m) // 2):
            if k > m:
                pairs.add((k, m))
    return sorted(pairs)


def _log_table(family, r_grid):
    return np.array([q.log_eval(r_grid) for q in family.profiles])


def _check_radial(logs, r_grid):
    # rows where log rho increases somewhere along r
    inc = np.diff(logs, axis=1) > MONO_RTOL * np.maximum(1.0, np.abs(logs[:, :-1]))
    bad_rows = np.nonzero(inc.any(axis=1))[0]
    n0 = int(bad_rows.max()) + 1 if bad_rows.size else 0
    n = logs.shape[0]
    passed = n0 < n
    witness = None
    if bad_rows.size:
        i = int(bad_rows.max())
        j = int(np.nonzero(inc[i])[0][0])
        witness = {"n": i, "r": [float(r_grid[j]), float(r_grid[j + 1])]}
    return Verdict(passed, None if passed else witness, {"n0": n0, "last_violation": witness}), n0


def _check_n_monotone(logs, r_grid, params, n0, tail_len):
    """Item 1, monotonicity in ``n`` and decay to zero beyond a detected ``r1``.

    For each radius the smallest index from which ``rho_n(r)`` is
    non-increasing in ``n`` is found.  The radius passes if that tail covers
    the last ``tail_len`` indices and ``log rho_n(r)`` falls with ``log param``
    at slope >= 0.1 over it (so the values tend to 0).  ``r1`` is the largest
    failing grid radius; the verdict passes when the radii beyond it cover at
    least a quarter of the grid.
    """
    n = logs.shape[0]
    need = max(n - tail_len, n0)
    up = np.diff(logs, axis=0) > MONO_RTOL * np.maximum(1.0, np.abs(logs[:-1]))
    start = np.zeros(r_grid.size, dtype=int)
    for j in range(r_grid.size):
        bad = np.nonzero(up[:, j])[0]
        start[j] = int(bad.max()) + 1 if bad.size else 0
    mono_ok = start <= need
    lp = np.log(params[need:])
    slope = np.full(r_grid.size, np.nan)
    if n - need >= 2 and np.ptp(lp) > 0:
        slope = np.polyfit(lp, logs[need:], 1)[0]
    zero_ok = slope >= 0.1
    bad_idx = np.nonzero(~(mono_ok & zero_ok))[0]
    k1 = int(bad_idx.max()) + 1 if bad_idx.size else 0
    r1 = 0.0 if k1 == 0 else float(r_grid[k1 - 1])
    enough = r_grid.size - k1 >= max(2, r_grid.size // 4)
    detail = {"r1": r1, "tail_from_index": int(need)}

    def witness(ok, extra):
        idx = np.nonzero(~ok)[0]
        if enough or idx.size == 0:
            return None
        j = int(idx[-1])
        return {"r": float(r_grid[j]), **extra(j)}

    mono_w = witness(mono_ok, lambda j: {"n": int(start[j]), "m": int(start[j]) - 1})
    zero_w = witness(zero_ok, lambda j: {"slope_vs_param": float(slope[j])})
    mono_pass = enough or bool(np.all(mono_ok))
    zero_pass = enough or bool(np.all(zero_ok))
    return Verdict(mono_pass, mono_w, detail), Verdict(zero_pass, zero_w, {"r1": r1}), r1


def _check_ratio(logs, r_grid, pairs):
    """Item 2: ``rho_n / rho_m`` non-decreasing on ``(r0, inf)`` for ``n > m``."""
    last_bad = -1
    witness = None
    for n, m in pairs:
        lr = logs[n] - logs[m]
        dec = np.diff(lr) < -MONO_RTOL * np.maximum(1.0, np.abs(lr[:-1]))
        idx = np.nonzero(dec)[0]
        if idx.size and idx.max() > last_bad:
            last_bad = int(idx.max())
            j = last_bad
            witness = {
                "n": int(n),
                "m": int(m),
                "r": [float(r_grid[j]), float(r_grid[j + 1])],
                "ratio": [float(np.exp(lr[j])), float(np.exp(lr[j + 1]))],
            }
    k0 = last_bad + 1
    r0 = 0.0 if k0 == 0 else float(r_grid[k0])
    # the property must hold on a nontrivial tail of the grid (at least a decade)
    passed = k0 == 0 or (k0 < r_grid.size - 1 and r_grid[-1] / r_grid[k0] >= 10.0)
    return Verdict(passed, None if passed else witness, {"r0": r0, "last_violation": witness})


def _tail_table(family, space, deltas, x=None):
    """Item 3: tail integrals over ``(delta, n)`` and their ``n -> inf`` extrapolation."""
    from .asymptotics import extrapolate
    from .quadrature import tail_integral

    ext = family.extended(floor=1e-5 / max(deltas))
    rows = []
    limits = []
    for delta in deltas:
        vals = [tail_integral(space, q, x, delta) for q in ext.profiles]
        params = ext.schedule
        tail = slice(max(0, len(vals) - 5), len(vals))
        if np.all(np.isfinite(params[tail])) and len(vals) >= 3:
            lim, unc = extrapolate(list(zip(params[tail], vals[tail], [0.0] * len(vals[tail]))))
        else:
            lim, unc = vals[-1], np.nan
        limits.append(lim)
        rows.append(
            {
                "delta": float(delta),
                "params": [float(a) for a in params],
                "values": [float(v) for v in vals],
                "limit_n": float(lim),
                "uncertainty": float(unc),
            }
        )
    return rows, np.asarray(limits)


def default_check_space(family):
    from .spaces import Euclidean, HyperbolicPlane

    if family.kind == "exponential" or isinstance(family.profiles[0], ExponentialProfile):
        return HyperbolicPlane()
    n = family.N if family.N is not None else getattr(family.profiles[0], "N", 1)
    return Euclidean(max(1, int(round(n))))


def check_assumptions(family, r_grid=None, index_pairs=None, space=None, deltas=TAIL_DELTAS):
    """Evaluate items 1-3 on finite grids; failures are verdicts with witnesses.

    Parameters
    ----------
    family : MollifierFamily
    r_grid : array_like, optional
        Log-spaced radii spanning at least four decades (default ``1e-3..1e3``).
    index_pairs : list of (n, m), optional
        Pairs with ``n > m`` for the ratio test; defaults to consecutive and
        widely separated indices.
    space : MetricMeasureSpace, optional
        Space for the tail-integral table (default: Euclidean(N) for power
        kernels, the hyperbolic plane for exponential ones).
    """
    r_grid = np.sort(_radii(np.logspace(-3, 3, 121) if r_grid is None else r_grid))
    if r_grid[-1] / r_grid[0] < 1e4 * (1 - 1e-12):
        raise UsageError("r_grid must span at least four decades")
    n = len(family)
    if n < 2:
        raise UsageError("need at least two profiles to check monotonicity in n")
    pairs = default_index_pairs(n) if index_pairs is None else [(int(a), int(b)) for a, b in index_pairs]
    for a, b in pairs:
        if not (0 <= b < a < n):
            raise UsageError(f"index pair {(a, b)} must satisfy 0 <= m < n < {n}")
    # n -> inf behaviour at radius r needs parameters well below 1 / (p r)
    ext = family.extended(floor=1.0 / (100.0 * family.p * r_grid[-1]))
    extended = len(ext) > n
    logs = _log_table(ext, r_grid)
    params = np.asarray(ext.schedule, dtype=float)
    if np.any(~np.isfinite(params)) or np.any(params <= 0):
        params = 1.0 / np.arange(1, len(ext) + 1)
    tail_len = 4 if extended else max(2, n // 4)

    # underflowed profiles give -inf logs; their differences are nan and compare false
    with np.errstate(invalid="ignore"):
        radial, n0 = _check_radial(logs, r_grid)
        mono, zero, r1 = _check_n_monotone(logs, r_grid, params, n0, tail_len)
        ratio = _check_ratio(logs[:n], r_grid, pairs)

    notes = []
    if r1 > r_grid[0]:
        small = r_grid[r_grid <= r1]
        peak = float(np.max(logs[:, : small.size]))
        notes.append({"r1": r1, "max_log_rho_below_r1": peak})

    space = default_check_space(family) if space is None else space
    if ratio.passed and radial.passed:
        rows, limits = _tail_table(family, space, deltas)
        finite = np.all(np.isfinite(limits))
        settled = finite and abs(limits[-1] - limits[-2]) <= 1e-3 * max(abs(limits[-1]), 1e-12) + 1e-12
        est = float(limits[-1]) if finite else float("inf")
        tail = Verdict(
            bool(settled),
            None if settled else {"deltas": list(deltas), "limits": [float(v) for v in limits]},
            {"space": space.describe()},
        )
    else:
        rows, est = [], float("nan")
        tail = Verdict(False, {"reason": "skipped: items 1-2 failed"}, {})
    return AssumptionReport(
        radial,
        mono,
        zero,
        ratio,
        tail,
        est,
        rows,
        {"n0": n0, "r0": ratio.detail["r0"], "r1": r1},
        notes,
    )


def predicted_L(family, space, radii=None):
    """Structural constant predicted for ``family`` on ``space``.

    Power law: ``(N / p) AVR`` with the AVR estimated on ``space``.
    Exponential: the volume entropy ``h`` estimated on ``space``.
    Custom: the tail-limit estimate of :func:`check_assumptions`.
    """
    from .asymptotics import estimate_avr, estimate_entropy

    if family.kind == "power":
        est = estimate_avr(space, None, family.N, radii)
        if est.flag == "infinite":
            raise UsageError("AVR is infinite for this space; the power constant is not finite")
        if est.value is None:
            raise StateError("AVR estimate unavailable")
        return family.N / family.p * est.value
    if family.kind == "exponential":
        return estimate_entropy(space, None, radii).value
    return check_assumptions(family, space=space).tail_limit_estimate
