"""Step maps and the trajectory driver.

Six one-step schemes share a common interface: classical explicit Euler and
Heun as baselines, the two exponential-modulation schemes (geco1, geco2)
whose step length is damped through the kernel ``phi``, and the two
product-term schemes (gbbks1, gbbks2) that restore positivity by solving a
scalar fixed-point equation for the factor multiplying the update.

All four nonstandard schemes conserve every linear invariant of the model
and keep iterates positive for any step size; the baselines conserve
invariants only.  Step maps are pure functions, so independent integrations
can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IntegrationError, ModelError, NumericsError, PosinvError, SolverError
from .pds import GeneralPds, LinearPds, destruction_rate_sum

SCHEME_IDS = ("euler", "heun", "geco1", "geco2", "gbbks1", "gbbks2")
POSITIVITY_PRESERVING = frozenset({"geco1", "geco2", "gbbks1", "gbbks2"})

#: Below this argument the direct formula for ``phi`` loses digits; switch to
#: the four-term series (next term is x^4/120 ~ 1e-22 relative at the cutoff).
_PHI_SERIES_CUTOFF = 1e-5


def phi(x: float) -> float:
    """Step-damping kernel (1 - exp(-x)) / x, continuously extended.

    Defined for x >= 0 with phi(0) = 1 and phi(inf) = 0; values lie in
    (0, 1].  Uses expm1 so no digits cancel for small x, and a short Taylor
    series below the cutoff where even expm1/x would round.
    """
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"phi argument must be nonnegative, got {x}")
    if math.isinf(x):
        return 0.0
    if x == 0.0:
        return 1.0
    if x < _PHI_SERIES_CUTOFF:
        return 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    return -math.expm1(-x) / x


def solve_tau(c, d, sigma, r: float) -> float:
    """Unique root of (prod_m (c_m + d_m*tau) / sigma_m)^r - tau = 0.

    Requires c_m > 0, d_m < 0, sigma_m > 0 and r > 0; the root lies in
    (0, tau_max) with tau_max = min_m c_m / (-d_m), where the left end gives
    a positive residual and the right end a negative one.  Bisection only:
    guaranteed bracket, interval tolerance 1e-15 * tau_max, residual
    tolerance 1e-14, at most 200 iterations.  An empty index set returns 1
    (empty product convention used by the callers).
    """
    c = tuple(float(v) for v in np.atleast_1d(np.asarray(c, dtype=float)))
    d = tuple(float(v) for v in np.atleast_1d(np.asarray(d, dtype=float)))
    sigma = tuple(float(v) for v in np.atleast_1d(np.asarray(sigma, dtype=float)))
    if len(c) == 0:
        return 1.0
    if not (len(c) == len(d) == len(sigma)):
        raise ValueError("c, d, sigma must have matching shapes")
    if min(c) <= 0.0 or max(d) >= 0.0 or min(sigma) <= 0.0 or not r > 0.0:
        raise ValueError("need c > 0, d < 0, sigma > 0, r > 0")
    r = float(r)

    tau_max = min(ci / -di for ci, di in zip(c, d))

    def residual(tau: float) -> float:
        prod = 1.0
        for ci, di, si in zip(c, d, sigma):
            factor = (ci + di * tau) / si
            if factor <= 0.0:
                # past the first zero of the product; the true residual is negative
                return -tau
            prod *= factor
        return prod**r - tau

    def polish(tau: float, lo: float, hi: float) -> float:
        # Newton refinement of the bisection answer; any step leaving the
        # bracket falls back to the bracketed value
        for _ in range(3):
            prod = 1.0
            slope_sum = 0.0
            bad = False
            for ci, di, si in zip(c, d, sigma):
                num = ci + di * tau
                if num <= 0.0:
                    bad = True
                    break
                prod *= num / si
                slope_sum += di / num
            if bad:
                break
            p = prod**r
            slope = p * r * slope_sum - 1.0
            candidate = tau - (p - tau) / slope
            if not lo < candidate < hi:
                break
            tau = candidate
        return tau

    lo, hi = 0.0, tau_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = residual(mid)
        if g == 0.0:
            return mid
        if g > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * tau_max:
            return polish(0.5 * (lo + hi), lo, hi)
    # the interval criterion is reachable in ~50 sweeps; accept a residual-level
    # answer at the cap only if it meets the residual tolerance
    mid = polish(0.5 * (lo + hi), lo, hi)
    if abs(residual(mid)) <= 1e-14:
        return mid
    raise SolverError(
        "product-term solve did not reach tolerance in 200 iterations",
        bracket=(lo, hi),
        residual=residual(mid),
    )


def _positive_vector(y) -> np.ndarray:
    return np.asarray(y, dtype=float)


@dataclass(frozen=True)
class GbbksStrategy:
    """Free parameters of the product-term schemes, as functions of the state.

    ``sigma`` receives the current state and, for the two-stage scheme, the
    inner stage; ``pi`` and ``q`` parametrize the inner stage only.  Outputs
    must be strictly positive wherever the scheme consults them, and sigma
    and pi must reproduce the state on steady states (sigma(v, v) = pi(v) = v
    whenever A v = 0); the shipped presets satisfy both.
    """

    sigma: Callable[[np.ndarray, np.ndarray | None], np.ndarray]
    r: Callable[[np.ndarray], float]
    pi: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], float]
    name: str = "custom"

    @classmethod
    def bbks1(cls) -> "GbbksStrategy":
        """Classic first-order preset: sigma_m = y_m, r = 1."""
        return cls(
            sigma=lambda y, y2=None: _positive_vector(y),
            r=lambda y: 1.0,
            pi=lambda y: _positive_vector(y),
            q=lambda y: 1.0,
            name="bbks1",
        )

    @classmethod
    def bbks2(cls, alpha: float) -> "GbbksStrategy":
        """Classic second-order preset: pi = y, sigma_m = y_m^(1-1/a) * y2_m^(1/a), q = r = 1."""
        alpha = float(alpha)
        e1, e2 = 1.0 - 1.0 / alpha, 1.0 / alpha

        def sigma(y, y2):
            y = _positive_vector(y)
            y2 = _positive_vector(y2)
            return np.power(y, e1) * np.power(y2, e2)

        return cls(
            sigma=sigma,
            r=lambda y: 1.0,
            pi=lambda y: _positive_vector(y),
            q=lambda y: 1.0,
            name=f"bbks2({alpha:g})",
        )


@dataclass(frozen=True)
class SchemeSpec:
    """A scheme identifier plus the parameters some schemes need."""

    id: str
    alpha: float | None = None
    strategy: GbbksStrategy | None = None

    def __post_init__(self):
        if self.id not in SCHEME_IDS:
            raise ValueError(f"unknown scheme {self.id!r}; known: {SCHEME_IDS}")
        if self.id == "gbbks2":
            if self.alpha is None or not self.alpha >= 0.5:
                raise ValueError("gbbks2 requires alpha >= 1/2")
        if self.id in ("gbbks1", "gbbks2") and self.strategy is None:
            raise ValueError(f"{self.id} requires a parameter strategy")

    @property
    def positivity_preserving(self) -> bool:
        return self.id in POSITIVITY_PRESERVING


def make_scheme(name: str, alpha: float | None = None) -> SchemeSpec:
    """Scheme with the standard preset strategy; alpha applies to gbbks2 only."""
    if name == "gbbks1":
        return SchemeSpec("gbbks1", strategy=GbbksStrategy.bbks1())
    if name == "gbbks2":
        a = 1.0 if alpha is None else float(alpha)
        return SchemeSpec("gbbks2", alpha=a, strategy=GbbksStrategy.bbks2(a))
    if alpha is not None:
        raise ValueError(f"scheme {name!r} does not take alpha")
    return SchemeSpec(name)


@dataclass(frozen=True)
class StepOutcome:
    """One step of a scheme: the new state plus solver diagnostics.

    ``tau`` is the product-term factor of the gbbks schemes (1 whenever the
    active set was empty or the scheme has no product term); ``phi_args``
    records the damping-kernel arguments and flags of the geco schemes.
    The state is guaranteed finite and tau positive.
    """

    next_state: np.ndarray
    tau: float = 1.0
    phi_args: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.next_state)):
            raise NumericsError("scheme produced a non-finite state")
        if not self.tau > 0.0:
            raise NumericsError(f"product-term factor must be positive, got {self.tau}")


def _rhs(model, y: np.ndarray) -> np.ndarray:
    if isinstance(model, LinearPds):
        return model.a @ y
    f = np.asarray(model.rhs(y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise ModelError("right-hand side returned non-finite values")
    return f


def _check_step(y, dt: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not (np.isfinite(dt) and dt > 0.0):
        raise ValueError(f"step size must be positive and finite, got {dt}")
    if not np.all(np.isfinite(y)):
        raise ValueError("state has non-finite entries")
    return y


def euler_step(model, y, dt: float) -> StepOutcome:
    y = _check_step(y, dt)
    return StepOutcome(y + dt * _rhs(model, y))


def heun_step(model, y, dt: float) -> StepOutcome:
    y = _check_step(y, dt)
    f1 = _rhs(model, y)
    f2 = _rhs(model, y + dt * f1)
    return StepOutcome(y + dt * (0.5 * f1 + 0.5 * f2))


def geco1_step(model, y, dt: float) -> StepOutcome:
    """First-order damped step y + dt*phi(dt*sum d_j)*f(y).

    For linear models the damping argument is trace(S-) exactly, so the step
    is (I + Phi(dt) A) y and remains well defined on the boundary of the
    positive orthant.
    """
    y = _check_step(y, dt)
    arg = dt * destruction_rate_sum(model, y)
    factor = dt * phi(arg)
    nxt = y + factor * _rhs(model, y)
    return StepOutcome(nxt, phi_args={"arg": arg})


def geco2_step(model, y, dt: float) -> StepOutcome:
    """Second-order damped step built on a geco1 inner stage.

    The outer damping argument is dt * sum_i max(w_i, 0)/y_i; vanishing
    numerators contribute nothing regardless of y_i, and a positive numerator
    over a zero component drives the argument to +inf, where the kernel's
    continuous limit 0 freezes the state for this step (flagged in
    ``phi_args['degenerate']``).
    """
    y = _check_step(y, dt)
    inner = geco1_step(model, y, dt)
    y2 = inner.next_state
    f1 = _rhs(model, y)
    f2 = _rhs(model, y2)
    w = 2.0 * phi(inner.phi_args["arg"]) * f1 - f1 - f2

    w_plus = np.maximum(w, 0.0)
    active = w_plus > 0.0
    degenerate = bool(np.any(active & (y == 0.0)))
    if degenerate:
        arg = math.inf
    else:
        arg = dt * float(np.sum(w_plus[active] / y[active]))
    nxt = y + 0.5 * dt * phi(arg) * (f1 + f2)
    return StepOutcome(
        nxt,
        phi_args={"arg": arg, "inner_arg": inner.phi_args["arg"], "degenerate": degenerate},
    )


def _active_solve(y, slope, sigma_full, r: float, label: str) -> float:
    """Solve the product-term equation over the active set {m : slope_m < 0}."""
    active = slope < 0.0
    if not np.any(active):
        return 1.0
    sigma = np.asarray(sigma_full, dtype=float)[active]
    if np.any(sigma <= 0.0) or np.any(~np.isfinite(sigma)):
        raise ModelError(f"{label}: strategy returned nonpositive sigma on the active set")
    c = y[active]
    if np.any(c <= 0.0):
        raise ModelError(f"{label}: state component in the active set is not positive")
    if not r > 0.0:
        raise ModelError(f"{label}: strategy exponent must be positive")
    return solve_tau(c, slope[active], sigma, r)


def gbbks1_step(model, y, dt: float, strategy: GbbksStrategy) -> StepOutcome:
    """First-order product-term step; reduces to Euler when f(y) >= 0."""
    y = _check_step(y, dt)
    f = _rhs(model, y)
    tau = _active_solve(y, dt * f, strategy.sigma(y, None), float(strategy.r(y)), "gbbks1")
    return StepOutcome(y + dt * f * tau, tau=tau)


def gbbks2_step(model, y, dt: float, alpha: float, strategy: GbbksStrategy) -> StepOutcome:
    """Two-stage product-term step; reduces to Heun when both active sets are empty."""
    y = _check_step(y, dt)
    if not alpha >= 0.5:
        raise ValueError("gbbks2 requires alpha >= 1/2")
    f1 = _rhs(model, y)
    tau_inner = _active_solve(
        y, (alpha * dt) * f1, strategy.pi(y), float(strategy.q(y)), "gbbks2 inner"
    )
    y2 = y + (alpha * dt) * f1 * tau_inner
    f2 = _rhs(model, y2)
    fbar = (1.0 - 1.0 / (2.0 * alpha)) * f1 + (1.0 / (2.0 * alpha)) * f2
    tau = _active_solve(y, dt * fbar, strategy.sigma(y, y2), float(strategy.r(y)), "gbbks2")
    return StepOutcome(y + dt * fbar * tau, tau=tau, phi_args={"tau_inner": tau_inner})


def step(model, scheme: SchemeSpec, y, dt: float) -> StepOutcome:
    """Apply one step of ``scheme`` to ``y``."""
    if scheme.id == "euler":
        return euler_step(model, y, dt)
    if scheme.id == "heun":
        return heun_step(model, y, dt)
    if scheme.id == "geco1":
        return geco1_step(model, y, dt)
    if scheme.id == "geco2":
        return geco2_step(model, y, dt)
    if scheme.id == "gbbks1":
        return gbbks1_step(model, y, dt, scheme.strategy)
    if scheme.id == "gbbks2":
        return gbbks2_step(model, y, dt, scheme.alpha, scheme.strategy)
    raise ValueError(f"unknown scheme {scheme.id!r}")


def step_map(model, scheme: SchemeSpec, dt: float) -> Callable[[np.ndarray], np.ndarray]:
    """The map y -> next state, for Jacobian probes and fixed-point studies."""

    def apply(y: np.ndarray) -> np.ndarray:
        return step(model, scheme, y, dt).next_state

    return apply


@dataclass
class Trajectory:
    """Ordered iterates with per-step conservation and positivity diagnostics.

    ``invariant_defect[n]`` is the largest relative drift of any linear
    invariant between state n and the initial state; ``min_component[n]`` is
    the smallest entry of state n.  Time of state n is n * dt.
    """

    dt: float
    states: list[np.ndarray]
    invariant_defect: list[float]
    min_component: list[float]

    @property
    def times(self) -> list[float]:
        return [n * self.dt for n in range(len(self.states))]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)


def _invariant_reference(model, y0):
    rows = getattr(model, "invariant_rows", None)
    if rows is None or len(rows) == 0:
        return None, None, 1.0
    rows = np.asarray(rows, dtype=float)
    ref = rows @ y0
    scale = max(float(np.max(np.abs(ref))), 1e-300)
    return rows, ref, scale


def integrate(model, scheme: SchemeSpec, y0, dt: float, n_steps: int) -> Trajectory:
    """Run ``n_steps`` applications of the scheme's step map.

    A failing step raises :class:`IntegrationError` carrying the trajectory
    up to the failure and the underlying cause.
    """
    y0 = np.asarray(y0, dtype=float)
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    rows, ref, scale = _invariant_reference(model, y0)
    traj = Trajectory(
        dt=dt,
        states=[y0],
        invariant_defect=[0.0],
        min_component=[float(np.min(y0))],
    )
    y = y0
    for n in range(n_steps):
        try:
            # non-finite states are detected and raised on the following step,
            # so hardware overflow warnings carry no extra information here
            with np.errstate(over="ignore", invalid="ignore"):
                y = step(model, scheme, y, dt).next_state
        except (PosinvError, ValueError) as exc:
            raise IntegrationError(
                f"step {n + 1} of {scheme.id} failed: {exc}", trajectory=traj, cause=exc
            ) from exc
        if rows is None:
            defect = 0.0
        else:
            with np.errstate(invalid="ignore", over="ignore"):
                defect = float(np.max(np.abs(rows @ y - ref))) / scale
        traj.states.append(y)
        traj.invariant_defect.append(defect)
        traj.min_component.append(float(np.min(y)))
    return traj
