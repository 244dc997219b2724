"""Fixed-point stability toolkit for the schemes on linear models.

The positivity-preserving schemes generate nonlinear maps even on linear
problems, but at a positive steady state their Jacobians have closed forms:

==========  =====================================  =========================
scheme      Jacobian at the steady state           scalar stability value
==========  =====================================  =========================
euler       I + dt*A                               1 + z
gbbks1      I + dt*A                               1 + z
heun        I + dt*A + dt^2/2 * A^2                1 + z + z^2/2
gbbks2      I + dt*A + dt^2/2 * A^2                1 + z + z^2/2
geco1       I + Phi(dt)*A                          1 + z*phi(dt*trace(S-))
geco2       I + dt*A + dt^2/2*phi(dt*tr(S-))*A^2   1 + z + z^2/2*phi(dt*tr)
==========  =====================================  =========================

with z = dt*lambda.  Steady states are non-hyperbolic (eigenvalue 1 on the
kernel directions), so classification counts the kernel eigenvalues and
judges only the remaining spectrum: strictly inside the unit circle means
stable, strictly outside means unstable, anything on the declared tolerance
band stays inconclusive rather than guessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import NumericsError
from .integrators import SchemeSpec, make_scheme, phi, step_map
from .pds import LinearPds

#: Eigenvalues within this window of 1 are attributed to the kernel.
KERNEL_WINDOW = 1e-8
#: Verdict tolerance around the unit circle.
VERDICT_TOL = 1e-9
#: Step-size search cap; reaching it with all values < 1 means unconditional.
STEP_SEARCH_CAP = 1e6

#: Previously reported bracket for the second-order damped scheme's region
#: endpoint; our computed root lies outside it (the reported digits are not
#: reproducible from the stability function and look transposed).
REPORTED_ENDPOINT_BRACKET = (-3.9924, -3.9923)


def _scheme_id(scheme) -> str:
    return scheme.id if isinstance(scheme, SchemeSpec) else str(scheme)


def stability_value(scheme, z: complex, dt_trace: float = 0.0) -> complex:
    """Scalar stability value of a scheme at z = dt*lambda.

    ``dt_trace`` = dt * trace(S-) feeds the damping kernel of the geco
    schemes and is ignored by the others.
    """
    sid = _scheme_id(scheme)
    z = complex(z)
    if sid in ("euler", "gbbks1"):
        return 1.0 + z
    if sid in ("heun", "gbbks2"):
        return 1.0 + z + 0.5 * z * z
    if sid == "geco1":
        return 1.0 + z * phi(dt_trace)
    if sid == "geco2":
        return 1.0 + z + 0.5 * z * z * phi(dt_trace)
    raise ValueError(f"no stability value for scheme {sid!r}")


@dataclass(frozen=True)
class CriticalStep:
    """Smallest step size at which some non-kernel stability value reaches 1."""

    dt_star: float | None
    unconditional: bool
    binding_eigenvalue: complex | None
    bracket_width: float | None

    def __str__(self):
        if self.unconditional:
            return "unconditional"
        return f"{self.dt_star:.10g}"


def critical_step(model: LinearPds, scheme) -> CriticalStep:
    """Critical step size for ``scheme`` on a linear model.

    Evaluates the supremum of |stability value| over the whole nonzero
    spectrum (complex pairs included) and locates its first crossing of 1 by
    bracket-doubling from 1e-6 followed by bisection to relative width
    1e-10.  If the search cap is reached with every value below 1 the
    scheme is unconditionally stable on this model.
    """
    spec = linalg.eigenvalues(model.a)
    scale = np.linalg.norm(model.a, np.inf)
    lams = spec.nonzero(scale)
    if lams.size == 0:
        return CriticalStep(None, True, None, None)
    trace = model.trace_s_minus

    def radius(dt: float) -> float:
        return max(abs(stability_value(scheme, dt * lam, dt * trace)) for lam in lams)

    dt = 1e-6
    if radius(dt) >= 1.0:
        lo, hi = 0.0, dt
    else:
        lo = None
        while dt < STEP_SEARCH_CAP:
            nxt = 2.0 * dt
            if radius(nxt) >= 1.0:
                lo, hi = dt, nxt
                break
            dt = nxt
        if lo is None:
            return CriticalStep(None, True, None, None)

    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if radius(mid) >= 1.0:
            hi = mid
        else:
            lo = mid
    dt_star = 0.5 * (lo + hi)
    binding = max(lams, key=lambda lam: abs(stability_value(scheme, dt_star * lam, dt_star * trace)))
    return CriticalStep(dt_star, False, complex(binding), hi - lo)


@dataclass(frozen=True)
class Certificate:
    """Unconditional-stability certificate for the first-order damped scheme.

    ``m_value`` is the minimum of 2|Re(lambda)| / |lambda|^2 over the nonzero
    spectrum; the certificate holds when m_value * trace(S-) >= 1, which
    places every non-kernel Jacobian eigenvalue inside the unit circle for
    every step size.
    """

    m_value: float
    trace_s_minus: float
    product: float
    holds: bool


def unconditional_certificate(model: LinearPds) -> Certificate:
    spec = linalg.eigenvalues(model.a)
    scale = np.linalg.norm(model.a, np.inf)
    lams = spec.nonzero(scale)
    if lams.size == 0:
        raise NumericsError("certificate undefined: matrix has no nonzero eigenvalues")
    m_value = float(np.min(2.0 * np.abs(lams.real) / np.abs(lams) ** 2))
    product = m_value * model.trace_s_minus
    return Certificate(
        m_value=m_value,
        trace_s_minus=model.trace_s_minus,
        product=product,
        holds=bool(product >= 1.0 - 1e-12),
    )


def numerical_jacobian(step_fn: Callable, y_star, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a step map.

    Per-coordinate probe step h * max(1, |y*_i|).  The step maps are C^1
    with Lipschitz first derivatives but not C^2, so expect O(h) accuracy,
    not O(h^2).
    """
    y_star = np.asarray(y_star, dtype=float)
    n = y_star.size
    jac = np.empty((n, n))
    for i in range(n):
        hi = h * max(1.0, abs(y_star[i]))
        up = y_star.copy()
        dn = y_star.copy()
        up[i] += hi
        dn[i] -= hi
        jac[:, i] = (np.asarray(step_fn(up)) - np.asarray(step_fn(dn))) / (2.0 * hi)
    if not np.all(np.isfinite(jac)):
        raise NumericsError("step map failed or overflowed at a probe point")
    return jac


def closed_form_jacobian(model: LinearPds, scheme, dt: float) -> np.ndarray:
    """Steady-state Jacobian of the scheme's step map on a linear model."""
    sid = _scheme_id(scheme)
    a = model.a
    eye = np.eye(a.shape[0])
    if sid in ("euler", "gbbks1"):
        return eye + dt * a
    if sid in ("heun", "gbbks2"):
        return eye + dt * a + 0.5 * dt * dt * (a @ a)
    if sid == "geco1":
        return eye + dt * phi(dt * model.trace_s_minus) * a
    if sid == "geco2":
        return eye + dt * a + 0.5 * dt * dt * phi(dt * model.trace_s_minus) * (a @ a)
    raise ValueError(f"no closed-form Jacobian for scheme {sid!r}")


@dataclass(frozen=True)
class StabilityReport:
    """Spectral classification of a steady state as a fixed point of a scheme."""

    jacobian: np.ndarray = field(repr=False)
    spectrum: linalg.Spectrum
    kernel_count: int
    non_kernel_radius: float
    verdict: str  # stable | unstable | inconclusive


def classify_fixed_point(model: LinearPds, scheme, y_star, dt: float,
                         cross_check: bool = True) -> StabilityReport:
    """Classify a positive steady state of the model as a fixed point.

    The Jacobian comes from the closed form and, unless disabled, is
    cross-checked against a finite-difference probe of the actual step map.
    Eigenvalues within ``KERNEL_WINDOW`` of 1 are counted against the kernel
    dimension; a count mismatch or a non-kernel eigenvalue hugging the unit
    circle yields the verdict ``inconclusive`` rather than a guess.
    """
    y_star = np.asarray(y_star, dtype=float)
    if np.any(y_star <= 0.0):
        raise ValueError("steady state must be strictly positive")
    residual = np.linalg.norm(model.a @ y_star, np.inf)
    scale = np.linalg.norm(model.a, np.inf) * np.linalg.norm(y_star, np.inf)
    if residual > 1e-8 * max(scale, 1.0):
        raise ValueError("y_star is not a steady state of the model")

    jac = closed_form_jacobian(model, scheme, dt)
    if cross_check:
        spec_obj = scheme if isinstance(scheme, SchemeSpec) else make_scheme(_scheme_id(scheme))
        fd = numerical_jacobian(step_map(model, spec_obj, dt), y_star, h=1e-6)
        gap = float(np.max(np.abs(fd - jac)))
        if gap > 1e-3 * max(1.0, float(np.max(np.abs(jac)))):
            raise NumericsError(
                f"closed-form and finite-difference Jacobians disagree by {gap:.3e}"
            )

    spec = linalg.eigenvalues(jac)
    near_one = np.abs(spec.values - 1.0) <= KERNEL_WINDOW
    kernel_count = int(np.sum(near_one))
    rest = spec.values[~near_one]
    radius = float(np.max(np.abs(rest))) if rest.size else 0.0

    expected_k = len(model.kernel_basis)
    if kernel_count != expected_k:
        verdict = "inconclusive"
    elif radius < 1.0 - VERDICT_TOL:
        verdict = "stable"
    elif radius > 1.0 + VERDICT_TOL:
        verdict = "unstable"
    else:
        verdict = "inconclusive"
    return StabilityReport(
        jacobian=jac,
        spectrum=spec,
        kernel_count=kernel_count,
        non_kernel_radius=radius,
        verdict=verdict,
    )


@dataclass(frozen=True)
class RegionEndpoint:
    """Left endpoint of the second-order damped scheme's stability interval.

    The stability value under the substitution dt*trace(S-) = -z reads
    R(z) = 1 + z + z^2/2 * phi(-z); the endpoint solves |R(z)| = 1, z < 0,
    equivalently z*(1 + e^z) = -4.  ``agrees_with_reported`` compares against
    :data:`REPORTED_ENDPOINT_BRACKET`.
    """

    z_star: float
    stability_residual: float
    reduced_equation_residual: float
    reported_bracket: tuple[float, float]
    agrees_with_reported: bool


def geco2_region_endpoint() -> RegionEndpoint:
    """Locate the region endpoint by bisection on R(z) + 1 = 0."""

    def r_value(z: float) -> float:
        return float((stability_value("geco2", z, -z)).real)

    lo, hi = -8.0, -1.0  # R(-8) < -1 < R(-1)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if r_value(mid) + 1.0 < 0.0:
            lo = mid
        else:
            hi = mid
    z_star = 0.5 * (lo + hi)
    reduced = z_star * (1.0 + math.exp(z_star)) + 4.0
    lo_b, hi_b = REPORTED_ENDPOINT_BRACKET
    return RegionEndpoint(
        z_star=z_star,
        stability_residual=abs(abs(r_value(z_star)) - 1.0),
        reduced_equation_residual=reduced,
        reported_bracket=REPORTED_ENDPOINT_BRACKET,
        agrees_with_reported=bool(lo_b <= z_star <= hi_b),
    )


def geco2_w(a: float, b: float, c: float, y, dt: float) -> np.ndarray:
    """Damping-correction vector of the second-order scheme on the 2x2 model.

    Evaluates w = (2*phi(x)*A - 2*A - dt*phi(x)*A^2) y with x = dt*(a*c + b)
    directly from the matrix form.  The result is proportional to the decay
    eigenvector (1, -1/c), so w_1 = -c * w_2 (equivalently w_1 + c*w_2 = 0,
    orthogonality to the invariant row (1, c)), and the sign of w_1 matches
    the sign of y_1 - (b/a)*y_2.
    """
    if min(a, b, c) <= 0 or dt <= 0:
        raise ValueError("need a, b, c, dt > 0")
    y = np.asarray(y, dtype=float)
    mat = np.array([[-a * c, b * c], [a, -b]])
    p = phi(dt * (a * c + b))
    return (2.0 * p * mat - 2.0 * mat - dt * p * (mat @ mat)) @ y


def random_conservative_system(seed: int, n: int) -> LinearPds:
    """Seeded random member of the conservative Metzler class.

    Off-diagonal entries are sampled nonnegative (with some sparsity) and
    each diagonal entry is the negated column sum, so all column sums vanish
    and the all-ones row is a linear invariant.  Draws are rejected until the
    structural validation passes; the output is bit-reproducible per seed.
    """
    if n < 2:
        raise ValueError("need dimension n >= 2")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        a = rng.uniform(0.0, 1.0, size=(n, n))
        a[rng.random((n, n)) < 0.25] = 0.0
        np.fill_diagonal(a, 0.0)
        np.fill_diagonal(a, -a.sum(axis=0))
        if linalg.validate_system(a).admissible:
            return LinearPds.from_matrix(a)
    raise NumericsError("no admissible random system in 100 draws")
