"""Reproduction recipes for the reference experiments, emitting CSV + JSON.

Each experiment id maps to a fixed (model, scheme, step size, horizon,
start vector) recipe.  Critical step sizes used inside the recipes are
recomputed at run time, never hard-coded, so the experiments stay honest
against the stability module.  Every run writes one or more CSV tables plus
a machine-readable JSON summary whose checks carry expected value,
tolerance, observed value and a pass flag.

Horizons are recipe parameters, not reference facts: the convergent runs use
enough steps for the error to contract by orders of magnitude, the divergent
runs enough for the seeded perturbation to grow well past 1e-4.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import stability
from .integrators import integrate, make_scheme, step_map
from .linalg import expm_apply
from .pds import resolve_builtin, steady_state_for

EXPERIMENT_IDS = (
    "fig2",
    "fig3a",
    "fig3c",
    "fig4a",
    "fig4c",
    "fig5a",
    "fig5c",
    "fig6",
    "remark8",
    "jacobians",
    "order",
)

#: Steps for the near-critical runs; contraction is only ~2e-3 per step at
#: dt = dt* (1 - 1e-3), so thousands of steps are needed to see convergence.
CONVERGENT_STEPS = 5000
#: Steps for the perturbed super-critical runs; growth is ~2e-3 per step.
DIVERGENT_STEPS = 3000

#: Start perturbation of the divergent runs (orthogonal to the mass row).
PERTURBATION = np.array([-2.0, 1.0, 1.0, -1.0, 1.0])

ORDER_SCHEMES = ("geco1", "geco2", "gbbks1", "gbbks2")
ORDER_LEVELS = tuple(2.0 ** -k for k in range(3, 11))


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    """Comma-delimited, LF-terminated, 17-significant-digit decimals."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row width does not match header")
            handle.write(",".join(format_cell(v) for v in row) + "\n")


@dataclass
class Check:
    """One self-judging assertion of an experiment summary."""

    name: str
    expected: float | str
    tolerance: float | str
    observed: float | str
    passed: bool


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def _summary(outdir: str, exp_id: str, checks: list[Check], extra: dict | None = None) -> str:
    path = os.path.join(outdir, f"{exp_id}_summary.json")
    payload = {
        "experiment": exp_id,
        "passed": all(bool(c.passed) for c in checks),
        "checks": [{k: _plain(v) for k, v in c.__dict__.items()} for c in checks],
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_plain)
        handle.write("\n")
    return path


def _trajectory_rows(model, traj, start, y_star=None):
    """CSV rows: step, t, state, invariant defect, errors vs flow and steady state."""
    rows = []
    for n, (t, y) in enumerate(zip(traj.times, traj.states)):
        ref = expm_apply(model.a, start, t)
        err_ref = float(np.max(np.abs(y - ref)))
        row = [n, t, *y, traj.invariant_defect[n], err_ref]
        if y_star is not None:
            row.append(float(np.max(np.abs(y - y_star))))
        rows.append(row)
    return rows


def _state_header(dim: int, with_steady: bool) -> list[str]:
    header = ["step", "t"] + [f"y_{i + 1}" for i in range(dim)] + ["inv_defect", "err_ref"]
    if with_steady:
        header.append("err_steady")
    return header


def run_fig2(outdir: str) -> tuple[list[str], list[Check]]:
    """First-order damped scheme on the 5x5 problem at dt = 1."""
    doc = resolve_builtin("builtin:paper-5x5")
    model = doc.build()
    y_star = steady_state_for(model, doc.y0)
    traj = integrate(model, make_scheme("geco1"), doc.y0, dt=1.0, n_steps=200)
    rows = _trajectory_rows(model, traj, doc.y0, y_star)
    path = os.path.join(outdir, "fig2.csv")
    write_csv(path, _state_header(5, True), rows)

    final_err = float(np.max(np.abs(traj.final - y_star)))
    checks = [
        Check("final_error_to_steady_state", 0.0, 1e-10, final_err, final_err < 1e-10),
        Check(
            "max_invariant_defect", 0.0, 1e-12,
            max(traj.invariant_defect), max(traj.invariant_defect) <= 1e-12,
        ),
        Check(
            "min_component_nonnegative", 0.0, 0.0,
            min(traj.min_component), min(traj.min_component) >= 0.0,
        ),
    ]
    return [path, _summary(outdir, "fig2", checks)], checks


_BIFURCATION = {
    "fig3a": ("geco2", "convergent"),
    "fig3c": ("geco2", "divergent"),
    "fig4a": ("gbbks1", "convergent"),
    "fig4c": ("gbbks1", "divergent"),
    "fig5a": ("gbbks2", "convergent"),
    "fig5c": ("gbbks2", "divergent"),
}


def run_bifurcation(exp_id: str, outdir: str) -> tuple[list[str], list[Check]]:
    """Near-critical runs of the second-order and product-term schemes.

    The convergent variant runs from the reference start at
    dt = dt* (1 - 1e-3); the divergent one perturbs the steady state by
    1e-5 * (-2, 1, 1, -1, 1) and runs at dt = dt* (1 + 1e-3).
    """
    scheme_name, variant = _BIFURCATION[exp_id]
    doc = resolve_builtin("builtin:paper-5x5")
    model = doc.build()
    y_star = steady_state_for(model, doc.y0)
    scheme = make_scheme(scheme_name)
    crit = stability.critical_step(model, scheme)

    if variant == "convergent":
        dt = crit.dt_star * (1.0 - 1e-3)
        start = doc.y0
        steps = CONVERGENT_STEPS
    else:
        dt = crit.dt_star * (1.0 + 1e-3)
        start = y_star + 1e-5 * PERTURBATION
        steps = DIVERGENT_STEPS

    traj = integrate(model, scheme, start, dt=dt, n_steps=steps)
    errors = np.array([float(np.max(np.abs(y - y_star))) for y in traj.states])
    rows = _trajectory_rows(model, traj, start, y_star)
    path = os.path.join(outdir, f"{exp_id}.csv")
    write_csv(path, _state_header(5, True), rows)

    checks = [
        Check(
            "max_invariant_defect", 0.0, 1e-12,
            max(traj.invariant_defect), max(traj.invariant_defect) <= 1e-12,
        ),
    ]
    if variant == "convergent":
        ratio = errors[-1] / errors[0]
        checks.append(Check("error_contracted", 0.0, 1e-2, ratio, ratio < 1e-2))
    else:
        initial_dip = float(errors[: steps // 10].min())
        peak = float(errors.max())
        checks.append(
            Check("error_initially_decreases", 0.0, errors[0], initial_dip, initial_dip < errors[0])
        )
        checks.append(Check("error_grows_past_1e-4", 1e-3, "order of magnitude", peak, peak > 1e-4))
    extra = {"dt": dt, "dt_star": crit.dt_star, "scheme": scheme_name, "steps": steps}
    return [path, _summary(outdir, exp_id, checks, extra)], checks


def limit_crossing_time(grid_dt: float = 1e-4, horizon: float = 2.0) -> float:
    """Crossing time of the stiff-limit reference components y2 and y3.

    Samples the closed-form limit solution (y2 = 0.99 e^-t,
    y3 = 1 - 0.99 e^-t) on a uniform grid and extracts the crossing with the
    same sign-change interpolation used for numerical trajectories.
    """
    times = np.arange(0.0, horizon + grid_dt, grid_dt)
    diff = 2.0 * 0.99 * np.exp(-times) - 1.0  # y2 - y3
    return crossing_time(times, diff, skip_before=grid_dt / 2)


def crossing_time(times, diff, skip_before: float) -> float:
    """First sign change of ``diff`` after ``skip_before``, linearly interpolated."""
    for k in range(len(times) - 1):
        if times[k] < skip_before:
            continue
        if diff[k] == 0.0:
            return float(times[k])
        if diff[k] * diff[k + 1] < 0.0:
            frac = diff[k] / (diff[k] - diff[k + 1])
            return float(times[k] + frac * (times[k + 1] - times[k]))
    raise ValueError("no sign change found in the sampled window")


def run_fig6(outdir: str) -> tuple[list[str], list[Check]]:
    """Stiff phase-error study: first-order damped scheme at dt = 0.1."""
    files = []
    checks = []
    crossings = {}
    for K, expected in ((10.0, 7.0), (100.0, 70.0)):
        doc = resolve_builtin(f"builtin:paper-stiff?K={K:g}")
        model = doc.build()
        traj = integrate(model, make_scheme("geco1"), doc.y0, dt=0.1, n_steps=1000)
        rows = _trajectory_rows(model, traj, doc.y0)
        path = os.path.join(outdir, f"fig6_K{K:g}.csv")
        write_csv(path, _state_header(3, False), rows)
        files.append(path)

        states = np.array(traj.states)
        t_cross = crossing_time(np.array(traj.times), states[:, 1] - states[:, 2], skip_before=0.1)
        crossings[f"K{K:g}"] = t_cross
        checks.append(
            Check(
                f"crossing_time_K{K:g}", expected, 0.2 * expected, t_cross,
                abs(t_cross - expected) <= 0.2 * expected,
            )
        )

    exact = limit_crossing_time()
    target = math.log(1.98)
    checks.append(
        Check("limit_reference_crossing", target, 1e-6, exact, abs(exact - target) <= 1e-6)
    )
    note = (
        "The expected crossing times 7 (K=10) and 70 (K=100) at dt=0.1 are not "
        "reproducible from the scheme as defined: the damped step stretches the "
        "slow mode by dt*(K+1)/(1-exp(-dt*(K+1))), giving crossings near 1.26 and "
        "6.97. The expected values are recovered with K in {100, 1000} at dt=0.1, "
        "or within 20% with dt=1.0 at the stated K."
    )
    files.append(_summary(outdir, "fig6", checks, {"crossings": crossings, "note": note}))
    return files, checks


def run_remark8(outdir: str) -> tuple[list[str], list[Check]]:
    """Region endpoint of the second-order damped scheme, with the reported bracket."""
    endpoint = stability.geco2_region_endpoint()
    zs = np.linspace(endpoint.z_star - 0.5, 0.0, 201)
    rows = [[z, stability.stability_value("geco2", z, -z).real] for z in zs]
    path = os.path.join(outdir, "remark8.csv")
    write_csv(path, ["z", "stability_value"], rows)

    checks = [
        Check(
            "unit_modulus_at_endpoint", 1.0, 1e-10,
            1.0 + endpoint.stability_residual, endpoint.stability_residual <= 1e-10,
        ),
        Check(
            "reduced_equation_residual", 0.0, 1e-8,
            endpoint.reduced_equation_residual,
            abs(endpoint.reduced_equation_residual) <= 1e-8,
        ),
        Check(
            "reported_bracket_disagreement_flagged", "outside bracket", "exact",
            "outside bracket" if not endpoint.agrees_with_reported else "inside bracket",
            not endpoint.agrees_with_reported,
        ),
    ]
    extra = {
        "z_star": endpoint.z_star,
        "reported_bracket": list(endpoint.reported_bracket),
        "agrees_with_reported": endpoint.agrees_with_reported,
    }
    return [path, _summary(outdir, "remark8", checks, extra)], checks


def run_jacobians(outdir: str) -> tuple[list[str], list[Check]]:
    """Finite-difference vs closed-form Jacobians at the steady states."""
    rows = []
    checks = []
    # the 5x5 probe uses a step inside the stable range of all four schemes
    cases = [("builtin:paper-2x2", 1.0), ("builtin:paper-5x5", 0.25)]
    for address, dt in cases:
        doc = resolve_builtin(address)
        model = doc.build()
        y_star = steady_state_for(model, doc.y0)
        for name in ("geco1", "geco2", "gbbks1", "gbbks2"):
            scheme = make_scheme(name)
            closed = stability.closed_form_jacobian(model, scheme, dt)
            fd = stability.numerical_jacobian(step_map(model, scheme, dt), y_star, h=1e-6)
            gap = float(np.max(np.abs(fd - closed)))
            rows.append([doc.builtin, name, dt, gap])
            checks.append(
                Check(f"jacobian_gap_{doc.builtin}_{name}", 0.0, 1e-4, gap, gap <= 1e-4)
            )
    path = os.path.join(outdir, "jacobians.csv")
    write_csv(path, ["model", "scheme", "dt", "max_abs_error"], rows)
    return [path, _summary(outdir, "jacobians", checks)], checks


def observed_orders(model, scheme, y0, tmax: float, dts) -> list[tuple[float, float, float]]:
    """Rows of (dt, error at tmax, order vs previous row); order is nan first."""
    reference = expm_apply(model.a, y0, tmax)
    out = []
    prev_err = None
    for dt in dts:
        n_steps = round(tmax / dt)
        if abs(n_steps * dt - tmax) > 1e-12 * tmax:
            raise ValueError(f"dt {dt} does not divide tmax {tmax}")
        traj = integrate(model, scheme, y0, dt=dt, n_steps=n_steps)
        err = float(np.max(np.abs(traj.final - reference)))
        order = math.nan if prev_err is None else math.log2(prev_err / err)
        out.append((dt, err, order))
        prev_err = err
    return out


def run_order(outdir: str) -> tuple[list[str], list[Check]]:
    """Convergence orders of the four nonstandard schemes on the 2x2 problem."""
    doc = resolve_builtin("builtin:paper-2x2?a=1&b=1&c=1")
    model = doc.build()
    rows = []
    checks = []
    for name in ORDER_SCHEMES:
        scheme = make_scheme(name)
        table = observed_orders(model, scheme, doc.y0, 1.0, ORDER_LEVELS)
        for dt, err, order in table:
            rows.append([name, dt, err, "" if math.isnan(order) else order])
        tail = table[-1][2]
        lo, hi = (1.9, 2.1) if name in ("geco2", "gbbks2") else (0.9, 1.1)
        checks.append(
            Check(f"order_{name}", 0.5 * (lo + hi), 0.5 * (hi - lo), tail, lo <= tail <= hi)
        )
    path = os.path.join(outdir, "order.csv")
    write_csv(path, ["scheme", "dt", "err", "order"], rows)
    note = (
        "On this 2x2 family the first-order damped scheme is exact (its "
        "damping argument equals -dt*lambda, so the nonzero-mode multiplier "
        "is exp(dt*lambda)); its errors are roundoff and no order is "
        "observable. Its genuine first order is visible on builtin:paper-5x5."
    )
    return [path, _summary(outdir, "order", checks, {"note": note})], checks


def run_experiment(exp_id: str, outdir: str) -> tuple[list[str], list[Check]]:
    """Dispatch one experiment id; returns written files and its checks."""
    os.makedirs(outdir, exist_ok=True)
    if exp_id == "fig2":
        return run_fig2(outdir)
    if exp_id in _BIFURCATION:
        return run_bifurcation(exp_id, outdir)
    if exp_id == "fig6":
        return run_fig6(outdir)
    if exp_id == "remark8":
        return run_remark8(outdir)
    if exp_id == "jacobians":
        return run_jacobians(outdir)
    if exp_id == "order":
        return run_order(outdir)
    raise ValueError(f"unknown experiment {exp_id!r}; known: {EXPERIMENT_IDS}")
