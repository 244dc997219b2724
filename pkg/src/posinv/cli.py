"""Command-line front end.

Subcommands::

    posinv integrate  --model M --scheme S --dt D --steps N [--alpha A] [--out F]
    posinv stability  --model M --scheme S [--dt D] [--seed K]
    posinv reproduce  ID [--outdir DIR]
    posinv order      --model M --scheme S --tmax T --dt0 D --levels L [--alpha A] [--out F]

Models are addressed as ``builtin:name?params``, a model-file path, or
``random:N`` (a seeded member of the conservative Metzler class; see
``--seed``).  Exit codes: 0 ok, 2 usage or model error, 3 numerical failure.
Identical command lines produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import experiments, stability
from .errors import ModelError, NumericsError, PosinvError
from .integrators import SCHEME_IDS, SchemeSpec, integrate, make_scheme
from .linalg import expm_apply
from .pds import LinearPds, load_model, steady_state_for

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICS = 3


def _resolve_model(address: str, seed: int) -> tuple[LinearPds, np.ndarray, str]:
    if address.startswith("random:"):
        try:
            n = int(address.split(":", 1)[1])
        except ValueError as exc:
            raise ModelError(f"bad random model address {address!r}") from exc
        model = stability.random_conservative_system(seed, n)
        return model, np.ones(n), address
    doc = load_model(address)
    return doc.build(), doc.y0, doc.builtin or "file"


def _make_scheme(args) -> SchemeSpec:
    alpha = getattr(args, "alpha", None)
    if args.scheme != "gbbks2" and alpha is not None:
        raise ModelError(f"--alpha applies to gbbks2 only, not {args.scheme}")
    try:
        return make_scheme(args.scheme, alpha)
    except ValueError as exc:
        raise ModelError(str(exc)) from exc


def _emit(path: str | None, header, rows) -> None:
    if path is None:
        sys.stdout.write(",".join(header) + "\n")
        for row in rows:
            sys.stdout.write(",".join(experiments.format_cell(v) for v in row) + "\n")
    else:
        experiments.write_csv(path, header, rows)


def cmd_integrate(args) -> int:
    model, y0, _ = _resolve_model(args.model, args.seed)
    scheme = _make_scheme(args)
    traj = integrate(model, scheme, y0, dt=args.dt, n_steps=args.steps)
    rows = []
    for n, (t, y) in enumerate(zip(traj.times, traj.states)):
        err = float(np.max(np.abs(y - expm_apply(model.a, y0, t))))
        rows.append([n, t, *y, traj.invariant_defect[n], err])
    dim = model.dimension
    header = ["step", "t"] + [f"y_{i + 1}" for i in range(dim)] + ["inv_defect", "err"]
    _emit(args.out, header, rows)
    return EXIT_OK


def cmd_stability(args) -> int:
    model, y0, _ = _resolve_model(args.model, args.seed)
    scheme = _make_scheme(args)
    crit = stability.critical_step(model, scheme)
    if crit.unconditional:
        print("critical dt: unconditional")
    else:
        print(f"critical dt: {crit.dt_star:.10g}")
        lam = crit.binding_eigenvalue
        print(f"binding eigenvalue: {lam.real:.10g}{lam.imag:+.10g}j")
        print(f"bracket width: {crit.bracket_width:.3g}")
    cert = stability.unconditional_certificate(model)
    print(
        f"certificate: M={cert.m_value:.10g} trace(S-)={cert.trace_s_minus:.10g} "
        f"product={cert.product:.10g} holds={cert.holds}"
    )
    if args.dt is not None:
        y_star = steady_state_for(model, y0)
        if np.any(y_star <= 0.0):
            print(f"verdict at dt={args.dt:g}: skipped (steady state not positive)")
        else:
            report = stability.classify_fixed_point(model, scheme, y_star, args.dt)
            print(
                f"verdict at dt={args.dt:g}: {report.verdict} "
                f"(kernel eigenvalues: {report.kernel_count}, "
                f"non-kernel radius: {report.non_kernel_radius:.10g})"
            )
    return EXIT_OK


def cmd_reproduce(args) -> int:
    files, checks = experiments.run_experiment(args.experiment, args.outdir)
    for check in checks:
        flag = "PASS" if check.passed else "FAIL"
        print(f"[{flag}] {check.name}: expected {check.expected} "
              f"(tol {check.tolerance}), observed {check.observed}")
    for path in files:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_order(args) -> int:
    model, y0, _ = _resolve_model(args.model, args.seed)
    scheme = _make_scheme(args)
    if args.levels < 1:
        raise ModelError("--levels must be >= 1")
    dts = [args.dt0 * 2.0**-k for k in range(args.levels)]
    table = experiments.observed_orders(model, scheme, y0, args.tmax, dts)
    rows = [[dt, err, "" if math.isnan(order) else order] for dt, err, order in table]
    _emit(args.out, ["dt", "err", "order"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posinv",
        description="Positivity- and invariant-preserving integrators with a stability toolkit.",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for random:N model addresses")
    sub = parser.add_subparsers(dest="command", required=True)

    p_int = sub.add_parser("integrate", help="run one scheme and emit the trajectory as CSV")
    p_int.add_argument("--model", required=True)
    p_int.add_argument("--scheme", required=True, choices=SCHEME_IDS)
    p_int.add_argument("--dt", type=float, required=True)
    p_int.add_argument("--steps", type=int, required=True)
    p_int.add_argument("--alpha", type=float, default=None)
    p_int.add_argument("--out", default=None)
    p_int.set_defaults(func=cmd_integrate)

    p_st = sub.add_parser("stability", help="critical step, certificate, fixed-point verdict")
    p_st.add_argument("--model", required=True)
    p_st.add_argument("--scheme", required=True, choices=SCHEME_IDS)
    p_st.add_argument("--dt", type=float, default=None)
    p_st.add_argument("--alpha", type=float, default=None)
    p_st.set_defaults(func=cmd_stability)

    p_rep = sub.add_parser("reproduce", help="run a reference experiment recipe")
    p_rep.add_argument("experiment", choices=experiments.EXPERIMENT_IDS)
    p_rep.add_argument("--outdir", default=".")
    p_rep.set_defaults(func=cmd_reproduce)

    p_ord = sub.add_parser("order", help="observed convergence orders against the exponential")
    p_ord.add_argument("--model", required=True)
    p_ord.add_argument("--scheme", required=True, choices=SCHEME_IDS)
    p_ord.add_argument("--tmax", type=float, required=True)
    p_ord.add_argument("--dt0", type=float, required=True)
    p_ord.add_argument("--levels", type=int, required=True)
    p_ord.add_argument("--alpha", type=float, default=None)
    p_ord.add_argument("--out", default=None)
    p_ord.set_defaults(func=cmd_order)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericsError, PosinvError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
