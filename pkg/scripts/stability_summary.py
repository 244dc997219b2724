#!/usr/bin/env python3
"""Print critical step sizes and certificates for the builtin models.

Usage: python scripts/stability_summary.py
"""

from posinv import critical_step, make_scheme, unconditional_certificate
from posinv.pds import resolve_builtin

MODELS = ("builtin:paper-2x2", "builtin:paper-5x5", "builtin:paper-stiff?K=10")
SCHEMES = ("euler", "heun", "geco1", "geco2", "gbbks1", "gbbks2")


def main() -> int:
    for address in MODELS:
        model = resolve_builtin(address).build()
        cert = unconditional_certificate(model)
        print(f"\n{address}  (trace(S-) = {model.trace_s_minus:g}, "
              f"certificate product = {cert.product:.6g}, holds = {cert.holds})")
        for name in SCHEMES:
            crit = critical_step(model, make_scheme(name))
            if crit.unconditional:
                print(f"  {name:7s} critical dt: unconditional")
            else:
                lam = crit.binding_eigenvalue
                print(f"  {name:7s} critical dt: {crit.dt_star:.10g}  "
                      f"(binding eigenvalue {lam.real:.6g}{lam.imag:+.6g}j)")
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
