"""Small dense real linear algebra for the integrator and stability toolkit.

Everything here operates on plain numpy arrays at desk scale (N <= 64):
eigenvalues, numerical kernels, matrix exponential action, and structural
validation of conservative Metzler systems (zero-row-sum invariants are not
assumed; invariants come from ker(A^T)).

All functions are pure; arrays are never mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError

MAX_DIM = 64

#: Relative rank tolerance used when callers do not supply one.
DEFAULT_RANK_TOL = 1e-10


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class Spectrum:
    """All eigenvalues of a real matrix, with the tolerance they were verified at.

    ``values`` holds complex eigenvalues; conjugate pairs are exact for real
    input.  ``iterations_used`` is 0 when the computation is delegated to the
    LAPACK QR driver (which does not expose its sweep count).
    """

    values: np.ndarray
    convergence_tol: float
    iterations_used: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))

    def nonzero(self, scale: float, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
        """Eigenvalues with modulus above ``tol * scale``."""
        vals = self.values
        return vals[np.abs(vals) > tol * max(scale, 1e-300)]

    def zero_count(self, scale: float, tol: float = DEFAULT_RANK_TOL) -> int:
        return int(np.sum(np.abs(self.values) <= tol * max(scale, 1e-300)))


def eigenvalues(a) -> Spectrum:
    """All eigenvalues of a square real matrix.

    Delegates to the LAPACK nonsymmetric QR driver (Hessenberg reduction
    followed by shifted QR with 2x2-block deflation).  Non-convergence is
    surfaced as :class:`NumericsError`, never silently.
    """
    a = _as_square(a)
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"matrix dimension {n} exceeds supported maximum {MAX_DIM}")
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigenvalue iteration did not converge: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise NumericsError("eigenvalue computation produced non-finite values")
    tol = 1e-12 * max(np.linalg.norm(a, "fro"), 1.0)
    return Spectrum(values=vals, convergence_tol=tol)


def nullspace(a, rank_tol: float | None = None) -> list[np.ndarray]:
    """Basis of the numerical kernel of ``a`` via elimination with partial pivoting.

    Returns one vector per free column of the row-reduced matrix, each scaled
    to unit max-norm.  The same routine serves ker(A) and, applied to ``a.T``,
    the invariant rows ker(A^T).  Entries below ``rank_tol * ||A||_inf`` are
    treated as zero; the default tolerance suits well-separated desk-scale
    matrices.
    """
    a = _as_square(a)
    n = a.shape[0]
    norm = np.linalg.norm(a, np.inf)
    if rank_tol is None:
        rank_tol = DEFAULT_RANK_TOL
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    thresh = rank_tol * max(norm, 1.0)

    m = a.copy()
    pivot_cols: list[int] = []
    row = 0
    for col in range(n):
        if row >= n:
            break
        p = row + int(np.argmax(np.abs(m[row:, col])))
        if abs(m[p, col]) <= thresh:
            continue
        if p != row:
            m[[row, p]] = m[[p, row]]
        m[row] = m[row] / m[row, col]
        for i in range(n):
            if i != row and m[i, col] != 0.0:
                m[i] = m[i] - m[i, col] * m[row]
        pivot_cols.append(col)
        row += 1

    free_cols = [c for c in range(n) if c not in pivot_cols]
    basis = []
    for fc in free_cols:
        v = np.zeros(n)
        v[fc] = 1.0
        for i, pc in enumerate(pivot_cols):
            v[pc] = -m[i, fc]
        v = v / np.max(np.abs(v))
        basis.append(v)
    return basis


def expm_apply(a, y0, t: float) -> np.ndarray:
    """Action of the matrix exponential: exp(t*a) @ y0.

    Scaling and squaring with a diagonal Pade core of order 6; the matrix is
    scaled until ||t*a||_inf / 2^s <= 0.5, which keeps the core accurate to
    well below 1e-12 at desk-scale norms.
    """
    a = _as_square(a)
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (a.shape[0],):
        raise ValueError(f"state shape {y0.shape} does not match matrix {a.shape}")
    if not np.all(np.isfinite(y0)):
        raise ValueError("state has non-finite entries")
    if not np.isfinite(t) or t < 0:
        raise ValueError("time must be finite and nonnegative")

    b = t * a
    norm = np.linalg.norm(b, np.inf)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
        b = b / (2.0**s)

    # order-6 diagonal Pade coefficients of exp
    coeffs = (1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280)
    n = b.shape[0]
    powers = [np.eye(n)]
    for _ in range(6):
        powers.append(powers[-1] @ b)
    u = sum(c * p for c, p in zip(coeffs[::2], powers[::2]))
    v = sum(c * p for c, p in zip(coeffs[1::2], powers[1::2]))
    try:
        e = np.linalg.solve(u - v, u + v)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - desk-scale norms
        raise NumericsError(f"exponential Pade solve failed: {exc}") from exc
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            e = e @ e
        out = e @ y0
    if not np.all(np.isfinite(out)):
        raise NumericsError("matrix exponential overflowed")
    return out


@dataclass(frozen=True)
class SystemReport:
    """Structural validation of a candidate conservative Metzler system.

    ``admissible`` is the conjunction of every flag: nonzero Metzler matrix
    whose zero eigenvalue has matching algebraic and geometric multiplicity
    k >= 1, whose spectrum lies in the closed left half-plane, and which has
    at least one negative diagonal entry.
    """

    metzler: bool
    nonzero: bool
    kernel_dim: int
    zero_algebraic_multiplicity: int
    multiplicities_match: bool
    spectrum_nonpositive: bool
    proper_metzler: bool
    spectrum: Spectrum = field(repr=False)

    @property
    def admissible(self) -> bool:
        return (
            self.metzler
            and self.nonzero
            and self.kernel_dim >= 1
            and self.multiplicities_match
            and self.spectrum_nonpositive
            and self.proper_metzler
        )


def validate_system(a) -> SystemReport:
    """Check the structural flags of the conservative Metzler system class."""
    a = _as_square(a)
    n = a.shape[0]
    norm = np.linalg.norm(a, np.inf)
    off = a - np.diag(np.diag(a))
    metzler = bool(np.all(off >= 0.0))
    nonzero = bool(np.any(a != 0.0))
    spec = eigenvalues(a)
    kernel_dim = len(nullspace(a))
    alg = spec.zero_count(norm)
    # eigenvalues with tiny positive real part from roundoff still count as nonpositive
    nonz = spec.nonzero(norm)
    spectrum_nonpositive = bool(np.all(nonz.real <= DEFAULT_RANK_TOL * max(norm, 1.0)))
    proper = metzler and bool(np.any(np.diag(a) < 0.0))
    return SystemReport(
        metzler=metzler,
        nonzero=nonzero,
        kernel_dim=kernel_dim,
        zero_algebraic_multiplicity=alg,
        multiplicities_match=(alg == kernel_dim),
        spectrum_nonpositive=spectrum_nonpositive,
        proper_metzler=proper,
        spectrum=spec,
    )


def metzler_disk_check(a, spectrum: Spectrum | None = None) -> bool:
    """Whether every eigenvalue lies in the disk |z - r| <= |r|, r = min diagonal.

    For Metzler matrices this disk contains the whole spectrum; the check is
    the computational core of the unconditional-stability certificate.
    """
    a = _as_square(a)
    if spectrum is None:
        spectrum = eigenvalues(a)
    r = float(np.min(np.diag(a)))
    tol = 1e-10 * max(np.linalg.norm(a, np.inf), 1.0)
    return bool(np.all(np.abs(spectrum.values - r) <= abs(r) + tol))
