"""Production-destruction system models.

Two model flavours are supported.  ``LinearPds`` wraps a conservative Metzler
matrix together with its nonnegative split A = S+ - S- (S- diagonal), the
invariant rows spanning ker(A^T), and a kernel basis; all of its derived data
is computed once at construction.  ``GeneralPds`` carries callables for a
nonlinear right-hand side split into production terms and destruction *rates*
d with f^[D]_j(y) = d_j(y) * y_j, so that the ratio sums the integrators need
are well defined even on the boundary of the positive orthant.

Model files are line-oriented UTF-8 (see :func:`parse_model`); the builtin
registry hard-codes the reference problems with exact integer entries.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence
from urllib.parse import parse_qsl

import numpy as np

from . import linalg
from .errors import ModelError, NumericsError


def split_metzler(a) -> tuple[np.ndarray, np.ndarray]:
    """Nonnegative split A = S+ - S- with S- diagonal.

    (S-)_jj = max(-a_jj, 0) and S+ = A + S-; both factors are entrywise
    nonnegative.  Rejects non-Metzler input.
    """
    a = np.asarray(a, dtype=float)
    off = a - np.diag(np.diag(a))
    if np.any(off < 0.0):
        raise ModelError("matrix is not Metzler: negative off-diagonal entry")
    s_minus = np.diag(np.maximum(-np.diag(a), 0.0))
    s_plus = a + s_minus
    return s_plus, s_minus


@dataclass(frozen=True)
class LinearPds:
    """Linear production-destruction system y' = A y with A conservative Metzler."""

    a: np.ndarray
    s_plus: np.ndarray = field(repr=False)
    s_minus: np.ndarray = field(repr=False)
    invariant_rows: np.ndarray = field(repr=False)
    kernel_basis: list[np.ndarray] = field(repr=False)
    trace_s_minus: float

    @classmethod
    def from_matrix(cls, a) -> "LinearPds":
        a = np.asarray(a, dtype=float)
        report = linalg.validate_system(a)
        if not report.metzler:
            raise ModelError("matrix is not Metzler")
        if not report.admissible:
            raise ModelError(
                "matrix is outside the conservative Metzler class: "
                f"kernel_dim={report.kernel_dim}, "
                f"multiplicities_match={report.multiplicities_match}, "
                f"spectrum_nonpositive={report.spectrum_nonpositive}, "
                f"proper_metzler={report.proper_metzler}"
            )
        s_plus, s_minus = split_metzler(a)
        rows = linalg.nullspace(a.T)
        if not rows:
            raise ModelError("matrix has no linear invariants (trivial ker(A^T))")
        return cls(
            a=a,
            s_plus=s_plus,
            s_minus=s_minus,
            invariant_rows=np.array(rows),
            kernel_basis=linalg.nullspace(a),
            trace_s_minus=float(np.trace(s_minus)),
        )

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def rhs(self, y: np.ndarray) -> np.ndarray:
        return self.a @ y


@dataclass(frozen=True)
class GeneralPds:
    """Nonlinear production-destruction system given by callables.

    ``destruction_rate`` returns the vector d(y) >= 0 with
    f^[D]_j(y) = d_j(y) * y_j; supplying rates instead of raw destruction
    terms makes division by state components unnecessary, so models remain
    evaluable at states with zero components.  ``invariant_rows`` is optional
    and only used for trajectory diagnostics.
    """

    dimension: int
    rhs: Callable[[np.ndarray], np.ndarray]
    production: Callable[[np.ndarray], np.ndarray]
    destruction_rate: Callable[[np.ndarray], np.ndarray]
    invariant_rows: np.ndarray | None = None


def destruction_rate_sum(model, y) -> float:
    """Sum over components of the destruction rates at ``y``.

    For a linear model this is trace(S-) identically: the ratio sum
    sum_j (S- y)_j / y_j collapses because S- is diagonal, so no division is
    performed and states with zero components are fine.  For a general model
    the rate callable is evaluated and validated.
    """
    y = np.asarray(y, dtype=float)
    if isinstance(model, LinearPds):
        return model.trace_s_minus
    rates = np.asarray(model.destruction_rate(y), dtype=float)
    if rates.shape != (model.dimension,):
        raise ModelError(f"destruction rates have shape {rates.shape}")
    if np.any(~np.isfinite(rates)) or np.any(rates < 0.0):
        raise ModelError("destruction rates must be finite and nonnegative")
    return float(np.sum(rates))


def steady_state_for(model: LinearPds, y0) -> np.ndarray:
    """The steady state sharing all linear invariants with ``y0``.

    Solves for kernel coordinates c with N K c = N y0 (N the invariant rows,
    K the kernel basis); the solution is unique whenever the invariants
    separate kernel elements, otherwise the invariant system is singular and
    an error is raised.
    """
    y0 = np.asarray(y0, dtype=float)
    k = np.column_stack(model.kernel_basis)
    n = model.invariant_rows
    gram = n @ k
    target = n @ y0
    coeffs, residual, rank, _ = np.linalg.lstsq(gram, target, rcond=None)
    if rank < k.shape[1]:
        raise NumericsError("singular invariant system: kernel not determined by invariants")
    y_star = k @ coeffs
    defect = np.linalg.norm(n @ y_star - target, np.inf)
    scale = max(np.linalg.norm(target, np.inf), 1.0)
    if defect > 1e-10 * scale:
        raise NumericsError(f"steady-state invariant mismatch: defect {defect:.3e}")
    return y_star


@dataclass
class ModelDocument:
    """Parsed model description, round-trip stable through :func:`serialize_model`."""

    kind: str
    dimension: int
    matrix: np.ndarray
    y0: np.ndarray
    params: dict[str, float] = field(default_factory=dict)
    builtin: str | None = None

    def build(self) -> LinearPds:
        return LinearPds.from_matrix(self.matrix)


def _two_by_two(a: float = 1.0, b: float = 1.0, c: float = 1.0) -> ModelDocument:
    if min(a, b, c) <= 0:
        raise ModelError("parameters a, b, c must be positive")
    m = np.array([[-a * c, b * c], [a, -b]])
    return ModelDocument(
        kind="linear", dimension=2, matrix=m, y0=np.array([2.0, 1.0]),
        params={"a": a, "b": b, "c": c}, builtin="paper-2x2",
    )


def _five_by_five() -> ModelDocument:
    m = np.array(
        [
            [-4, 2, 1, 2, 2],
            [1, -4, 1, 0, 2],
            [0, 0, -4, 2, 0],
            [2, 2, 2, -4, 0],
            [1, 0, 0, 0, -4],
        ],
        dtype=float,
    )
    return ModelDocument(
        kind="linear", dimension=5, matrix=m,
        y0=np.array([0.0, 3.0, 3.0, 3.0, 4.0]), builtin="paper-5x5",
    )


def _stiff(K: float = 10.0) -> ModelDocument:
    if K <= 0:
        raise ModelError("parameter K must be positive")
    m = np.array([[-K, 0, 0], [K, -1, 0], [0, 1, 0]], dtype=float)
    return ModelDocument(
        kind="linear", dimension=3, matrix=m,
        y0=np.array([0.98, 0.01, 0.01]), params={"K": K}, builtin="paper-stiff",
    )


BUILTIN_MODELS: dict[str, Callable[..., ModelDocument]] = {
    "paper-2x2": _two_by_two,
    "paper-5x5": _five_by_five,
    "paper-stiff": _stiff,
}


def resolve_builtin(address: str) -> ModelDocument:
    """Resolve ``builtin:name?key=value&...`` to a registry model."""
    body = address[len("builtin:"):]
    name, _, query = body.partition("?")
    if name not in BUILTIN_MODELS:
        raise ModelError(f"unknown builtin model {name!r}; known: {sorted(BUILTIN_MODELS)}")
    params = {}
    for key, value in parse_qsl(query):
        try:
            params[key] = float(value)
        except ValueError as exc:
            raise ModelError(f"non-numeric parameter {key}={value!r}") from exc
    try:
        return BUILTIN_MODELS[name](**params)
    except TypeError as exc:
        raise ModelError(f"bad parameters for builtin {name!r}: {exc}") from exc


def parse_model(text: str) -> ModelDocument:
    """Parse a model document (or a one-line ``builtin:`` address).

    Format, one directive per line, ``#`` starts a comment::

        kind linear
        dim N
        matrix
        <N rows of N whitespace-separated reals>
        y0 <N reals>

    Raises :class:`ModelError` with a line number on any syntax problem.
    """
    stripped = text.strip()
    if stripped.startswith("builtin:") and "\n" not in stripped:
        return resolve_builtin(stripped)

    lines = []  # (source line number, tokens)
    for i, raw in enumerate(io.StringIO(text), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((i, body.split()))
    pos = 0

    def take(expect: str) -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(lines):
            raise ModelError(f"unexpected end of input: missing {expect!r}")
        entry = lines[pos]
        pos += 1
        return entry

    def real(token: str, lineno: int) -> float:
        try:
            value = float(token)
        except ValueError as exc:
            raise ModelError(f"line {lineno}: bad number {token!r}") from exc
        if not np.isfinite(value):
            raise ModelError(f"line {lineno}: non-finite literal {token!r}")
        return value

    lineno, tok = take("kind")
    if tok[0] != "kind" or len(tok) != 2:
        raise ModelError(f"line {lineno}: expected 'kind <linear>'")
    kind = tok[1]
    if kind != "linear":
        raise ModelError(f"line {lineno}: unsupported kind {kind!r}")

    lineno, tok = take("dim")
    if tok[0] != "dim" or len(tok) != 2:
        raise ModelError(f"line {lineno}: expected 'dim N'")
    try:
        dim = int(tok[1])
    except ValueError as exc:
        raise ModelError(f"line {lineno}: bad dimension {tok[1]!r}") from exc
    if dim < 1:
        raise ModelError(f"line {lineno}: dimension must be >= 1")

    lineno, tok = take("matrix")
    if tok != ["matrix"]:
        raise ModelError(f"line {lineno}: expected 'matrix'")
    rows = []
    for _ in range(dim):
        lineno, tok = take("matrix row")
        if len(tok) != dim:
            raise ModelError(f"line {lineno}: expected {dim} entries, got {len(tok)}")
        rows.append([real(t, lineno) for t in tok])

    lineno, tok = take("y0")
    if tok[0] != "y0" or len(tok) != dim + 1:
        raise ModelError(f"line {lineno}: expected 'y0' followed by {dim} entries")
    y0 = [real(t, lineno) for t in tok[1:]]

    if pos != len(lines):
        raise ModelError(f"line {lines[pos][0]}: trailing content after y0")
    return ModelDocument(kind=kind, dimension=dim, matrix=np.array(rows), y0=np.array(y0))


def serialize_model(doc: ModelDocument) -> str:
    """Render a document in the line format accepted by :func:`parse_model`."""
    out = [f"kind {doc.kind}", f"dim {doc.dimension}", "matrix"]
    for row in doc.matrix:
        out.append(" ".join(format(v, ".17g") for v in row))
    out.append("y0 " + " ".join(format(v, ".17g") for v in doc.y0))
    return "\n".join(out) + "\n"


def load_model(source: str) -> ModelDocument:
    """Load a model from a ``builtin:`` address, a file path, or raw text."""
    if source.startswith("builtin:"):
        return resolve_builtin(source)
    if "\n" not in source:
        try:
            with open(source, encoding="utf-8") as handle:
                return parse_model(handle.read())
        except OSError as exc:
            raise ModelError(f"cannot read model file {source!r}: {exc}") from exc
    return parse_model(source)
