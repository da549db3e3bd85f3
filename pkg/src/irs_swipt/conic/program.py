"""Standard-form conic programs.

    minimize    c^T x + offset
    subject to  A x = b
                x[block] in K_block   for every named block

Each block carries one cone: ``free``, ``nonneg``, ``soc`` (first entry is
the norm bound) or ``psd``.  A ``psd`` block of order ``d`` is a complex
Hermitian matrix stored as ``d**2`` reals: the ``d`` diagonal entries, then
real parts of the strict upper triangle (row-major), then imaginary parts.
Hermitian symmetry therefore holds by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

CONE_KINDS = ("free", "nonneg", "soc", "psd")
STATUSES = ("optimal", "infeasible", "unbounded", "numerical-failure")

FEAS_TOL = 1e-7
GAP_TOL = 1e-8
MAX_ITER = 200


@dataclass(frozen=True)
class Block:
    name: str
    kind: str
    start: int
    dim: int  # matrix order for "psd", length otherwise

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError(f"block {self.name!r} must have positive dimension")
        if self.kind == "soc" and self.dim < 2:
            raise ValueError("second-order cone blocks need at least two entries")

    @property
    def size(self) -> int:
        return self.dim * self.dim if self.kind == "psd" else self.dim

    @property
    def slice(self) -> slice:
        return slice(self.start, self.start + self.size)


@dataclass(frozen=True)
class ConicProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    blocks: tuple[Block, ...]
    offset: float = 0.0
    # builder bookkeeping (scalings, index maps); not part of the math
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.b.shape[0]

    def block(self, name: str) -> Block:
        for blk in self.blocks:
            if blk.name == name:
                return blk
        raise KeyError(name)

    def validate(self) -> None:
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError("objective or right-hand side has the wrong shape")
        owner = np.zeros(n, dtype=int)
        names = set()
        for blk in self.blocks:
            if blk.name in names:
                raise ValueError(f"duplicate block {blk.name!r}")
            names.add(blk.name)
            owner[blk.slice] += 1
        if np.any(owner != 1):
            raise ValueError("every variable must belong to exactly one block")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.A.data))):
            raise ValueError("program data must be finite")

    def to_json(self) -> str:
        """Debug dump for cross-checking against external solvers.

        Schema::

            {"sense": "min", "n": int, "m": int, "offset": float,
             "c": [float] * n, "b": [float] * m,
             "A": {"rows": [int], "cols": [int], "vals": [float]},
             "blocks": [{"name": str, "kind": "free|nonneg|soc|psd",
                         "start": int, "dim": int}],
             "psd_layout": "diag, Re(strict upper, row-major), Im(strict upper)"}
        """
        coo = self.A.tocoo()
        doc = {
            "sense": "min",
            "n": self.num_vars,
            "m": self.num_constraints,
            "offset": self.offset,
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "A": {"rows": coo.row.tolist(), "cols": coo.col.tolist(),
                  "vals": coo.data.tolist()},
            "blocks": [{"name": b.name, "kind": b.kind, "start": b.start, "dim": b.dim}
                       for b in self.blocks],
            "psd_layout": "diag, Re(strict upper, row-major), Im(strict upper)",
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ConicProgram":
        doc = json.loads(text)
        A = sp.coo_matrix((doc["A"]["vals"], (doc["A"]["rows"], doc["A"]["cols"])),
                          shape=(doc["m"], doc["n"])).tocsr()
        prog = cls(
            c=np.asarray(doc["c"], dtype=float),
            A=A,
            b=np.asarray(doc["b"], dtype=float),
            blocks=tuple(Block(d["name"], d["kind"], d["start"], d["dim"])
                         for d in doc["blocks"]),
            offset=float(doc["offset"]),
        )
        prog.validate()
        return prog


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    objective: float
    gap: float
    iterations: int
    max_violation: float
    values: dict[str, np.ndarray] = field(default_factory=dict)
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]


# ---------------------------------------------------------------------------
# Hermitian parametrization


@lru_cache(maxsize=64)
def _pairs(d: int):
    iu, ju = np.triu_indices(d, k=1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def params_to_hermitian(p: np.ndarray, d: int) -> np.ndarray:
    iu, ju = _pairs(d)
    npair = iu.size
    H = np.zeros((d, d), dtype=complex)
    H[np.arange(d), np.arange(d)] = p[:d]
    upper = p[d:d + npair] + 1j * p[d + npair:]
    H[iu, ju] = upper
    H[ju, iu] = upper.conj()
    return H


def hermitian_to_params(H: np.ndarray) -> np.ndarray:
    d = H.shape[0]
    iu, ju = _pairs(d)
    Hh = 0.5 * (H + H.conj().T)
    upper = Hh[iu, ju]
    return np.concatenate([Hh.diagonal().real, upper.real, upper.imag])


def coef_to_hermitian(g: np.ndarray, d: int) -> np.ndarray:
    """Hermitian ``A`` with ``Re Tr(A H) = g . params(H)``."""
    iu, ju = _pairs(d)
    npair = iu.size
    A = np.zeros((d, d), dtype=complex)
    A[np.arange(d), np.arange(d)] = g[:d]
    upper = 0.5 * (g[d:d + npair] + 1j * g[d + npair:])
    A[iu, ju] = upper
    A[ju, iu] = upper.conj()
    return A


def hermitian_to_coef(A: np.ndarray) -> np.ndarray:
    d = A.shape[0]
    iu, ju = _pairs(d)
    upper = A[iu, ju]
    return np.concatenate([A.diagonal().real, 2.0 * upper.real, 2.0 * upper.imag])


def embed_hermitian(H) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``.

    ``Tr(embed(A) @ embed(H)) == 2 * Re Tr(A @ H)`` and the spectrum of the
    embedding is the spectrum of ``H`` with every eigenvalue doubled up.
    """
    H = np.atleast_2d(np.asarray(H))
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def unembed_hermitian(E: np.ndarray) -> np.ndarray:
    d = E.shape[0] // 2
    re = 0.5 * (E[:d, :d] + E[d:, d:])
    im = 0.5 * (E[d:, :d] - E[:d, d:])
    return re + 1j * im


# ---------------------------------------------------------------------------
# Builder


class Affine:
    """Sparse affine scalar ``coef . x[idx] + const``."""

    __slots__ = ("idx", "coef", "const")

    def __init__(self, idx=(), coef=(), const: float = 0.0):
        self.idx = np.asarray(idx, dtype=np.int64).ravel()
        self.coef = np.asarray(coef, dtype=float).ravel()
        self.const = float(const)

    @classmethod
    def var(cls, i) -> "Affine":
        return cls([int(i)], [1.0])

    def __add__(self, other):
        if not isinstance(other, Affine):
            return Affine(self.idx, self.coef, self.const + float(other))
        return Affine(np.concatenate([self.idx, other.idx]),
                      np.concatenate([self.coef, other.coef]),
                      self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine(self.idx, -self.coef, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        s = float(scalar)
        return Affine(self.idx, self.coef * s, self.const * s)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def value(self, x: np.ndarray) -> float:
        return float(self.coef @ x[self.idx]) + self.const if self.idx.size else self.const


def affine_sum(terms: Iterable[Affine]) -> Affine:
    idx, coef, const = [], [], 0.0
    for t in terms:
        idx.append(t.idx)
        coef.append(t.coef)
        const += t.const
    if not idx:
        return Affine()
    return Affine(np.concatenate(idx), np.concatenate(coef), const)


class HermitianVariable:
    def __init__(self, block: Block):
        self.block = block
        self.d = block.dim
        self.start = block.start

    def trace_with(self, A: np.ndarray, scale: float = 1.0) -> Affine:
        """``scale * Re Tr(A H)``."""
        g = hermitian_to_coef(np.asarray(A, dtype=complex))
        return Affine(self.start + np.arange(self.d * self.d), g * scale)

    def diag(self, n: int) -> Affine:
        return Affine.var(self.start + n)

    def value(self, x: np.ndarray) -> np.ndarray:
        return params_to_hermitian(x[self.block.slice], self.d)


class ProgramBuilder:
    """Assemble a :class:`ConicProgram` from named blocks and affine rows.

    Inequalities get a nonnegative slack each; the slacks are pooled into a
    single ``"slack"`` block appended at build time.
    """

    def __init__(self):
        self._blocks: list[Block] = []
        self._n = 0
        self._eq: list[tuple[Affine, float]] = []  # expr == rhs
        self._ineq: list[tuple[Affine, float]] = []  # expr >= rhs
        self._objective = Affine()
        self._socs = 0

    def _add_block(self, name, kind, dim) -> Block:
        if any(b.name == name for b in self._blocks) or name == "slack":
            raise ValueError(f"duplicate block {name!r}")
        blk = Block(name, kind, self._n, dim)
        self._blocks.append(blk)
        self._n += blk.size
        return blk

    def variable(self, name: str, size: int = 1, cone: str = "free") -> np.ndarray:
        blk = self._add_block(name, cone, size)
        return np.arange(blk.start, blk.start + blk.size)

    def hermitian(self, name: str, d: int) -> HermitianVariable:
        return HermitianVariable(self._add_block(name, "psd", d))

    def equal(self, expr: Affine, rhs: float = 0.0) -> None:
        self._eq.append((expr, float(rhs)))

    def geq(self, expr: Affine, rhs: float = 0.0) -> None:
        self._ineq.append((expr, float(rhs)))

    def leq(self, expr: Affine, rhs: float = 0.0) -> None:
        self._ineq.append((-expr, -float(rhs)))

    def soc(self, t: Affine, ys: Sequence[Affine], name: str | None = None) -> np.ndarray:
        """``||ys|| <= t`` through a fresh second-order cone block."""
        name = name or f"soc{self._socs}"
        self._socs += 1
        q = self.variable(name, 1 + len(ys), cone="soc")
        for qi, e in zip(q, [t, *ys]):
            self.equal(Affine.var(qi) - e)
        return q

    def hyperbolic(self, xs: Sequence[Affine], y: Affine, z: Affine,
                   name: str | None = None) -> np.ndarray:
        """``||xs||^2 <= y z`` with ``y, z >= 0``."""
        t, ys = hyperbolic_to_soc(xs, y, z)
        return self.soc(t, ys, name)

    def minimize(self, objective: Affine) -> None:
        self._objective = objective

    def maximize(self, objective: Affine) -> None:
        self._objective = -objective

    def build(self) -> ConicProgram:
        blocks = list(self._blocks)
        n = self._n
        nslack = len(self._ineq)
        if nslack:
            blocks.append(Block("slack", "nonneg", n, nslack))
        ntot = n + nslack
        rows, cols, vals, b = [], [], [], []
        r = 0
        for expr, rhs in self._eq:
            rows.append(np.full(expr.idx.size, r))
            cols.append(expr.idx)
            vals.append(expr.coef)
            b.append(rhs - expr.const)
            r += 1
        for k, (expr, rhs) in enumerate(self._ineq):
            # expr - slack = rhs
            rows.append(np.full(expr.idx.size + 1, r))
            cols.append(np.append(expr.idx, n + k))
            vals.append(np.append(expr.coef, -1.0))
            b.append(rhs - expr.const)
            r += 1
        if rows:
            A = sp.coo_matrix((np.concatenate(vals),
                               (np.concatenate(rows), np.concatenate(cols))),
                              shape=(r, ntot)).tocsr()
            A.sum_duplicates()
            A.eliminate_zeros()
        else:
            A = sp.csr_matrix((0, ntot))
        c = np.zeros(ntot)
        np.add.at(c, self._objective.idx, self._objective.coef)
        prog = ConicProgram(c=c, A=A, b=np.asarray(b, dtype=float), blocks=tuple(blocks),
                            offset=self._objective.const)
        prog.validate()
        return prog


def hyperbolic_to_soc(xs: Sequence[Affine], y: Affine, z: Affine):
    """``||x||^2 <= y z``  <=>  ``||[2x; y - z]|| <= y + z``  for ``y, z >= 0``.

    Returns ``(t, ys)`` describing the cone ``||ys|| <= t``.
    """
    return y + z, [2.0 * x for x in xs] + [y - z]


def hyperbolic_holds(x: np.ndarray, y: float, z: float, tol: float = 0.0) -> tuple[bool, bool]:
    """Evaluate both forms of the restricted hyperbolic constraint."""
    x = np.atleast_1d(np.asarray(x))
    direct = float(np.vdot(x, x).real) <= y * z + tol
    cone = float(np.linalg.norm(np.concatenate([2.0 * np.abs(x), [y - z]]))) <= y + z + tol
    return direct, cone


# ---------------------------------------------------------------------------
# Post-solve checks


def block_violation(blk: Block, v: np.ndarray) -> float:
    """Cone violation of one block.

    Second-order and PSD blocks are measured relative to ``1 + scale`` (the
    norm bound, resp. the largest eigenvalue) so that a cone whose entries
    are large is not judged by an absolute yardstick; nonnegative entries
    are measured absolutely.
    """
    if blk.kind == "free":
        return 0.0
    if blk.kind == "nonneg":
        return float(max(0.0, -v.min()))
    if blk.kind == "soc":
        return float(max(0.0, np.linalg.norm(v[1:]) - v[0]) / (1.0 + abs(v[0])))
    lam = np.linalg.eigvalsh(params_to_hermitian(v, blk.dim))
    return float(max(0.0, -lam[0]) / (1.0 + max(lam[-1], 0.0)))


def max_violation(prog: ConicProgram, x: np.ndarray) -> float:
    worst = float(np.max(np.abs(prog.A @ x - prog.b), initial=0.0))
    for blk in prog.blocks:
        worst = max(worst, block_violation(blk, x[blk.slice]))
    return worst


def unpack(prog: ConicProgram, x: np.ndarray) -> dict[str, np.ndarray]:
    out = {}
    for blk in prog.blocks:
        v = x[blk.slice]
        out[blk.name] = params_to_hermitian(v, blk.dim) if blk.kind == "psd" else v.copy()
    return out
