"""Builder for conic programs in primal standard form.

A :class:`ConicProgram` collects cone-typed variables and affine constraints
and compiles them into ``minimize c'x  s.t.  A x = b,  x in K`` where ``K`` is
a product of a nonnegative orthant, second-order cones and real symmetric PSD
cones.  Inequalities get nonnegative slacks, free variables are split.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .cones import NonnegCone, PsdCone, SecondOrderCone


@dataclass(eq=False)
class Var:
    """Handle to a block of decision variables.

    ``kind`` is one of ``"nonneg"``, ``"soc"``, ``"psd"`` or ``"free"``.  For
    PSD variables ``size`` is the matrix side; otherwise it is the length.
    """

    kind: str
    size: int
    index: int
    name: str = ""

    @property
    def shape(self):
        return (self.size, self.size) if self.kind == "psd" else (self.size,)


@dataclass
class _Row:
    terms: list
    rhs: float


class ConicProgram:
    def __init__(self):
        self.vars: list[Var] = []
        self.rows: list[_Row] = []
        self._objective: list = []
        self._obj_const = 0.0
        self.sense = "min"

    # -- variables ---------------------------------------------------------

    def _new(self, kind, size, name):
        if size < 1:
            raise ValueError("variable block must be nonempty")
        v = Var(kind, int(size), len(self.vars), name)
        self.vars.append(v)
        return v

    def nonneg(self, size: int = 1, name: str = "") -> Var:
        return self._new("nonneg", size, name)

    def soc(self, size: int, name: str = "") -> Var:
        """Vector ``(u0, u1)`` constrained to ``u0 >= ||u1||``."""
        if size < 2:
            raise ValueError("second-order cone needs dimension >= 2")
        return self._new("soc", size, name)

    def psd(self, side: int, name: str = "") -> Var:
        return self._new("psd", side, name)

    def free(self, size: int = 1, name: str = "") -> Var:
        return self._new("free", size, name)

    # -- constraints ---------------------------------------------------------

    def _check_terms(self, terms):
        terms = list(terms.items()) if isinstance(terms, dict) else list(terms)
        out = []
        for var, coef in terms:
            if var.kind == "psd":
                coef = np.asarray(coef, dtype=float)
                if coef.ndim == 1:
                    if coef.size != var.size:
                        raise ValueError(f"diagonal coefficient of length {coef.size} for {var.size}x{var.size} block")
                elif coef.shape != var.shape:
                    raise ValueError(f"coefficient shape {coef.shape} does not match {var.shape}")
                elif not np.allclose(coef, coef.T, atol=1e-13 * (1 + np.abs(coef).max())):
                    raise ValueError("PSD coefficient must be symmetric")
                else:
                    coef = (coef + coef.T) / 2.0
            else:
                coef = np.broadcast_to(np.asarray(coef, dtype=float), var.shape).copy()
            out.append((var, coef))
        return out

    def add_constraint(self, terms, sense: str, rhs: float) -> None:
        """Add ``sum <coef, var>  (== | <= | >=)  rhs``."""
        terms = self._check_terms(terms)
        if sense == "==":
            pass
        elif sense in ("<=", ">="):
            slack = self.nonneg(1, name="slack")
            terms.append((slack, np.array([1.0 if sense == "<=" else -1.0])))
        else:
            raise ValueError(f"unknown constraint sense {sense!r}")
        self.rows.append(_Row(terms, float(rhs)))

    def fix(self, var: Var, index: int, value: float) -> None:
        coef = np.zeros(var.shape)
        coef[index] = 1.0
        self.add_constraint([(var, coef)], "==", value)

    def minimize(self, terms, constant: float = 0.0) -> None:
        self._objective = self._check_terms(terms)
        self._obj_const = float(constant)
        self.sense = "min"

    def maximize(self, terms, constant: float = 0.0) -> None:
        self.minimize(terms, constant)
        self.sense = "max"

    # -- compilation ---------------------------------------------------------

    def compile(self) -> "StandardForm":
        return StandardForm.from_program(self)


@dataclass
class _PsdRows:
    cone: PsdCone
    diag_idx: np.ndarray
    D: np.ndarray  # (m_d, p)
    dense_idx: np.ndarray
    S: np.ndarray  # (m_s, p, p)


@dataclass
class StandardForm:
    """``minimize c'x  s.t.  A x = b,  x in K`` with structured PSD rows."""

    cones: list
    n: int
    b: np.ndarray
    c: np.ndarray
    obj_const: float
    sign: float
    A_vec: np.ndarray  # rows over the vector (non-PSD) coordinates
    n_vec: int
    psd_rows: list = field(default_factory=list)
    layout: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.b.size

    @classmethod
    def from_program(cls, prog: ConicProgram) -> "StandardForm":
        # nonneg coordinates (incl. split free vars) first, then SOCs, then PSD
        layout = {}
        n_l = 0
        for v in prog.vars:
            if v.kind == "nonneg":
                layout[v.index] = ("l", n_l)
                n_l += v.size
            elif v.kind == "free":
                layout[v.index] = ("f", n_l)
                n_l += 2 * v.size
        cones = []
        if n_l:
            cones.append(NonnegCone(n_l))
        off = n_l
        # SOC variables of equal size share one vectorized cone block
        by_size: dict = {}
        for v in prog.vars:
            if v.kind == "soc":
                by_size.setdefault(v.size, []).append(v)
        for size, group in by_size.items():
            cone = SecondOrderCone(size, len(group))
            cone.offset = off
            cones.append(cone)
            for v in group:
                layout[v.index] = ("q", off)
                off += size
        n_vec = off
        psd_cones = {}
        for v in prog.vars:
            if v.kind == "psd":
                cone = PsdCone(v.size)
                cone.offset = off
                layout[v.index] = ("s", off)
                psd_cones[v.index] = cone
                cones.append(cone)
                off += cone.dim
        n = off
        m = len(prog.rows)

        A_vec = np.zeros((m, n_vec))
        b = np.array([r.rhs for r in prog.rows])
        psd_diag = {k: {} for k in psd_cones}
        psd_dense = {k: {} for k in psd_cones}
        for i, row in enumerate(prog.rows):
            for var, coef in row.terms:
                kind, start = layout[var.index]
                if kind in ("l", "q"):
                    A_vec[i, start:start + var.size] += coef
                elif kind == "f":
                    A_vec[i, start:start + var.size] += coef
                    A_vec[i, start + var.size:start + 2 * var.size] -= coef
                else:
                    _accumulate_psd(psd_diag[var.index], psd_dense[var.index], i, coef)

        psd_rows = []
        for k, cone in psd_cones.items():
            dd, ds = psd_diag[k], psd_dense[k]
            # a row with both diagonal and dense parts is kept dense
            for i in list(dd):
                if i in ds:
                    ds[i] = ds[i] + np.diag(dd.pop(i))
            d_idx = np.array(sorted(dd), dtype=int)
            s_idx = np.array(sorted(ds), dtype=int)
            D = np.array([dd[i] for i in d_idx]).reshape(len(d_idx), cone.p)
            S = np.array([ds[i] for i in s_idx]).reshape(len(s_idx), cone.p, cone.p)
            psd_rows.append(_PsdRows(cone, d_idx, D, s_idx, S))

        sign = -1.0 if prog.sense == "max" else 1.0
        c = np.zeros(n)
        for var, coef in prog._objective:
            kind, start = layout[var.index]
            if kind in ("l", "q"):
                c[start:start + var.size] += sign * coef
            elif kind == "f":
                c[start:start + var.size] += sign * coef
                c[start + var.size:start + 2 * var.size] -= sign * coef
            else:
                C = np.diag(coef) if coef.ndim == 1 else coef
                cone = psd_cones[var.index]
                c[cone.sl] += sign * C.ravel()
        return cls(cones, n, b, c, prog._obj_const, sign, A_vec, n_vec, psd_rows,
                   {v.index: (v, layout[v.index]) for v in prog.vars})

    # -- linear maps ---------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.A_vec @ x[:self.n_vec]
        for pr in self.psd_rows:
            X = x[pr.cone.sl].reshape(pr.cone.p, pr.cone.p)
            if pr.diag_idx.size:
                out[pr.diag_idx] += pr.D @ np.diag(X)
            if pr.dense_idx.size:
                out[pr.dense_idx] += np.einsum("kij,ij->k", pr.S, X)
        return out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[:self.n_vec] = self.A_vec.T @ y
        for pr in self.psd_rows:
            Y = np.zeros((pr.cone.p, pr.cone.p))
            if pr.diag_idx.size:
                Y[np.diag_indices(pr.cone.p)] += pr.D.T @ y[pr.diag_idx]
            if pr.dense_idx.size:
                Y += np.einsum("k,kij->ij", y[pr.dense_idx], pr.S)
            out[pr.cone.sl] = Y.ravel()
        return out

    def row_norms(self) -> np.ndarray:
        sq = np.sum(self.A_vec**2, axis=1)
        for pr in self.psd_rows:
            if pr.diag_idx.size:
                sq[pr.diag_idx] += np.sum(pr.D**2, axis=1)
            if pr.dense_idx.size:
                sq[pr.dense_idx] += np.sum(pr.S**2, axis=(1, 2))
        return np.sqrt(sq)

    def scale_rows(self, d: np.ndarray) -> None:
        self.A_vec *= d[:, None]
        self.b = self.b * d
        for pr in self.psd_rows:
            if pr.diag_idx.size:
                pr.D = pr.D * d[pr.diag_idx, None]
            if pr.dense_idx.size:
                pr.S = pr.S * d[pr.dense_idx, None, None]

    def extract(self, x: np.ndarray, var: Var) -> np.ndarray:
        _, (kind, start) = self.layout[var.index]
        if kind in ("l", "q"):
            return x[start:start + var.size].copy()
        if kind == "f":
            return x[start:start + var.size] - x[start + var.size:start + 2 * var.size]
        X = x[start:start + var.size**2].reshape(var.size, var.size)
        return (X + X.T) / 2.0

    # -- plain-text dump -----------------------------------------------------

    def dense_A(self) -> np.ndarray:
        A = np.zeros((self.m, self.n))
        for i in range(self.m):
            e = np.zeros(self.m)
            e[i] = 1.0
            A[i] = self.rmatvec(e)
        return A

    def dump(self, fh) -> None:
        """Write the program in a plain-text conic standard form.

        Layout: ``minimize c'x s.t. Ax = b, x in K``; PSD blocks are listed
        as full row-major ``p*p`` coordinates.
        """
        cone_desc = " ".join(_describe(k) for k in self.cones)
        fh.write("# conic standard form: minimize c'x  s.t.  A x = b,  x in K\n")
        fh.write(f"dims n={self.n} m={self.m}\n")
        fh.write(f"cones {cone_desc}\n")
        fh.write("c " + " ".join(f"{i}:{v:.17g}" for i, v in enumerate(self.c) if v != 0.0) + "\n")
        fh.write("b " + " ".join(f"{v:.17g}" for v in self.b) + "\n")
        A = self.dense_A()
        for i, j in zip(*np.nonzero(A)):
            fh.write(f"A {i} {j} {A[i, j]:.17g}\n")


def _describe(cone) -> str:
    if cone.kind == "s":
        return f"s:{cone.p}"
    if cone.kind == "q":
        return " ".join([f"q:{cone.q}"] * cone.count)
    return f"l:{cone.dim}"


def _accumulate_psd(diag: dict, dense: dict, i: int, coef: np.ndarray) -> None:
    if coef.ndim == 1:
        diag[i] = diag.get(i, 0.0) + coef
        return
    off = coef - np.diag(np.diag(coef))
    if not np.any(off):
        diag[i] = diag.get(i, 0.0) + np.diag(coef)
    else:
        dense[i] = dense.get(i, 0.0) + coef


def parse_dump(lines: Iterable[str]):
    """Read back a dump as ``(c, A, b, cones)`` with dense arrays."""
    c = A = b = None
    cones = []
    n = m = 0
    entries = []
    for line in lines:
        if not line.strip() or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key == "dims":
            kv = dict(p.split("=") for p in rest.split())
            n, m = int(kv["n"]), int(kv["m"])
        elif key == "cones":
            cones = [(p.split(":")[0], int(p.split(":")[1])) for p in rest.split()]
        elif key == "c":
            c = np.zeros(n)
            for tok in rest.split():
                i, v = tok.split(":")
                c[int(i)] = float(v)
        elif key == "b":
            b = np.array([float(t) for t in rest.split()]) if rest.strip() else np.zeros(0)
        elif key == "A":
            i, j, v = rest.split()
            entries.append((int(i), int(j), float(v)))
    A = np.zeros((m, n))
    for i, j, v in entries:
        A[i, j] = v
    return c, A, b, cones
