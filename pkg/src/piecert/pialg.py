"""The 3-part PI operator algebra.

A PI operator acts on vector-valued square-integrable functions on ``[a, b]``
as a pointwise multiplier plus two triangular integral kernels::

    (P x)(s) = R0(s) x(s) + int_a^s R1(s, th) x(th) dth
                          + int_s^b R2(s, th) x(th) dth

Entries of ``R0`` are :class:`~piecert.kernelalg.Poly1`; entries of ``R1``
and ``R2`` are :class:`~piecert.kernelalg.Poly2`.  The class with ``R0 = 0``
(pure integral operators) is closed under composition with anything, and the
whole class is a *-algebra: composition and adjoint are implemented exactly
at the coefficient level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernelalg import Poly1, Poly2, kernel_convolve

__all__ = [
    "PIOp",
    "compose",
    "adjoint",
    "block_diag",
    "norm_bound",
    "kernels_equal",
    "PIOpError",
]


class PIOpError(ValueError):
    """Dimension or domain mismatch between PI operators."""


def _obj_array(items) -> np.ndarray:
    arr = np.empty((len(items), len(items[0])), dtype=object)
    for i, row in enumerate(items):
        for j, v in enumerate(row):
            arr[i, j] = v
    return arr


@dataclass(frozen=True)
class PIOp:
    """A PI operator with ``rows x cols`` polynomial entries on ``[a, b]``."""

    domain: tuple[float, float]
    R0: np.ndarray = field(repr=False)  # object array of Poly1
    R1: np.ndarray = field(repr=False)  # object array of Poly2, acts on th < s
    R2: np.ndarray = field(repr=False)  # object array of Poly2, acts on s < th

    def __post_init__(self):
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        for name in ("R0", "R1", "R2"):
            arr = getattr(self, name)
            if arr.shape != self.R0.shape:
                raise PIOpError("kernel blocks must share one shape")
            for entry in arr.ravel():
                if entry.domain != self.domain:
                    raise PIOpError("all kernel entries must share the operator domain")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_kernels(R0, R1, R2, domain=(0.0, 1.0)) -> "PIOp":
        """Build from nested lists of Poly1/Poly2 (or scalars, promoted)."""
        domain = (float(domain[0]), float(domain[1]))

        def up0(v):
            return v if isinstance(v, Poly1) else Poly1.const(float(v), domain)

        def up2(v):
            if isinstance(v, Poly2):
                return v
            if isinstance(v, Poly1):
                return Poly2.from_poly1(v, "s")
            return Poly2.const(float(v), domain)

        r0 = _obj_array([[up0(v) for v in row] for row in R0])
        r1 = _obj_array([[up2(v) for v in row] for row in R1])
        r2 = _obj_array([[up2(v) for v in row] for row in R2])
        return PIOp(domain, r0, r1, r2)

    @staticmethod
    def zero(rows: int, cols: int, domain=(0.0, 1.0)) -> "PIOp":
        domain = (float(domain[0]), float(domain[1]))
        r0 = _obj_array([[Poly1.zero(domain)] * cols for _ in range(rows)])
        r1 = _obj_array([[Poly2.zero(domain)] * cols for _ in range(rows)])
        r2 = _obj_array([[Poly2.zero(domain)] * cols for _ in range(rows)])
        return PIOp(domain, r0, r1, r2)

    @staticmethod
    def identity(n: int, domain=(0.0, 1.0)) -> "PIOp":
        out = PIOp.zero(n, n, domain)
        for i in range(n):
            out.R0[i, i] = Poly1.const(1.0, out.domain)
        return out

    @staticmethod
    def multiplier(entries, domain=(0.0, 1.0)) -> "PIOp":
        """Multiplier-only operator from a nested list of Poly1/scalars."""
        rows = len(entries)
        cols = len(entries[0])
        out = PIOp.zero(rows, cols, domain)
        for i in range(rows):
            for j in range(cols):
                v = entries[i][j]
                out.R0[i, j] = v if isinstance(v, Poly1) else Poly1.const(float(v), out.domain)
        return out

    # -- structure ----------------------------------------------------------

    @property
    def rows(self) -> int:
        return self.R0.shape[0]

    @property
    def cols(self) -> int:
        return self.R0.shape[1]

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def is_pi2(self) -> bool:
        """True when every multiplier entry is the zero polynomial."""
        return all(p.is_zero for p in self.R0.ravel())

    def max_degrees(self) -> tuple[int, int]:
        """Largest s-degree and theta-degree over all kernel entries."""
        ds = max([0] + [int(p.degree) for p in self.R0.ravel() if not p.is_zero])
        dth = 0
        for arr in (self.R1, self.R2):
            for p in arr.ravel():
                if not p.is_zero:
                    ds = max(ds, int(p.degrees[0]))
                    dth = max(dth, int(p.degrees[1]))
        return ds, dth

    # -- linear structure ----------------------------------------------------

    def __add__(self, other: "PIOp") -> "PIOp":
        self._check_same_shape(other)
        out = PIOp.zero(self.rows, self.cols, self.domain)
        for i in range(self.rows):
            for j in range(self.cols):
                out.R0[i, j] = self.R0[i, j] + other.R0[i, j]
                out.R1[i, j] = self.R1[i, j] + other.R1[i, j]
                out.R2[i, j] = self.R2[i, j] + other.R2[i, j]
        return out

    def __sub__(self, other: "PIOp") -> "PIOp":
        return self + other.scale(-1.0)

    def __neg__(self) -> "PIOp":
        return self.scale(-1.0)

    def scale(self, c: float) -> "PIOp":
        out = PIOp.zero(self.rows, self.cols, self.domain)
        for i in range(self.rows):
            for j in range(self.cols):
                out.R0[i, j] = self.R0[i, j].scale(c)
                out.R1[i, j] = self.R1[i, j].scale(c)
                out.R2[i, j] = self.R2[i, j].scale(c)
        return out

    def left_multiply(self, g: Poly1) -> "PIOp":
        """Multiply the output pointwise by ``g(s)``."""
        g2 = Poly2.from_poly1(g, "s")
        out = PIOp.zero(self.rows, self.cols, self.domain)
        for i in range(self.rows):
            for j in range(self.cols):
                out.R0[i, j] = self.R0[i, j] * g
                out.R1[i, j] = g2 * self.R1[i, j]
                out.R2[i, j] = g2 * self.R2[i, j]
        return out

    def _check_same_shape(self, other: "PIOp") -> None:
        if self.domain != other.domain:
            raise PIOpError(f"domain mismatch: {self.domain} vs {other.domain}")
        if self.R0.shape != other.R0.shape:
            raise PIOpError(f"shape mismatch: {self.R0.shape} vs {other.R0.shape}")

    # -- operator actions ----------------------------------------------------

    def apply(self, x) -> list[Poly1]:
        """Apply to a vector of polynomials, returning exact polynomials."""
        xs = list(x) if isinstance(x, (list, tuple)) else [x]
        if len(xs) != self.cols:
            raise PIOpError(f"operator has {self.cols} columns, argument has {len(xs)}")
        a, b = self.domain
        out = []
        for i in range(self.rows):
            acc = Poly1.zero(self.domain)
            for j in range(self.cols):
                xj = xs[j]
                if xj.domain != self.domain:
                    raise PIOpError("argument domain does not match operator domain")
                acc = acc + self.R0[i, j] * xj
                xth = Poly2.from_poly1(xj, "theta")
                lower = kernel_convolve(self.R1[i, j] * xth, Poly2.const(1.0, self.domain), a, "s")
                upper = kernel_convolve(self.R2[i, j] * xth, Poly2.const(1.0, self.domain), "s", b)
                acc = acc + _poly2_to_poly1_in_s(lower) + _poly2_to_poly1_in_s(upper)
            out.append(acc)
        return out

    def compose(self, other: "PIOp") -> "PIOp":
        return compose(self, other)

    def adjoint(self) -> "PIOp":
        return adjoint(self)

    def kernels_equal(self, other: "PIOp", tol: float = 1e-12) -> bool:
        return kernels_equal(self, other, tol)

    def norm_bound(self) -> float:
        return norm_bound(self)

    def describe(self, names: tuple[str, str, str] = ("R0", "R1", "R2")) -> str:
        lines = []
        for label, arr in zip(names, (self.R0, self.R1, self.R2)):
            for i in range(self.rows):
                row = ", ".join(str(arr[i, j]) for j in range(self.cols))
                lines.append(f"{label}[{i}] = [{row}]")
        return "\n".join(lines)


def _poly2_to_poly1_in_s(p: Poly2) -> Poly1:
    if p.is_zero:
        return Poly1.zero(p.domain)
    if p.coeffs.shape[1] > 1:
        raise PIOpError("internal: expected a polynomial in s only")
    return Poly1(p.coeffs[:, 0], p.domain)


def compose(P: PIOp, Q: PIOp) -> PIOp:
    """Exact composition ``P o Q``.

    The multiplier terms combine pointwise and the kernel-kernel products are
    reduced by splitting the inner integration variable at ``th`` and ``s``
    and exchanging the order of integration, giving three exact triangle
    integrals per kernel slot.  Composition with a zero-multiplier operator
    on either side yields an identically zero multiplier.
    """
    if P.domain != Q.domain:
        raise PIOpError(f"domain mismatch: {P.domain} vs {Q.domain}")
    if P.cols != Q.rows:
        raise PIOpError(f"inner dimensions differ: {P.cols} vs {Q.rows}")
    a, b = P.domain
    out = PIOp.zero(P.rows, Q.cols, P.domain)
    for i in range(P.rows):
        for j in range(Q.cols):
            r0 = Poly1.zero(P.domain)
            r1 = Poly2.zero(P.domain)
            r2 = Poly2.zero(P.domain)
            for k in range(P.cols):
                p0, p1, p2 = P.R0[i, k], P.R1[i, k], P.R2[i, k]
                q0, q1, q2 = Q.R0[k, j], Q.R1[k, j], Q.R2[k, j]
                q0s = Poly2.from_poly1(q0, "theta")  # q0 evaluated at the inner variable
                r0 = r0 + p0 * q0
                # multiplier times kernel and kernel times multiplier
                p0s = Poly2.from_poly1(p0, "s")
                r1 = r1 + p0s * q1 + p1 * q0s
                r2 = r2 + p0s * q2 + p2 * q0s
                # kernel-kernel terms, inner variable eta split at th and s
                r1 = r1 + kernel_convolve(p1, q1, "theta", "s")
                r1 = r1 + kernel_convolve(p1, q2, a, "theta")
                r1 = r1 + kernel_convolve(p2, q1, "s", b)
                r2 = r2 + kernel_convolve(p1, q2, a, "s")
                r2 = r2 + kernel_convolve(p2, q1, "theta", b)
                r2 = r2 + kernel_convolve(p2, q2, "s", "theta")
            out.R0[i, j] = r0
            out.R1[i, j] = r1
            out.R2[i, j] = r2
    return out


def adjoint(P: PIOp) -> PIOp:
    """L2 adjoint: transpose the multiplier, swap and transpose the kernels."""
    out = PIOp.zero(P.cols, P.rows, P.domain)
    for i in range(P.cols):
        for j in range(P.rows):
            out.R0[i, j] = P.R0[j, i]
            out.R1[i, j] = P.R2[j, i].swap_vars()
            out.R2[i, j] = P.R1[j, i].swap_vars()
    return out


def block_diag(blocks) -> PIOp:
    """Block-diagonal assembly of square PI operators on one domain."""
    blocks = list(blocks)
    if not blocks:
        raise PIOpError("block_diag needs at least one block")
    domain = blocks[0].domain
    for blk in blocks:
        if blk.domain != domain:
            raise PIOpError("blocks must share one domain")
        if not blk.is_square:
            raise PIOpError("blocks must be square")
    n = sum(blk.rows for blk in blocks)
    out = PIOp.zero(n, n, domain)
    at = 0
    for blk in blocks:
        m = blk.rows
        for i in range(m):
            for j in range(m):
                out.R0[at + i, at + j] = blk.R0[i, j]
                out.R1[at + i, at + j] = blk.R1[i, j]
                out.R2[at + i, at + j] = blk.R2[i, j]
        at += m
    return out


def kernels_equal(P: PIOp, Q: PIOp, tol: float = 1e-12) -> bool:
    """Entrywise coefficient agreement of all three kernel blocks."""
    if P.domain != Q.domain or P.R0.shape != Q.R0.shape:
        raise PIOpError("operators must share dimensions and domain")
    for i in range(P.rows):
        for j in range(P.cols):
            if not P.R0[i, j].equals(Q.R0[i, j], tol):
                return False
            if not P.R1[i, j].equals(Q.R1[i, j], tol):
                return False
            if not P.R2[i, j].equals(Q.R2[i, j], tol):
                return False
    return True


def kernel_asymmetry(P: PIOp) -> float:
    """Largest coefficient deviation between ``P`` and its adjoint."""
    Q = adjoint(P)
    worst = 0.0
    for arr_p, arr_q in ((P.R0, Q.R0), (P.R1, Q.R1), (P.R2, Q.R2)):
        for p, q in zip(arr_p.ravel(), arr_q.ravel()):
            d = p - q
            if isinstance(d, Poly1):
                worst = max(worst, float(np.max(np.abs(d.coeffs))) if not d.is_zero else 0.0)
            else:
                worst = max(worst, float(np.max(np.abs(d.coeffs))) if not d.is_zero else 0.0)
    return worst


def norm_bound(P: PIOp) -> float:
    """Computable upper bound on the induced L2 norm.

    Sum of the supremum of the multiplier's largest singular value over the
    interval (grid search refined to 1e-6 in the argument) and the
    Hilbert-Schmidt norm of the integral part, whose squared triangle
    integrals are evaluated exactly.
    """
    a, b = P.domain
    mult = 0.0
    if not all(p.is_zero for p in P.R0.ravel()):
        mult = _max_sigma(P.R0, a, b)
    hs2 = 0.0
    for i in range(P.rows):
        for j in range(P.cols):
            hs2 += _triangle_square_integral(P.R1[i, j], lower=True)
            hs2 += _triangle_square_integral(P.R2[i, j], lower=False)
    return mult + float(np.sqrt(hs2))


def _max_sigma(R0: np.ndarray, a: float, b: float) -> float:
    def sigma(s: float) -> float:
        M = np.array([[float(R0[i, j](s)) for j in range(R0.shape[1])] for i in range(R0.shape[0])])
        return float(np.linalg.norm(M, 2))

    grid = np.linspace(a, b, 513)
    vals = np.array([sigma(s) for s in grid])
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    # golden-section refinement of the maximizer to 1e-6
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    c = hi - gr * (hi - lo)
    d = lo + gr * (hi - lo)
    fc, fd = sigma(c), sigma(d)
    while hi - lo > 1e-6:
        if fc < fd:
            lo, c, fc = c, d, fd
            d = lo + gr * (hi - lo)
            fd = sigma(d)
        else:
            hi, d, fd = d, c, fc
            c = hi - gr * (hi - lo)
            fc = sigma(c)
    return max(float(vals[k]), fc, fd)


def _triangle_square_integral(ker: Poly2, lower: bool) -> float:
    if ker.is_zero:
        return 0.0
    a, b = ker.domain
    sq = ker * ker
    if lower:
        inner = kernel_convolve(sq, Poly2.const(1.0, ker.domain), a, "s")
    else:
        inner = kernel_convolve(sq, Poly2.const(1.0, ker.domain), "s", b)
    return _poly2_to_poly1_in_s(inner).integral()
