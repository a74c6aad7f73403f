"""Conversion of boundary-constrained PDEs to partial integral equations.

Given an order-``n`` component with boundary rows
``sum_j Na[i, j] u^(j-1)(a) + Nb[i, j] u^(j-1)(b) = 0``, the map ``T`` sends
the free state ``x`` in L2 to the unique ``u`` satisfying the boundary rows
with ``u^(n) = x``.  Its kernel is polynomial and explicit::

    G(s, th) = e1(s - a)^T (I - P) en(a - th),   th < s
             = -e1(s - a)^T P en(a - th),        s < th

with ``P = (Na + Nb W(b - a))^{-1} Nb W(b - a)``, ``W`` the upper-triangular
Taylor matrix, ``e1`` the Taylor column in ``s`` and ``en`` the reversed
Taylor column in ``th``.  The construction is valid exactly when
``det(Na + Nb W(b - a))`` is nonzero.

A first-order-in-time system of such components (plus undifferentiated,
order-0 components) assembles into a pair ``(T, A)`` of PI operators with
``T x' = A x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .kernelalg import Poly1, Poly2
from .pialg import PIOp, block_diag

__all__ = [
    "BCSpec",
    "ComponentSpec",
    "DynTerm",
    "PDESystem",
    "PIESystem",
    "IllPosedBCError",
    "taylor_matrix",
    "lemma_t_operator",
    "dk_of_t",
    "assemble_pie",
    "boundary_residuals",
]

DET_RTOL = 1e-9  # relative well-posedness threshold on |det(Na + Nb W)|


class IllPosedBCError(ValueError):
    """Boundary rows do not pin down the inversion (determinant ~ 0)."""

    def __init__(self, det: float, scale: float):
        self.det = det
        self.scale = scale
        super().__init__(
            f"boundary conditions are ill-posed: |det(Na + Nb W)| = {abs(det):.3e} "
            f"below threshold {DET_RTOL:.0e} * {scale:.3e}"
        )


def taylor_matrix(n: int, t: float) -> np.ndarray:
    """Upper-triangular matrix with ``W[i, j] = t^(j-i) / (j-i)!`` for ``j >= i``."""
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            W[i, j] = t ** (j - i) / factorial(j - i)
    return W


@dataclass(frozen=True)
class BCSpec:
    """``n`` boundary rows for an order-``n`` component on ``[a, b]``."""

    n: int
    Na: np.ndarray
    Nb: np.ndarray
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        Na = np.asarray(self.Na, dtype=float).reshape(self.n, self.n)
        Nb = np.asarray(self.Nb, dtype=float).reshape(self.n, self.n)
        object.__setattr__(self, "Na", Na)
        object.__setattr__(self, "Nb", Nb)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    def _system_matrix(self) -> np.ndarray:
        a, b = self.domain
        return self.Na + self.Nb @ taylor_matrix(self.n, b - a)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self._system_matrix()))

    @property
    def det_scale(self) -> float:
        # scale-aware comparison: det of an n x n matrix grows like norm^n
        nrm = np.linalg.norm(self._system_matrix(), 2)
        return max(nrm**self.n, np.finfo(float).tiny)

    @property
    def well_posed(self) -> bool:
        return abs(self.det) > DET_RTOL * self.det_scale

    def require_well_posed(self) -> None:
        if not self.well_posed:
            raise IllPosedBCError(self.det, self.det_scale)

    def p_matrix(self) -> np.ndarray:
        """``P = (Na + Nb W)^{-1} Nb W`` of the kernel construction."""
        self.require_well_posed()
        a, b = self.domain
        NbW = self.Nb @ taylor_matrix(self.n, b - a)
        return np.linalg.solve(self._system_matrix(), NbW)


def _taylor_column_s(n: int, a: float, domain) -> list[Poly1]:
    """``e1(s - a)`` entries: ``(s - a)^(k) / k!`` for ``k = 0..n-1``."""
    base = Poly1(np.array([-a, 1.0]), domain)
    out = []
    acc = Poly1.const(1.0, domain)
    for k in range(n):
        out.append(acc.scale(1.0 / factorial(k)))
        acc = acc * base
    return out


def _taylor_column_theta(n: int, a: float, domain) -> list[Poly1]:
    """``en(a - th)`` entries, reversed order: ``(a - th)^(n-1-k) / (n-1-k)!``."""
    base = Poly1(np.array([a, -1.0]), domain)
    powers = [Poly1.const(1.0, domain)]
    for _ in range(n - 1):
        powers.append(powers[-1] * base)
    return [powers[n - 1 - k].scale(1.0 / factorial(n - 1 - k)) for k in range(n)]


def lemma_t_operator(bc: BCSpec) -> PIOp:
    """The boundary-condition embedding ``T`` as a scalar PI operator.

    ``T x`` satisfies the boundary rows of ``bc`` and differentiating it
    ``n`` times returns ``x``; raises :class:`IllPosedBCError` when the
    boundary rows are degenerate.
    """
    P = bc.p_matrix()
    n = bc.n
    a, _ = bc.domain
    e1 = _taylor_column_s(n, a, bc.domain)
    en = _taylor_column_theta(n, a, bc.domain)
    IP = np.eye(n) - P
    r1 = Poly2.zero(bc.domain)
    r2 = Poly2.zero(bc.domain)
    for i in range(n):
        e1_s = Poly2.from_poly1(e1[i], "s")
        for j in range(n):
            en_th = Poly2.from_poly1(en[j], "theta")
            prod = e1_s * en_th
            if IP[i, j] != 0.0:
                r1 = r1 + prod.scale(IP[i, j])
            if P[i, j] != 0.0:
                r2 = r2 + prod.scale(-P[i, j])
    return PIOp.from_kernels([[0.0]], [[r1]], [[r2]], bc.domain)


def dk_of_t(bc: BCSpec, k: int) -> PIOp:
    """The operator ``D^k o T`` for ``0 <= k <= n``.

    For ``k < n`` the boundary terms of the differentiated kernel vanish and
    the result is the pure integral operator with kernels ``d^k G / d s^k``;
    at ``k = n`` the kernel jump collapses the operator to the identity.
    """
    if not 0 <= k <= bc.n:
        raise ValueError(f"derivative order {k} outside 0..{bc.n}")
    if k == bc.n:
        return PIOp.identity(1, bc.domain)
    T = lemma_t_operator(bc)
    if k == 0:
        return T
    return PIOp.from_kernels([[0.0]], [[T.R1[0, 0].deriv_s(k)]], [[T.R2[0, 0].deriv_s(k)]], bc.domain)


def boundary_residuals(bc: BCSpec, u: Poly1) -> np.ndarray:
    """Values of the ``n`` boundary rows for a polynomial ``u``."""
    a, b = bc.domain
    derivs = [u.deriv(j) for j in range(bc.n)]
    va = np.array([float(d(a)) for d in derivs])
    vb = np.array([float(d(b)) for d in derivs])
    return bc.Na @ va + bc.Nb @ vb


@dataclass(frozen=True)
class ComponentSpec:
    """One scalar PDE state component: a name, a derivative order, and
    boundary conditions when the order is positive."""

    name: str
    order: int
    bc: BCSpec | None = None

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"component {self.name!r}: negative order")
        if self.order == 0 and self.bc is not None:
            raise ValueError(f"component {self.name!r}: order 0 admits no boundary conditions")
        if self.order >= 1:
            if self.bc is None:
                raise ValueError(f"component {self.name!r}: order {self.order} needs boundary conditions")
            if self.bc.n != self.order:
                raise ValueError(
                    f"component {self.name!r}: boundary spec has n={self.bc.n}, order is {self.order}"
                )


@dataclass(frozen=True)
class DynTerm:
    """One right-hand-side term: d/dt (target) += coeff(s) * D^k (source)."""

    target: str
    source: str
    k: int
    coeff: Poly1


@dataclass(frozen=True)
class PDESystem:
    """A first-order-in-time coupled system of scalar components on ``[a, b]``.

    Second-order-in-time equations enter as two components (the undifferentiated
    velocity is an order-0 component); this reduction is part of the input
    convention, not inferred.
    """

    domain: tuple[float, float]
    components: tuple[ComponentSpec, ...]
    dynamics: tuple[DynTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique")
        by_name = {c.name: c for c in self.components}
        for term in self.dynamics:
            if term.target not in by_name or term.source not in by_name:
                raise ValueError(f"dynamics references unknown component in {term}")
            if term.k > by_name[term.source].order:
                raise ValueError(
                    f"dynamics uses D^{term.k} of {term.source!r}, which has order "
                    f"{by_name[term.source].order}"
                )
            if term.coeff.domain != self.domain:
                raise ValueError("dynamics coefficient domain mismatch")

    def component_index(self, name: str) -> int:
        for i, c in enumerate(self.components):
            if c.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class ComponentMeta:
    name: str
    order: int
    p_matrix: np.ndarray | None


@dataclass(frozen=True)
class PIESystem:
    """The pair ``T x' = A x`` plus per-component bookkeeping."""

    T: PIOp
    A: PIOp
    meta: tuple[ComponentMeta, ...] = field(default=())

    @property
    def size(self) -> int:
        return self.T.rows

    @property
    def domain(self) -> tuple[float, float]:
        return self.T.domain

    def component_names(self) -> list[str]:
        return [m.name for m in self.meta]


def assemble_pie(sys: PDESystem) -> PIESystem:
    """Build ``T`` block-diagonally and ``A`` from the dynamics terms.

    ``T``'s block for an order-0 component is the identity multiplier; the
    block for an order-``n`` component is its boundary embedding.  Block
    ``(i, j)`` of ``A`` sums ``coeff(s) * (D^k o T_j)`` over the dynamics
    terms driving component ``i`` from component ``j``.
    """
    blocks = []
    meta = []
    for comp in sys.components:
        if comp.order == 0:
            blocks.append(PIOp.identity(1, sys.domain))
            meta.append(ComponentMeta(comp.name, 0, None))
        else:
            comp.bc.require_well_posed()
            blocks.append(lemma_t_operator(comp.bc))
            meta.append(ComponentMeta(comp.name, comp.order, comp.bc.p_matrix()))
    T = block_diag(blocks)

    n = len(sys.components)
    A = PIOp.zero(n, n, sys.domain)
    for term in sys.dynamics:
        i = sys.component_index(term.target)
        j = sys.component_index(term.source)
        src = sys.components[j]
        if src.order == 0:
            op = PIOp.identity(1, sys.domain)
        else:
            op = dk_of_t(src.bc, term.k)
        op = op.left_multiply(term.coeff)
        A.R0[i, j] = A.R0[i, j] + op.R0[0, 0]
        A.R1[i, j] = A.R1[i, j] + op.R1[0, 0]
        A.R2[i, j] = A.R2[i, j] + op.R2[0, 0]
    return PIESystem(T=T, A=A, meta=tuple(meta))
