"""Finite compressions of PI operators and numerical operator inequalities.

A compression is the matrix ``<phi_j, P phi_k>`` on an orthonormal Legendre
basis.  Entries are double integrals of polynomials and are computed with
Gauss rules sized from degree bounds, so the only error is roundoff; basis
values come from the Legendre recurrence (see :mod:`piecert.kernelalg`).

Compressions of a nonnegative operator are positive semidefinite, so a
negative eigenvalue of a compression of ``LHS - RHS`` is a genuine witness
that ``LHS >= RHS`` fails on L2.  The converse does not hold: nonnegative
compressions at every tested size are evidence, not proof.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernelalg import OrthoBasis, gauss_rule, legendre_basis
from .pialg import PIOp, adjoint, kernel_asymmetry

__all__ = [
    "Compression",
    "IneqVerdict",
    "project",
    "compression_ladder",
    "check_op_ineq",
    "pencil_spectrum",
    "SingularMassError",
]

DEFAULT_NS = (4, 8, 16, 32)
DEFAULT_TOL = 1e-8
STABILIZE_REL = 0.1  # margin change over the last doubling counted as settled


class SingularMassError(RuntimeError):
    """Compression of ``T`` too ill-conditioned to invert."""

    def __init__(self, cond: float):
        self.cond = cond
        super().__init__(f"compressed mass operator is near-singular (cond ~ {cond:.3e})")


@dataclass(frozen=True)
class Compression:
    """Dense Galerkin matrix of a PI operator.

    Layout is component-major: row ``I * N + j`` pairs component ``I`` with
    basis element ``j``.
    """

    matrix: np.ndarray
    N: int
    basis: OrthoBasis
    source: PIOp

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def component_indices(self, n_sub: int) -> np.ndarray:
        """Flat indices selecting the leading ``n_sub`` basis elements per component."""
        ncomp = self.source.rows
        return np.concatenate([i * self.N + np.arange(n_sub) for i in range(ncomp)])


def _block_matrix(P: PIOp, basis: OrthoBasis) -> np.ndarray:
    a, b = P.domain
    N = basis.N
    ds, dth = P.max_degrees()
    q = N + ds + dth + 4
    q2 = N + dth + 4
    s, w = gauss_rule(q, a, b)
    tau, v = gauss_rule(q2, 0.0, 1.0)
    phi_s = basis.eval_all(s)  # (N, q)

    th_lo = s[:, None] * (1.0 - tau[None, :]) * 0.0 + (a + (s[:, None] - a) * tau[None, :])
    th_hi = s[:, None] + (b - s[:, None]) * tau[None, :]
    phi_lo = basis.eval_all(th_lo)  # (N, q, q2)
    phi_hi = basis.eval_all(th_hi)
    jac_lo = w * (s - a)
    jac_hi = w * (b - s)

    out = np.zeros((P.rows * N, P.cols * N))
    for i in range(P.rows):
        for j in range(P.cols):
            block = np.zeros((N, N))
            r0 = P.R0[i, j]
            if not r0.is_zero:
                block += (phi_s * (w * r0(s))) @ phi_s.T
            r1 = P.R1[i, j]
            if not r1.is_zero:
                k1 = r1(s[:, None], th_lo)  # (q, q2)
                inner = np.einsum("m,qm,kqm->kq", v, k1, phi_lo)
                block += (phi_s * jac_lo) @ inner.T
            r2 = P.R2[i, j]
            if not r2.is_zero:
                k2 = r2(s[:, None], th_hi)
                inner = np.einsum("m,qm,kqm->kq", v, k2, phi_hi)
                block += (phi_s * jac_hi) @ inner.T
            out[i * N : (i + 1) * N, j * N : (j + 1) * N] = block
    return out


def project(P: PIOp, N: int, basis: OrthoBasis | None = None) -> Compression:
    """Compression ``<phi_j, P phi_k>`` at basis size ``N`` (exact entries)."""
    if N < 1:
        raise ValueError(f"basis size must be positive, got {N}")
    if basis is None:
        basis = legendre_basis(N, *P.domain)
    elif basis.N != N or basis.domain != P.domain:
        raise ValueError("supplied basis does not match size and domain")
    return Compression(matrix=_block_matrix(P, basis), N=N, basis=basis, source=P)


def compression_ladder(P: PIOp, Ns) -> dict[int, Compression]:
    """Compressions at several sizes, sliced from the largest one.

    Slicing guarantees that each smaller compression is a principal submatrix
    of the largest, so eigenvalue interlacing holds exactly.
    """
    Ns = sorted(set(int(n) for n in Ns))
    top = project(P, Ns[-1])
    out = {Ns[-1]: top}
    for n in Ns[:-1]:
        idx = top.component_indices(n)
        sub_basis = legendre_basis(n, *P.domain)
        out[n] = Compression(matrix=top.matrix[np.ix_(idx, idx)], N=n, basis=sub_basis, source=P)
    return out


@dataclass(frozen=True)
class IneqVerdict:
    """Outcome of a compressed operator-inequality check.

    ``margins[N]`` is the smallest eigenvalue of the ``LHS - RHS``
    compression; ``violated`` carries a coefficient-vector witness whose
    quadratic form is genuinely negative on L2.
    """

    margins: dict[int, float]
    trend: str
    verdict: str  # "holds-evidence" | "violated" | "inconclusive"
    tol: float
    witness: tuple[int, np.ndarray] | None = None

    @property
    def worst_margin(self) -> float:
        return min(self.margins.values())

    @property
    def final_margin(self) -> float:
        return self.margins[max(self.margins)]


def _classify_margins(margins: dict[int, float], tol: float) -> tuple[str, str]:
    vals = [margins[n] for n in sorted(margins)]
    if any(m < -tol for m in vals):
        return "violated", "negative"
    if all(abs(m) <= tol for m in vals):
        return "holds-evidence", "equality"
    if all(m >= tol for m in vals):
        last, prev = vals[-1], vals[-2] if len(vals) > 1 else vals[-1]
        if abs(last - prev) <= STABILIZE_REL * max(abs(last), np.finfo(float).tiny):
            return "holds-evidence", "stabilized"
        return "inconclusive", "shrinking" if last < prev else "growing"
    return "inconclusive", "mixed-scale"


def coercivity_slot(L: np.ndarray, S: np.ndarray, tol: float, floor: float = 0.0) -> float:
    """Largest ``v`` with ``L - v S >= -tol_eq`` in the eigenvalue sense.

    ``S`` must be positive semidefinite.  The equality slack grows mildly
    with ``v`` (``max(tol, 1e-5 * max(1, v))``) so that exact-equality
    thresholds, where the margin touches zero, are not undershot by the
    bisection; resolution is 1e-6 relative.  Returns ``floor`` when even the
    floor value fails, and ``inf`` when no failure is found below 1e12.
    """

    def margin(v: float) -> float:
        return float(np.linalg.eigvalsh(L - v * S)[0])

    def ok(v: float) -> bool:
        return margin(v) >= -max(tol, 1e-5 * max(1.0, abs(v)))

    if not ok(floor):
        return floor
    lo = floor
    hi = max(1.0, 2.0 * floor)
    while ok(hi):
        lo = hi
        hi *= 2.0
        if hi > 1e12:
            return np.inf
    while hi - lo > 1e-6 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def check_op_ineq(
    lhs: PIOp,
    rhs: PIOp,
    Ns=DEFAULT_NS,
    tol: float = DEFAULT_TOL,
    scale: PIOp | None = None,
) -> IneqVerdict:
    """Evidence for ``lhs >= rhs`` from the compression-margin ladder.

    Both sides must be self-adjoint (rejected otherwise, reporting the
    asymmetry norm).  The verdict is ``violated`` with a witness whenever any
    margin drops below ``-tol``; ``holds-evidence`` when margins stay above
    ``tol`` and have settled across the last doubling, or vanish identically
    to within ``tol``; otherwise a scaled fallback runs: when a positive
    comparison operator is available (``scale``, defaulting to ``rhs`` when
    its compressions are positive definite), the inequality is re-judged by
    the per-size coercivity slot of ``LHS - RHS + scale`` against ``scale``
    minus one, which stabilizes for differences of compact operators whose
    absolute margins necessarily drain to zero under refinement.
    """
    diff = lhs - rhs
    asym = kernel_asymmetry(diff)
    if asym > 1e-9 * (1.0 + _max_coeff(diff)):
        raise ValueError(f"inequality sides are not self-adjoint: kernel asymmetry {asym:.3e}")
    diff = (diff + adjoint(diff)).scale(0.5)  # kill roundoff-level asymmetry

    ladder = compression_ladder(diff, Ns)
    margins: dict[int, float] = {}
    witness = None
    worst = 0.0
    for n in sorted(ladder):
        sym = 0.5 * (ladder[n].matrix + ladder[n].matrix.T)
        evals, evecs = np.linalg.eigh(sym)
        margins[n] = float(evals[0])
        if evals[0] < worst:
            worst = evals[0]
            witness = (n, evecs[:, 0].copy())
    verdict, trend = _classify_margins(margins, tol)

    if verdict == "inconclusive":
        scale_op = scale
        if scale_op is None and not _is_zero_op(rhs):
            scale_op = rhs
        slots = _scaled_slots(diff, scale_op, Ns, tol) if scale_op is not None else None
        if slots is not None:
            vals = [slots[n] for n in sorted(slots)]
            if all(v > tol for v in vals) and abs(vals[-1] - vals[-2]) <= STABILIZE_REL * abs(vals[-1]):
                verdict, trend = "holds-evidence", "stabilized-scaled"

    return IneqVerdict(
        margins=margins,
        trend=trend,
        verdict=verdict,
        tol=tol,
        witness=witness if verdict == "violated" else None,
    )


def _scaled_slots(diff: PIOp, scale_op: PIOp, Ns, tol: float) -> dict[int, float] | None:
    """Coercivity of ``diff + scale`` against ``scale``, minus one, per size."""
    if scale_op.R0.shape != diff.R0.shape:
        return None
    try:
        s_ladder = compression_ladder(scale_op, Ns)
    except Exception:
        return None
    d_ladder = compression_ladder(diff, Ns)
    out: dict[int, float] = {}
    for n in sorted(d_ladder):
        S = 0.5 * (s_ladder[n].matrix + s_ladder[n].matrix.T)
        if float(np.linalg.eigvalsh(S)[0]) <= 0.0:
            return None
        D = 0.5 * (d_ladder[n].matrix + d_ladder[n].matrix.T)
        out[n] = coercivity_slot(D + S, S, tol) - 1.0
    return out


def _is_zero_op(P: PIOp) -> bool:
    return _max_coeff(P) == 0.0


def _max_coeff(P: PIOp) -> float:
    worst = 0.0
    for arr in (P.R0, P.R1, P.R2):
        for p in arr.ravel():
            if not p.is_zero:
                worst = max(worst, float(np.max(np.abs(p.coeffs))))
    return worst


def pencil_spectrum(sys_or_pair, N: int, cond_limit: float = 1e12) -> np.ndarray:
    """Generalized eigenvalues of ``(A_N, T_N)``, sorted by real part descending.

    These approximate the dynamic modes of ``T x' = A x``; raises
    :class:`SingularMassError` when ``T_N`` is too ill-conditioned.
    """
    if hasattr(sys_or_pair, "T"):
        T, A = sys_or_pair.T, sys_or_pair.A
    else:
        T, A = sys_or_pair
    basis = legendre_basis(N, *T.domain)
    Tn = project(T, N, basis).matrix
    An = project(A, N, basis).matrix
    cond = float(np.linalg.cond(Tn))
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularMassError(cond)
    vals = scipy.linalg.eig(An, Tn, right=False)
    order = np.argsort(-vals.real, kind="stable")
    return vals[order]
