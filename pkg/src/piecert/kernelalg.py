"""Exact arithmetic for the polynomial kernels of PI operators.

Univariate polynomials (:class:`Poly1`) live on an interval ``[a, b]`` in the
spatial variable ``s``; bivariate polynomials (:class:`Poly2`) live on the
square ``[a, b]^2`` in ``(s, theta)``.  All arithmetic is carried out on
monomial coefficients in double precision, which is exact for the small
integer coefficients that occur in the shipped problem kernels.

Orthonormal polynomial bases (:class:`OrthoBasis`) are shifted Legendre
polynomials.  Inner products involving basis elements are evaluated with
Gauss-Legendre rules sized from degree bounds, so they integrate polynomials
without quadrature error, and basis values are obtained from the Legendre
recurrence rather than from monomial coefficients (whose magnitudes grow like
4^k and destroy precision beyond degree ~10).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as _leg
from numpy.polynomial import polynomial as _npoly

__all__ = [
    "Poly1",
    "Poly2",
    "OrthoBasis",
    "poly_arith",
    "poly_definite_integral",
    "legendre_basis",
    "gauss_rule",
]

Domain = tuple[float, float]


class KernelError(ValueError):
    """Operands with mismatched arity or domain."""


def _trim1(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return np.zeros(0)
    return c[: nz[-1] + 1].copy()


def _trim2(coeffs) -> np.ndarray:
    c = np.atleast_2d(np.asarray(coeffs, dtype=float))
    rows = np.nonzero(c.any(axis=1))[0]
    cols = np.nonzero(c.any(axis=0))[0]
    if rows.size == 0 or cols.size == 0:
        return np.zeros((0, 0))
    return c[: rows[-1] + 1, : cols[-1] + 1].copy()


def _check_domain(p, q) -> None:
    if p.domain != q.domain:
        raise KernelError(f"domain mismatch: {p.domain} vs {q.domain}")


@dataclass(frozen=True)
class Poly1:
    """Univariate polynomial ``sum_k coeffs[k] s^k`` on ``[a, b]``.

    Trailing zero coefficients are trimmed on construction; the zero
    polynomial has an empty coefficient array and degree ``-inf``.
    """

    coeffs: np.ndarray
    domain: Domain = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim1(self.coeffs))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @staticmethod
    def zero(domain: Domain = (0.0, 1.0)) -> "Poly1":
        return Poly1(np.zeros(0), domain)

    @staticmethod
    def const(value: float, domain: Domain = (0.0, 1.0)) -> "Poly1":
        return Poly1(np.array([value]), domain)

    @staticmethod
    def var(domain: Domain = (0.0, 1.0)) -> "Poly1":
        """The coordinate polynomial ``s``."""
        return Poly1(np.array([0.0, 1.0]), domain)

    @property
    def degree(self) -> float:
        return len(self.coeffs) - 1 if len(self.coeffs) else -np.inf

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def __call__(self, s):
        if self.is_zero:
            return np.zeros_like(np.asarray(s, dtype=float))
        return _npoly.polyval(np.asarray(s, dtype=float), self.coeffs)

    def __add__(self, other: "Poly1") -> "Poly1":
        _check_domain(self, other)
        n = max(len(self.coeffs), len(other.coeffs), 1)
        c = np.zeros(n)
        c[: len(self.coeffs)] += self.coeffs
        c[: len(other.coeffs)] += other.coeffs
        return Poly1(c, self.domain)

    def __neg__(self) -> "Poly1":
        return Poly1(-self.coeffs, self.domain)

    def __sub__(self, other: "Poly1") -> "Poly1":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Poly1):
            _check_domain(self, other)
            if self.is_zero or other.is_zero:
                return Poly1.zero(self.domain)
            return Poly1(_npoly.polymul(self.coeffs, other.coeffs), self.domain)
        return self.scale(float(other))

    __rmul__ = __mul__

    def scale(self, c: float) -> "Poly1":
        return Poly1(self.coeffs * c, self.domain)

    def deriv(self, k: int = 1) -> "Poly1":
        if k == 0 or self.is_zero:
            return self if k == 0 else Poly1.zero(self.domain)
        return Poly1(_npoly.polyder(self.coeffs, k) if len(self.coeffs) > k else np.zeros(0), self.domain)

    def antideriv(self) -> "Poly1":
        if self.is_zero:
            return self
        return Poly1(_npoly.polyint(self.coeffs), self.domain)

    def integral(self, lo: float | None = None, hi: float | None = None) -> float:
        """Definite integral over ``[lo, hi]``, defaulting to the domain."""
        a, b = self.domain
        lo = a if lo is None else lo
        hi = b if hi is None else hi
        F = self.antideriv()
        return float(F(hi) - F(lo))

    def compose_poly(self, inner: "Poly1") -> "Poly1":
        """Substitute ``inner`` for the variable (Horner on coefficients)."""
        out = Poly1.zero(inner.domain)
        for c in self.coeffs[::-1]:
            out = out * inner + Poly1.const(float(c), inner.domain)
        return out

    def equals(self, other: "Poly1", tol: float = 1e-12) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.coeffs)] = self.coeffs
        b[: len(other.coeffs)] = other.coeffs
        return bool(np.all(np.abs(a - b) <= tol))

    def __str__(self) -> str:
        return format_poly1(self.coeffs)


@dataclass(frozen=True)
class Poly2:
    """Bivariate polynomial ``sum_{jk} coeffs[j, k] s^j theta^k`` on ``[a, b]^2``."""

    coeffs: np.ndarray
    domain: Domain = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim2(self.coeffs))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @staticmethod
    def zero(domain: Domain = (0.0, 1.0)) -> "Poly2":
        return Poly2(np.zeros((0, 0)), domain)

    @staticmethod
    def const(value: float, domain: Domain = (0.0, 1.0)) -> "Poly2":
        return Poly2(np.array([[value]]), domain)

    @staticmethod
    def from_poly1(p: Poly1, var: str = "s") -> "Poly2":
        """Embed a univariate polynomial as a function of ``s`` or ``theta``."""
        if p.is_zero:
            return Poly2.zero(p.domain)
        if var == "s":
            return Poly2(p.coeffs[:, None], p.domain)
        if var == "theta":
            return Poly2(p.coeffs[None, :], p.domain)
        raise KernelError(f"unknown variable {var!r}")

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def degrees(self) -> tuple[float, float]:
        if self.is_zero:
            return (-np.inf, -np.inf)
        return (self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1)

    def __call__(self, s, theta):
        s, theta = np.broadcast_arrays(
            np.asarray(s, dtype=float), np.asarray(theta, dtype=float)
        )
        if self.is_zero:
            return np.zeros(s.shape)
        return _npoly.polyval2d(s, theta, self.coeffs)

    def __add__(self, other: "Poly2") -> "Poly2":
        _check_domain(self, other)
        n0 = max(self.coeffs.shape[0], other.coeffs.shape[0], 1)
        n1 = max(self.coeffs.shape[1], other.coeffs.shape[1], 1)
        c = np.zeros((n0, n1))
        c[: self.coeffs.shape[0], : self.coeffs.shape[1]] += self.coeffs
        c[: other.coeffs.shape[0], : other.coeffs.shape[1]] += other.coeffs
        return Poly2(c, self.domain)

    def __neg__(self) -> "Poly2":
        return Poly2(-self.coeffs, self.domain)

    def __sub__(self, other: "Poly2") -> "Poly2":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Poly2):
            _check_domain(self, other)
            if self.is_zero or other.is_zero:
                return Poly2.zero(self.domain)
            m0, m1 = self.coeffs.shape
            n0, n1 = other.coeffs.shape
            c = np.zeros((m0 + n0 - 1, m1 + n1 - 1))
            for j in range(m0):
                for k in range(m1):
                    if self.coeffs[j, k] != 0.0:
                        c[j : j + n0, k : k + n1] += self.coeffs[j, k] * other.coeffs
            return Poly2(c, self.domain)
        return self.scale(float(other))

    __rmul__ = __mul__

    def scale(self, c: float) -> "Poly2":
        return Poly2(self.coeffs * c, self.domain)

    def deriv_s(self, k: int = 1) -> "Poly2":
        if self.is_zero or self.coeffs.shape[0] <= k:
            return Poly2.zero(self.domain) if k else self
        c = self.coeffs
        for _ in range(k):
            c = c[1:] * np.arange(1, c.shape[0])[:, None]
        return Poly2(c, self.domain)

    def swap_vars(self) -> "Poly2":
        """Return ``p(theta, s)``."""
        return Poly2(self.coeffs.T, self.domain)

    def diag(self) -> Poly1:
        """Restriction to ``theta = s``."""
        if self.is_zero:
            return Poly1.zero(self.domain)
        n0, n1 = self.coeffs.shape
        c = np.zeros(n0 + n1 - 1)
        for j in range(n0):
            c[j : j + n1] += self.coeffs[j]
        return Poly1(c, self.domain)

    def equals(self, other: "Poly2", tol: float = 1e-12) -> bool:
        n0 = max(self.coeffs.shape[0], other.coeffs.shape[0], 1)
        n1 = max(self.coeffs.shape[1], other.coeffs.shape[1], 1)
        a = np.zeros((n0, n1))
        b = np.zeros((n0, n1))
        a[: self.coeffs.shape[0], : self.coeffs.shape[1]] = self.coeffs
        b[: other.coeffs.shape[0], : other.coeffs.shape[1]] = other.coeffs
        return bool(np.all(np.abs(a - b) <= tol))

    def __str__(self) -> str:
        return format_poly2(self.coeffs)


# ---------------------------------------------------------------------------
# spec-level operation wrappers
# ---------------------------------------------------------------------------

def poly_arith(op: str, p, q):
    """Dispatch ``add``/``mul``/``scale`` on :class:`Poly1`/:class:`Poly2`.

    ``scale`` takes a scalar second operand; ``add``/``mul`` require both
    operands of the same arity and domain.
    """
    if op == "scale":
        return p.scale(float(q))
    if type(p) is not type(q):
        raise KernelError(f"arity mismatch: {type(p).__name__} vs {type(q).__name__}")
    if op == "add":
        return p + q
    if op == "mul":
        return p * q
    raise KernelError(f"unknown operation {op!r}")


def _limit_as_poly1(limit, domain: Domain) -> Poly1:
    if isinstance(limit, Poly1):
        return limit
    return Poly1.const(float(limit), domain)


def poly_definite_integral(p, var: str, lower, upper):
    """Exact definite integral of a bivariate integrand over one variable.

    Two forms are supported:

    * ``p`` a :class:`Poly2` and ``var`` one of ``"s"``/``"theta"``: the
      named axis is integrated out between limits that are constants or
      :class:`Poly1` in the surviving axis.  Returns a :class:`Poly1`.
    * ``p`` a pair ``(A, B)`` of :class:`Poly2` and ``var == "eta"``: computes
      ``int A(x, eta) B(eta, y) d eta`` over the shared middle variable, with
      limits that are constants or the strings ``"s"``/``"theta"`` naming the
      surviving variables.  Returns a :class:`Poly2` in ``(x, y)``; this is
      the triangle integral that PI-operator composition is built from.
    """
    if var == "eta":
        A, B = p
        return kernel_convolve(A, B, lower, upper)
    if not isinstance(p, Poly2):
        raise KernelError("single-polynomial form requires a Poly2 integrand")
    if var == "theta":
        c = p.coeffs
    elif var == "s":
        c = p.coeffs.T
    else:
        raise KernelError(f"integration variable {var!r} not present")
    domain = p.domain
    lo = _limit_as_poly1(lower, domain)
    hi = _limit_as_poly1(upper, domain)
    # antiderivative in the integrated axis, then substitute the limits
    out = Poly1.zero(domain)
    for m in range(c.shape[1]):
        coeff_poly = Poly1(c[:, m], domain)  # polynomial in the survivor
        if coeff_poly.is_zero:
            continue
        term = (_poly1_power(hi, m + 1) - _poly1_power(lo, m + 1)).scale(1.0 / (m + 1))
        out = out + coeff_poly * term
    return out


def _poly1_power(p: Poly1, m: int) -> Poly1:
    out = Poly1.const(1.0, p.domain)
    for _ in range(m):
        out = out * p
    return out


def kernel_convolve(A: Poly2, B: Poly2, lower, upper) -> Poly2:
    """``int_lower^upper A(x, eta) B(eta, y) d eta`` as a Poly2 in ``(x, y)``.

    Limits may be numbers or the strings ``"s"`` (meaning ``x``) and
    ``"theta"`` (meaning ``y``).  Coefficient-level and exact: each monomial
    ``x^i eta^(j+k) y^l`` integrates to ``(U^(j+k+1) - L^(j+k+1))/(j+k+1)``
    where ``U``, ``L`` are monomials in ``x`` or ``y``.
    """
    _check_domain(A, B)
    domain = A.domain
    if A.is_zero or B.is_zero:
        return Poly2.zero(domain)
    a = A.coeffs  # [x-power, eta-power]
    b = B.coeffs  # [eta-power, y-power]
    deg_eta = (a.shape[1] - 1) + (b.shape[0] - 1)
    nx = a.shape[0] + deg_eta + 2
    ny = b.shape[1] + deg_eta + 2
    out = np.zeros((nx, ny))
    # moment[m] coefficients of x^i y^l multiplying eta^m integrated
    for j in range(a.shape[1]):
        for k in range(b.shape[0]):
            m = j + k
            # cross coefficients in (x, y) for this eta power
            cross = np.outer(a[:, j], b[k, :])
            if not cross.any():
                continue
            _accumulate_moment(out, cross, m, lower, upper)
    return Poly2(out, domain)


def _accumulate_moment(out: np.ndarray, cross: np.ndarray, m: int, lower, upper) -> None:
    inv = 1.0 / (m + 1)
    for limit, sign in ((upper, +1.0), (lower, -1.0)):
        if limit == "s":
            # x^(m+1): shift x-powers
            out[m + 1 : m + 1 + cross.shape[0], : cross.shape[1]] += sign * inv * cross
        elif limit == "theta":
            out[: cross.shape[0], m + 1 : m + 1 + cross.shape[1]] += sign * inv * cross
        else:
            out[: cross.shape[0], : cross.shape[1]] += sign * inv * float(limit) ** (m + 1) * cross


# ---------------------------------------------------------------------------
# orthonormal Legendre bases
# ---------------------------------------------------------------------------

def gauss_rule(npoints: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[a, b]`` (exact to degree ``2n-1``)."""
    x, w = _leg.leggauss(int(npoints))
    return 0.5 * (b - a) * (x + 1.0) + a, 0.5 * (b - a) * w


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal shifted-Legendre basis of size ``N`` on ``[a, b]``.

    ``elements`` holds the monomial forms (element ``k`` has degree exactly
    ``k``); numerical work should go through :meth:`eval_all`, which uses the
    Legendre recurrence and stays accurate at any degree.
    """

    N: int
    domain: Domain
    elements: tuple[Poly1, ...] = field(repr=False)

    def eval_all(self, pts) -> np.ndarray:
        """Values ``phi_k(pts)`` as an array of shape ``(N,) + pts.shape``."""
        a, b = self.domain
        u = 2.0 * (np.asarray(pts, dtype=float) - a) / (b - a) - 1.0
        van = _leg.legvander(u.ravel(), self.N - 1).T  # (N, npts)
        norms = np.sqrt((2.0 * np.arange(self.N) + 1.0) / (b - a))
        out = van * norms[:, None]
        return out.reshape((self.N,) + np.shape(u))

    def project_function(self, f, extra_degree: int = 8) -> np.ndarray:
        """Basis coefficients of a callable by quadrature of ``<phi_k, f>``."""
        a, b = self.domain
        x, w = gauss_rule(self.N + extra_degree, a, b)
        return self.eval_all(x) @ (w * np.asarray(f(x), dtype=float))

    def gram(self) -> np.ndarray:
        """Pairwise inner products, computed by degree-exact quadrature."""
        a, b = self.domain
        x, w = gauss_rule(self.N + 2, a, b)
        phi = self.eval_all(x)
        return (phi * w) @ phi.T


def legendre_basis(N: int, a: float = 0.0, b: float = 1.0) -> OrthoBasis:
    """Orthonormal shifted-Legendre basis; rejects ``N < 1`` or ``a >= b``."""
    if N < 1:
        raise KernelError(f"basis size must be positive, got {N}")
    if not a < b:
        raise KernelError(f"domain must satisfy a < b, got [{a}, {b}]")
    domain = (float(a), float(b))
    lin = Poly1(np.array([(-a - b) / (b - a), 2.0 / (b - a)]), domain)  # u(s)
    elements = []
    for k in range(N):
        mono = Poly1(_leg.leg2poly([0.0] * k + [1.0]), domain)  # P_k(u), monomial in u
        shifted = mono.compose_poly(lin)
        elements.append(shifted.scale(np.sqrt((2 * k + 1) / (b - a))))
    return OrthoBasis(N=N, domain=domain, elements=tuple(elements))


# ---------------------------------------------------------------------------
# display helpers
# ---------------------------------------------------------------------------

def _fmt_coeff(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return f"{c:.6g}"


def format_poly1(coeffs: np.ndarray, var: str = "s") -> str:
    terms = []
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        if k == 0:
            terms.append(_fmt_coeff(c))
        else:
            mag = "" if abs(c) == 1.0 else _fmt_coeff(abs(c)) + "*"
            pw = var if k == 1 else f"{var}^{k}"
            terms.append(("-" if c < 0 else "") + mag + pw)
    if not terms:
        return "0"
    out = terms[0]
    for t in terms[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out


def format_poly2(coeffs: np.ndarray, vars_: tuple[str, str] = ("s", "th")) -> str:
    terms = []
    for j in range(coeffs.shape[0]):
        for k in range(coeffs.shape[1]):
            c = coeffs[j, k]
            if c == 0.0:
                continue
            parts = []
            if j:
                parts.append(vars_[0] if j == 1 else f"{vars_[0]}^{j}")
            if k:
                parts.append(vars_[1] if k == 1 else f"{vars_[1]}^{k}")
            body = "*".join(parts)
            if not body:
                terms.append(_fmt_coeff(c))
            else:
                mag = "" if abs(c) == 1.0 else _fmt_coeff(abs(c)) + "*"
                terms.append(("-" if c < 0 else "") + mag + body)
    if not terms:
        return "0"
    out = terms[0]
    for t in terms[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out
