"""Stability notions, their operator-inequality conditions, and candidate checks.

Twelve notions are tracked: three families (plain Lyapunov bounds,
exponential decay, finite energy) crossed with four directions relating the
norm of the evolving state to the norm of the initial data::

    pie2pde   |T x(t)|  <=  C |x(0)|          (the weakest notion)
    pie       |x(t)|    <=  C |x(0)|
    pde       |T x(t)|  <=  C |T x(0)|
    pde2pie   |x(t)|    <=  C |T x(0)|        (never holds for x = D^n u)

Candidate certificates come in two shapes: a self-adjoint ``P`` defining
``V(x) = <T x, P T x>``, or a ``Q`` with ``Q T`` self-adjoint defining
``V(x) = <x, Q T x>``.  Each (notion, form) pair maps to a short list of
operator inequalities with slots for the coercivity constants ``eps``,
``alpha`` and ``C``; exponential notions exist in two flavours, one bounding
the derivative by ``-alpha Q T`` (``qt``) and one by ``-alpha I`` or
``-alpha T*T`` (``id``).

Verification closes each condition symbolically when the difference operator
has identically zero kernels, closes boundedness conditions through the
operator-norm bound, and otherwise extracts the best slot value per basis
size by bisecting compression margins.  A slot sequence that stays positive
and settles under basis doubling yields "certified-evidence"; a genuinely
negative compression direction yields "refuted" with a witness; anything
else is "inconclusive".  Finite compressions cannot prove operator
positivity, so no verdict stronger than evidence is ever reported unless
every condition closed symbolically.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .galerkin import DEFAULT_NS, DEFAULT_TOL, IneqVerdict, check_op_ineq, compression_ladder
from .pde2pie import PIESystem
from .pialg import PIOp, adjoint, block_diag, compose, kernel_asymmetry, kernels_equal, norm_bound

__all__ = [
    "Notion",
    "parse_notion",
    "all_notions",
    "rule_table",
    "Candidate",
    "CandidateError",
    "UnsupportedFormError",
    "ConditionSpec",
    "ConditionResult",
    "CertReport",
    "conditions_for",
    "verify_candidate",
    "scalar_search",
    "implied_notions",
    "parse_expr",
    "OpExpr",
]

FAMILIES = ("lyap", "exp", "fe")
DIRECTIONS = ("pie2pde", "pie", "pde", "pde2pie")
EVIDENCE_CAVEAT = (
    "holds-evidence conditions rest on finite compressions: refutations are exact, "
    "positive verdicts are evidence unless every condition closed symbolically"
)


class CandidateError(ValueError):
    """Candidate fails its structural precondition (shape or symmetry)."""


class UnsupportedFormError(ValueError):
    """No condition set for the requested (notion, form) pairing."""


@dataclass(frozen=True)
class Notion:
    """One stability notion; exponential notions carry a variant flag."""

    family: str
    direction: str
    variant: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.family == "exp":
            object.__setattr__(self, "variant", self.variant or "qt")
            if self.variant not in ("qt", "id"):
                raise ValueError(f"unknown exponential variant {self.variant!r}")
        elif self.variant is not None:
            raise ValueError(f"{self.family} notions take no variant")

    @property
    def ident(self) -> str:
        if self.family == "exp":
            return f"exp-{self.direction}-{self.variant}"
        return f"{self.family}-{self.direction}"

    @property
    def base_ident(self) -> str:
        return f"{self.family}-{self.direction}"

    def __str__(self) -> str:
        return self.ident


def parse_notion(ident: str) -> Notion:
    """Parse identifiers like ``lyap-pie2pde``, ``exp-pde``, ``exp-pie-id``."""
    parts = ident.strip().lower().split("-")
    if len(parts) == 2:
        fam, direction = parts
        return Notion(fam, direction)
    if len(parts) == 3 and parts[0] == "exp":
        return Notion("exp", parts[1], parts[2])
    raise ValueError(f"unrecognized notion identifier {ident!r}")


def all_notions(expand_variants: bool = False) -> list[Notion]:
    out = []
    for fam in FAMILIES:
        for direction in DIRECTIONS:
            if fam == "exp" and expand_variants:
                out.append(Notion(fam, direction, "qt"))
                out.append(Notion(fam, direction, "id"))
            else:
                out.append(Notion(fam, direction))
    return out


def rule_table() -> list[tuple[str, str, str, str]]:
    """The weakest (positivity, bound, negativity) classes per notion.

    Exponential pie2pde and pie notions have two variants; expPDE and exp
    pde2pie variants share a single row.  Classes: ``pie`` and ``pde`` as in
    the module docstring, ``sd`` for semidefinite-only.
    """
    return [
        ("lyap-pie2pde", "pde", "pie", "sd"),
        ("lyap-pie", "pie", "pie", "sd"),
        ("lyap-pde", "pde", "pde", "sd"),
        ("lyap-pde2pie", "pie", "pde", "sd"),
        ("exp-pie2pde-id", "pde", "pie", "pie"),
        ("exp-pie2pde-qt", "pde", "pde", "pde"),
        ("exp-pie-id", "pie", "pie", "pie"),
        ("exp-pie-qt", "pie", "pde", "pde"),
        ("exp-pde", "pde", "pde", "pde"),
        ("exp-pde2pie", "pie", "pde", "pde"),
        ("fe-pie2pde", "sd", "pie", "pde"),
        ("fe-pie", "sd", "pie", "pie"),
        ("fe-pde", "sd", "pde", "pde"),
        ("fe-pde2pie", "sd", "pde", "pie"),
    ]


def implied_notions(notion: Notion) -> list[Notion]:
    """Hierarchy closure within a family: pie/pde imply pie2pde; pde2pie implies all."""
    closure = {
        "pie2pde": (),
        "pie": ("pie2pde",),
        "pde": ("pie2pde",),
        "pde2pie": ("pie", "pde", "pie2pde"),
    }[notion.direction]
    return [Notion(notion.family, d, notion.variant if notion.family == "exp" else None) for d in closure]


# ---------------------------------------------------------------------------
# candidate expressions
# ---------------------------------------------------------------------------

class OpExpr:
    """Node of a candidate-operator expression tree."""

    def eval(self, env: dict[str, PIOp], params: dict[str, float]):
        raise NotImplementedError

    def free_params(self) -> set[str]:
        return set()


@dataclass(frozen=True)
class Num(OpExpr):
    value: float

    def eval(self, env, params):
        return float(self.value)


@dataclass(frozen=True)
class Param(OpExpr):
    name: str

    def eval(self, env, params):
        if self.name not in params:
            raise CandidateError(f"parameter {self.name!r} has no value")
        return float(params[self.name])

    def free_params(self):
        return {self.name}


@dataclass(frozen=True)
class Name(OpExpr):
    name: str

    def eval(self, env, params):
        if self.name not in env:
            raise CandidateError(f"unknown operator symbol {self.name!r}")
        return env[self.name]


@dataclass(frozen=True)
class Ident(OpExpr):
    """One-component identity on the system domain."""

    def eval(self, env, params):
        return PIOp.identity(1, env["T"].domain)


@dataclass(frozen=True)
class Const(OpExpr):
    op: PIOp

    def eval(self, env, params):
        return self.op


@dataclass(frozen=True)
class Neg(OpExpr):
    arg: OpExpr

    def eval(self, env, params):
        v = self.arg.eval(env, params)
        return -v if isinstance(v, PIOp) else -float(v)

    def free_params(self):
        return self.arg.free_params()


@dataclass(frozen=True)
class Add(OpExpr):
    left: OpExpr
    right: OpExpr
    sign: float = 1.0

    def eval(self, env, params):
        a = self.left.eval(env, params)
        b = self.right.eval(env, params)
        if isinstance(a, PIOp) != isinstance(b, PIOp):
            raise CandidateError("cannot add an operator and a scalar")
        if isinstance(a, PIOp):
            return a + b.scale(self.sign)
        return a + self.sign * b

    def free_params(self):
        return self.left.free_params() | self.right.free_params()


@dataclass(frozen=True)
class Mul(OpExpr):
    left: OpExpr
    right: OpExpr

    def eval(self, env, params):
        a = self.left.eval(env, params)
        b = self.right.eval(env, params)
        if isinstance(a, PIOp) and isinstance(b, PIOp):
            return compose(a, b)
        if isinstance(a, PIOp):
            return a.scale(float(b))
        if isinstance(b, PIOp):
            return b.scale(float(a))
        return float(a) * float(b)

    def free_params(self):
        return self.left.free_params() | self.right.free_params()


@dataclass(frozen=True)
class Adjoint(OpExpr):
    arg: OpExpr

    def eval(self, env, params):
        v = self.arg.eval(env, params)
        if not isinstance(v, PIOp):
            raise CandidateError("adj() needs an operator argument")
        return adjoint(v)

    def free_params(self):
        return self.arg.free_params()


@dataclass(frozen=True)
class BlockDiag(OpExpr):
    blocks: tuple[OpExpr, ...]

    def eval(self, env, params):
        ops = [b.eval(env, params) for b in self.blocks]
        if not all(isinstance(op, PIOp) for op in ops):
            raise CandidateError("blockdiag() needs operator arguments")
        return block_diag(ops)

    def free_params(self):
        out: set[str] = set()
        for b in self.blocks:
            out |= b.free_params()
        return out


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")
_RESERVED = {"adj", "compose", "blockdiag"}
_OPERATOR_NAMES = {"T", "A"}


def parse_expr(text: str, param_names=()) -> OpExpr:
    """Parse a candidate expression string.

    Grammar: ``+``/``-``/``*`` with the usual precedence, unary minus,
    parentheses, ``adj(e)``, ``compose(e, f)`` and ``blockdiag(e, ...)``.
    ``T`` and ``A`` name the system operators, ``I`` the one-component
    identity; other names must be declared parameters.
    """
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise CandidateError(f"cannot tokenize expression at {text[pos:]!r}")
        pos = m.end()
        if m.group(1):
            tokens.append(("num", m.group(1)))
        elif m.group(2):
            tokens.append(("name", m.group(2)))
        elif m.group(3).strip():
            tokens.append(("op", m.group(3)))
    tokens.append(("end", ""))
    params = set(param_names)

    state = {"i": 0}

    def peek():
        return tokens[state["i"]]

    def take(kind=None, value=None):
        tok = tokens[state["i"]]
        if kind and tok[0] != kind or value and tok[1] != value:
            raise CandidateError(f"unexpected token {tok[1]!r} in expression {text!r}")
        state["i"] += 1
        return tok

    def parse_sum() -> OpExpr:
        node = parse_term()
        while peek() == ("op", "+") or peek() == ("op", "-"):
            op = take("op")[1]
            node = Add(node, parse_term(), sign=1.0 if op == "+" else -1.0)
        return node

    def parse_term() -> OpExpr:
        node = parse_unary()
        while peek() == ("op", "*"):
            take("op", "*")
            node = Mul(node, parse_unary())
        return node

    def parse_unary() -> OpExpr:
        if peek() == ("op", "-"):
            take("op", "-")
            return Neg(parse_unary())
        return parse_atom()

    def parse_atom() -> OpExpr:
        kind, value = peek()
        if kind == "num":
            take()
            return Num(float(value))
        if kind == "op" and value == "(":
            take()
            node = parse_sum()
            take("op", ")")
            return node
        if kind == "name":
            take()
            if peek() == ("op", "("):
                take()
                args = [parse_sum()]
                while peek() == ("op", ","):
                    take()
                    args.append(parse_sum())
                take("op", ")")
                if value == "adj" and len(args) == 1:
                    return Adjoint(args[0])
                if value == "compose" and len(args) == 2:
                    return Mul(args[0], args[1])
                if value == "blockdiag":
                    return BlockDiag(tuple(args))
                raise CandidateError(f"unknown function {value!r} or wrong arity")
            if value == "I":
                return Ident()
            if value in _OPERATOR_NAMES:
                return Name(value)
            if value in params:
                return Param(value)
            raise CandidateError(
                f"unknown name {value!r}; known: T, A, I, parameters {sorted(params)}"
            )
        raise CandidateError(f"unexpected token {value!r} in expression {text!r}")

    node = parse_sum()
    take("end")
    return node


@dataclass(frozen=True)
class Candidate:
    """A certificate operator: a P-form or Q-form expression with scalars."""

    name: str
    form: str  # "P" | "Q"
    expr: OpExpr
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.form not in ("P", "Q"):
            raise CandidateError(f"candidate form must be 'P' or 'Q', got {self.form!r}")

    def evaluate(self, sys: PIESystem) -> PIOp:
        free = self.expr.free_params() - set(self.params)
        if free:
            raise CandidateError(f"candidate {self.name!r} has uninstantiated parameters {sorted(free)}")
        env = {"T": sys.T, "A": sys.A}
        op = self.expr.eval(env, self.params)
        if not isinstance(op, PIOp):
            raise CandidateError(f"candidate {self.name!r} evaluates to a scalar, not an operator")
        return op

    def with_params(self, **values) -> "Candidate":
        merged = dict(self.params)
        merged.update(values)
        return replace(self, params=merged)


# ---------------------------------------------------------------------------
# conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionSpec:
    """One operator inequality of a certificate rule.

    ``lhs_key`` and ``scale_key`` name operators in the evaluation
    environment built by :func:`verify_candidate` (``QT``, ``D``, ``TT``,
    ``V`` for the raw candidate, ``I``); the condition reads
    ``lhs >= slot * scale`` for ``geq`` rows and ``lhs <= slot * scale`` for
    ``leq`` rows.  ``implicit`` marks bounds that hold automatically for any
    PI operator and are closed exactly through the norm bound.
    """

    key: str
    kind: str  # "positivity" | "bound" | "negativity"
    cls: str  # "sd" | "pie" | "pde" | "lyap"
    relation: str  # "geq" | "leq"
    lhs_key: str
    scale_key: str | None
    slot: str | None  # "eps" | "alpha" | "C" | None
    text: str
    implicit: bool = False


def _q_pos(cls: str) -> ConditionSpec:
    scale = {"sd": None, "pde": "TT", "pie": "I"}[cls]
    slot = None if cls == "sd" else "eps"
    text = {"sd": "QT = (QT)* >= 0", "pde": "QT = (QT)* >= eps T*T", "pie": "QT = (QT)* >= eps I"}[cls]
    return ConditionSpec("positivity", "positivity", cls, "geq", "QT", scale, slot, text)


def _q_bound(cls: str) -> ConditionSpec:
    if cls == "pie":
        return ConditionSpec(
            "bound", "bound", "pie", "leq", "QT", "I", "C", "QT <= C I", implicit=True
        )
    return ConditionSpec("bound", "bound", "pde", "leq", "QT", "TT", "C", "QT <= C T*T")


def _q_neg(cls: str) -> ConditionSpec:
    scale = {"sd": None, "pde": "TT", "pie": "I", "lyap": "QT"}[cls]
    slot = None if cls == "sd" else "alpha"
    text = {
        "sd": "QA + A*Q* <= 0",
        "pde": "QA + A*Q* <= -alpha T*T",
        "pie": "QA + A*Q* <= -alpha I",
        "lyap": "QA + A*Q* <= -alpha QT",
    }[cls]
    return ConditionSpec("negativity", "negativity", cls, "leq", "D", scale, slot, text)


def _p_pos(cls: str) -> ConditionSpec:
    if cls == "sd":
        return ConditionSpec("positivity", "positivity", "sd", "geq", "V", None, None, "P >= 0")
    return ConditionSpec("positivity", "positivity", "pde", "geq", "V", "I", "eps", "P >= eps I")


def _p_bound() -> ConditionSpec:
    return ConditionSpec(
        "bound", "bound", "pde", "leq", "W", "TT", "C", "T*PT <= C T*T", implicit=True
    )


def _p_neg(cls: str) -> ConditionSpec:
    scale = {"sd": None, "pde": "TT", "lyap": "W"}[cls]
    slot = None if cls == "sd" else "alpha"
    text = {
        "sd": "T*PA + A*PT <= 0",
        "pde": "T*PA + A*PT <= -alpha T*T",
        "lyap": "T*PA + A*PT <= -alpha T*PT",
    }[cls]
    return ConditionSpec("negativity", "negativity", cls, "leq", "D", scale, slot, text)


_Q_CLASSES: dict[tuple[str, str, str | None], tuple[str, str, str]] = {}
for _d, _pos, _bnd in (
    ("pie2pde", "pde", "pie"),
    ("pie", "pie", "pie"),
    ("pde", "pde", "pde"),
    ("pde2pie", "pie", "pde"),
):
    _Q_CLASSES[("lyap", _d, None)] = (_pos, _bnd, "sd")
    _Q_CLASSES[("exp", _d, "qt")] = (_pos, _bnd, "lyap")
    _Q_CLASSES[("exp", _d, "id")] = (_pos, _bnd, "pde" if _d == "pde" else "pie")
    _Q_CLASSES[("fe", _d, None)] = ("sd", _bnd, "pie" if _d in ("pie", "pde2pie") else "pde")


def conditions_for(notion: Notion, form: str) -> list[ConditionSpec]:
    """The certificate inequalities for a notion under the given form.

    Q-form is defined for every notion; P-form only for pde-direction
    notions (the ``V(x) = <Tx, P Tx>`` shape cannot express coercivity in
    the free state).  Implicit bounds are included and flagged.
    """
    if form == "Q":
        key = (notion.family, notion.direction, notion.variant if notion.family == "exp" else None)
        pos, bnd, neg = _Q_CLASSES[key]
        return [_q_pos(pos), _q_bound(bnd), _q_neg(neg)]
    if form == "P":
        if notion.direction != "pde":
            raise UnsupportedFormError(
                f"P-form conditions exist only for pde-direction notions; "
                f"{notion.ident} needs the Q-form (nearest supported: {notion.family}-pde)"
            )
        pos = _p_pos("sd" if notion.family == "fe" else "pde")
        if notion.family == "lyap":
            neg = _p_neg("sd")
        elif notion.family == "fe":
            neg = _p_neg("pde")
        else:
            neg = _p_neg("lyap" if notion.variant == "qt" else "pde")
        return [pos, _p_bound(), neg]
    raise UnsupportedFormError(f"unknown candidate form {form!r}")


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one condition: symbolic closure, slot sequence, or raw check."""

    spec: ConditionSpec
    verdict: str  # "holds-evidence" | "violated" | "inconclusive"
    exact: bool
    slot_values: dict[int, float] | None
    slot_star: float | None
    ineq: IneqVerdict | None
    note: str = ""


@dataclass(frozen=True)
class CertReport:
    """Verdict for one notion with achieved coercivity margins."""

    notion: Notion
    form: str
    candidate_name: str
    params: dict[str, float]
    verdict: str  # "certified-evidence" | "refuted" | "inconclusive"
    achieved: dict[str, float]
    conditions: tuple[ConditionResult, ...]
    exact_flags: dict[str, bool]
    N_used: int
    caveat: str = EVIDENCE_CAVEAT

    @property
    def certified(self) -> bool:
        return self.verdict == "certified-evidence"


def _is_zero(op: PIOp, tol: float = 1e-12) -> bool:
    return kernels_equal(op, PIOp.zero(op.rows, op.cols, op.domain), tol)


def _slot_floor(tol: float) -> float:
    return 10.0 * tol


def _bisect_slot(L: np.ndarray, S: np.ndarray, mode: str, tol: float) -> tuple[float, np.ndarray | None]:
    """Best slot value at one basis size; witness vector when even 0 fails.

    ``max`` finds the largest v with ``L - v S`` nonnegative within the
    equality slack; ``min`` finds the smallest C with ``C S - L``
    nonnegative.  Resolution 1e-6 relative; the slack grows mildly with the
    slot value so exact-equality thresholds are not undershot.
    """

    def margin_vec(M: np.ndarray) -> tuple[float, np.ndarray]:
        evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
        return float(evals[0]), evecs[:, 0]

    def slack(v: float) -> float:
        return max(tol, 1e-5 * max(1.0, abs(v)))

    if mode == "max":
        m0, vec0 = margin_vec(L)
        if m0 < -tol:
            return 0.0, vec0
        lo, hi = 0.0, 1.0
        while margin_vec(L - hi * S)[0] >= -slack(hi):
            lo = hi
            hi *= 2.0
            if hi > 1e12:
                return math.inf, None
        while hi - lo > 1e-6 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if margin_vec(L - mid * S)[0] >= -slack(mid):
                lo = mid
            else:
                hi = mid
        return lo, None
    # mode == "min": the smallest C with C S - L >= 0
    if margin_vec(-L)[0] >= -tol:
        return 0.0, None
    hi = 1.0
    while margin_vec(hi * S - L)[0] < -slack(hi):
        hi *= 2.0
        if hi > 1e12:
            return math.inf, None
    lo = 0.0
    while hi - lo > 1e-6 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if margin_vec(mid * S - L)[0] >= -slack(mid):
            hi = mid
        else:
            lo = mid
    return hi, None


def _stabilized(values: list[float], rel: float = 0.1) -> bool:
    if any(not np.isfinite(v) for v in values):
        return all(not np.isfinite(v) for v in values)
    last, prev = values[-1], values[-2] if len(values) > 1 else values[-1]
    return abs(last - prev) <= rel * max(abs(last), np.finfo(float).tiny)


def _eval_condition(
    spec: ConditionSpec,
    env_ops: dict[str, PIOp],
    ladders: dict[str, dict[int, np.ndarray]],
    Ns: tuple[int, ...],
    tol: float,
) -> ConditionResult:
    # implicit bounds close exactly through the norm bound
    if spec.implicit:
        ref = env_ops["V"] if spec.lhs_key == "W" else env_ops[spec.lhs_key]
        return ConditionResult(
            spec=spec,
            verdict="holds-evidence",
            exact=True,
            slot_values=None,
            slot_star=norm_bound(ref),
            ineq=None,
            note="automatic for PI operators; constant from the operator-norm bound",
        )

    lhs = env_ops[spec.lhs_key]
    signed = lhs if spec.relation == "geq" else -lhs

    if spec.slot is None:
        if _is_zero(signed):
            return ConditionResult(
                spec=spec,
                verdict="holds-evidence",
                exact=True,
                slot_values=None,
                slot_star=None,
                ineq=None,
                note="closes to exact zero symbolically",
            )
        zero = PIOp.zero(lhs.rows, lhs.cols, lhs.domain)
        ineq = check_op_ineq(signed, zero, Ns, tol)
        return ConditionResult(
            spec=spec,
            verdict=ineq.verdict,
            exact=False,
            slot_values=None,
            slot_star=None,
            ineq=ineq,
        )

    # slotted condition: per-size bisection of the coercivity constant.
    # positivity rows maximize eps in  QT >= eps S;  negativity rows maximize
    # alpha in  -D >= alpha S;  bound rows minimize C in  lhs <= C S.
    lhs_ladder = ladders[spec.lhs_key]
    scale_ladder = ladders[spec.scale_key]
    mode = "min" if spec.slot == "C" else "max"
    sign = -1.0 if (mode == "max" and spec.relation == "leq") else 1.0
    slot_values: dict[int, float] = {}
    witness = None
    for n in Ns:
        v, vec = _bisect_slot(sign * lhs_ladder[n], scale_ladder[n], mode, tol)
        slot_values[n] = v
        if vec is not None and witness is None:
            witness = (n, vec)
    vals = [slot_values[n] for n in Ns]
    if mode == "max":
        if witness is not None:
            margins = {n: float(np.linalg.eigvalsh(sign * lhs_ladder[n])[0]) for n in Ns}
            ineq = IneqVerdict(margins=margins, trend="negative", verdict="violated", tol=tol, witness=witness)
            return ConditionResult(spec, "violated", False, slot_values, 0.0, ineq,
                                   note="compression direction with negative quadratic form")
        ok = all(v >= _slot_floor(tol) for v in vals) and _stabilized(vals)
        verdict = "holds-evidence" if ok else "inconclusive"
        note = "" if ok else "coercivity slot did not stabilize under basis doubling"
        return ConditionResult(spec, verdict, False, slot_values, vals[-1], None, note)
    # mode == "min": a finite stabilized C certifies; growth is inconclusive
    ok = all(np.isfinite(v) for v in vals) and _stabilized(vals)
    verdict = "holds-evidence" if ok else "inconclusive"
    note = "" if ok else "bounding constant grows under basis doubling"
    return ConditionResult(spec, verdict, False, slot_values, vals[-1], None, note)


def verify_candidate(
    sys: PIESystem,
    notion: Notion,
    cand: Candidate,
    Ns=DEFAULT_NS,
    tol: float = DEFAULT_TOL,
) -> CertReport:
    """Check every condition of the notion's rule against a concrete candidate.

    Symbolic closures run first (exact-zero kernels, norm-bound closures for
    the automatic boundedness rows), then compression evidence.  Q-form
    candidates are rejected up front when ``Q T`` is not self-adjoint;
    P-form candidates when ``P`` is not.
    """
    V = cand.evaluate(sys)
    if V.rows != sys.size or V.cols != sys.size:
        raise CandidateError(
            f"candidate {cand.name!r} is {V.rows}x{V.cols}, system has {sys.size} components"
        )
    QT = compose(V, sys.T)
    sym_ref = V if cand.form == "P" else QT
    asym = kernel_asymmetry(sym_ref)
    if asym > 1e-9:
        what = "P" if cand.form == "P" else "QT"
        raise CandidateError(
            f"candidate {cand.name!r}: {what} = ({what})* fails with kernel asymmetry {asym:.3e}"
        )

    specs = conditions_for(notion, cand.form)
    TT = compose(adjoint(sys.T), sys.T)
    if cand.form == "Q":
        QA = compose(V, sys.A)
        D = QA + adjoint(QA)
        W = QT
    else:
        TPA = compose(adjoint(sys.T), compose(V, sys.A))
        D = TPA + adjoint(TPA)
        W = compose(adjoint(sys.T), compose(V, sys.T))
    env_ops = {"V": V, "QT": QT, "D": D, "TT": TT, "W": W, "I": PIOp.identity(sys.size, sys.domain)}

    Ns = tuple(sorted(set(int(n) for n in Ns)))
    needed = {spec.lhs_key for spec in specs if spec.slot and not spec.implicit}
    needed |= {spec.scale_key for spec in specs if spec.slot and spec.scale_key and not spec.implicit}
    ladders: dict[str, dict[int, np.ndarray]] = {}
    for key in needed:
        lad = compression_ladder(env_ops[key], Ns)
        ladders[key] = {n: 0.5 * (lad[n].matrix + lad[n].matrix.T) for n in Ns}

    results = [_eval_condition(spec, env_ops, ladders, Ns, tol) for spec in specs]

    verdict = "certified-evidence"
    if any(r.verdict == "violated" for r in results):
        verdict = "refuted"
    elif any(r.verdict == "inconclusive" for r in results):
        verdict = "inconclusive"

    achieved: dict[str, float] = {}
    exact_flags: dict[str, bool] = {}
    for r in results:
        exact_flags[r.spec.key] = r.exact
        if r.spec.slot and r.slot_star is not None:
            achieved[r.spec.slot] = float(r.slot_star)
    return CertReport(
        notion=notion,
        form=cand.form,
        candidate_name=cand.name,
        params=dict(cand.params),
        verdict=verdict,
        achieved=achieved,
        conditions=tuple(results),
        exact_flags=exact_flags,
        N_used=Ns[-1],
    )


_VERDICT_RANK = {"refuted": 0, "inconclusive": 1, "certified-evidence": 2}


def _rank_bucket(value: float | None) -> float:
    # 1%-wide logarithmic buckets so float jitter does not mask genuine ties
    if value is None or not np.isfinite(value) or value <= 0.0:
        return -math.inf
    return round(100.0 * math.log10(value))


def scalar_search(
    sys: PIESystem,
    notion: Notion,
    template: Candidate,
    grid: dict[str, list[float]],
    Ns=DEFAULT_NS,
    tol: float = DEFAULT_TOL,
) -> tuple[CertReport, dict[str, float]]:
    """Exhaustive grid instantiation of a candidate template.

    Returns the report and values maximizing (verdict rank, then the decay
    rate ``alpha*`` where the notion has one, else the coercivity ``eps*``),
    ties broken by the lexicographically smallest parameter vector.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("scalar search needs a nonempty grid for every free parameter")
    for name, values in grid.items():
        if not all(np.isfinite(v) for v in values):
            raise ValueError(f"grid for {name!r} contains non-finite values")
    names = sorted(grid)
    best: tuple | None = None
    best_pair: tuple[CertReport, dict[str, float]] | None = None
    for combo in itertools.product(*(grid[n] for n in names)):
        values = dict(zip(names, (float(v) for v in combo)))
        report = verify_candidate(sys, notion, template.with_params(**values), Ns=Ns, tol=tol)
        has_rate = any(r.spec.slot == "alpha" for r in report.conditions)
        quality = _rank_bucket(report.achieved.get("alpha")) if has_rate else _rank_bucket(
            report.achieved.get("eps")
        )
        key = (
            _VERDICT_RANK[report.verdict],
            quality,
            tuple(-float(v) for v in combo),  # prefer smaller parameters on ties
        )
        if best is None or key > best:
            best = key
            best_pair = (report, values)
    assert best_pair is not None
    return best_pair
