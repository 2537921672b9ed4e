"""Primitive recursive term calculus: grammar, coding, clocked evaluation.

Concrete syntax (whitespace insignificant, ASCII only):

    Z                      constant zero, arity 0
    S                      successor, arity 1
    P[n,i]                 projection, arity n, 1 <= i <= n
    C(f; g1, ..., gk)      composition; k = arity(f), the g's share one arity
    R(base; step)          primitive recursion on the first argument

Recursion semantics: a term ``R(base; step)`` with ``arity(base) = n`` has
arity ``n + 1`` and evaluates as

    f(y, xs) = step(y, xs, y-1, ... step(y, xs, 1, step(y, xs, 0, base(xs))))

i.e. the step term receives the full argument tuple of f, then the loop
counter, then the accumulator, so ``arity(step) = n + 3``.  Under this
signature ``R(Z; C(S; P[3,3]))`` is the unary recursion whose step bumps the
accumulator: it returns its argument.

Cost model (version ``visits/1``): every node visit costs one step, and a
recursion on argument y performs one base evaluation plus y step
evaluations.  A clocked evaluation converges iff its total cost is strictly
below the given budget, which makes convergence monotone in the budget.

The Goedel coding is a direct total coding of terms via Cantor pairing:
every natural number decodes to a well-formed term and ``decode(encode(t))``
is ``t``.  Non-unary terms enter the public unary enumeration through
``unary_wrap``, which feeds the single argument to every slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

from .errors import ArityError, BudgetExceeded, ParseError

COST_MODEL = "visits/1"


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Zero:
    def __repr__(self):
        return "Zero"


@dataclass(frozen=True)
class Succ:
    def __repr__(self):
        return "Succ"


@dataclass(frozen=True)
class Proj:
    n: int
    i: int

    def __repr__(self):
        return f"Proj({self.n},{self.i})"


@dataclass(frozen=True)
class Comp:
    outer: "PrTerm"
    inners: tuple

    def __repr__(self):
        return f"Comp({self.outer!r},{list(self.inners)!r})"


@dataclass(frozen=True)
class PrimRec:
    base: "PrTerm"
    step: "PrTerm"

    def __repr__(self):
        return f"PrimRec({self.base!r},{self.step!r})"


PrTerm = Union[Zero, Succ, Proj, Comp, PrimRec]


def arity(t: PrTerm) -> int:
    if isinstance(t, Zero):
        return 0
    if isinstance(t, Succ):
        return 1
    if isinstance(t, Proj):
        return t.n
    if isinstance(t, Comp):
        return arity(t.inners[0])
    if isinstance(t, PrimRec):
        return arity(t.base) + 1
    raise TypeError(f"not a term: {t!r}")


def validate(t: PrTerm, position: int | None = None) -> None:
    """Check arity consistency at every node; raise ArityError if violated."""
    if isinstance(t, (Zero, Succ)):
        return
    if isinstance(t, Proj):
        if t.n < 1 or not (1 <= t.i <= t.n):
            raise ArityError(f"projection P[{t.n},{t.i}] needs 1 <= i <= n", position)
        return
    if isinstance(t, Comp):
        validate(t.outer, position)
        if not t.inners:
            raise ArityError("composition needs at least one inner term", position)
        for g in t.inners:
            validate(g, position)
        k = arity(t.outer)
        if k != len(t.inners):
            raise ArityError(
                f"composition outer arity {k} != {len(t.inners)} inner terms", position)
        arities = {arity(g) for g in t.inners}
        if len(arities) != 1:
            raise ArityError(f"composition inners have mixed arities {sorted(arities)}", position)
        if arities == {0}:
            raise ArityError("composition inners cannot be 0-ary", position)
        return
    if isinstance(t, PrimRec):
        validate(t.base, position)
        validate(t.step, position)
        n = arity(t.base)
        want = n + 3
        have = arity(t.step)
        if have != want:
            raise ArityError(
                f"recursion step arity {have} != base arity {n} + 3", position)
        return
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Concrete syntax


def serialize(t: PrTerm) -> str:
    if isinstance(t, Zero):
        return "Z"
    if isinstance(t, Succ):
        return "S"
    if isinstance(t, Proj):
        return f"P[{t.n},{t.i}]"
    if isinstance(t, Comp):
        inner = ", ".join(serialize(g) for g in t.inners)
        return f"C({serialize(t.outer)}; {inner})"
    if isinstance(t, PrimRec):
        return f"R({serialize(t.base)}; {serialize(t.step)})"
    raise TypeError(f"not a term: {t!r}")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            got = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise ParseError(f"expected {ch!r}, got {got!r}", self.pos)
        self.pos += 1

    def number(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise ParseError("expected a number", start)
        return int(self.text[start:self.pos])

    def term(self) -> PrTerm:
        self.skip_ws()
        start = self.pos
        ch = self.peek()
        if ch == "Z":
            self.pos += 1
            return Zero()
        if ch == "S":
            self.pos += 1
            return Succ()
        if ch == "P":
            self.pos += 1
            self.expect("[")
            n = self.number()
            self.expect(",")
            i = self.number()
            self.expect("]")
            t = Proj(n, i)
            validate(t, start)
            return t
        if ch == "C":
            self.pos += 1
            self.expect("(")
            outer = self.term()
            self.expect(";")
            inners = [self.term()]
            while self.peek() == ",":
                self.expect(",")
                inners.append(self.term())
            self.expect(")")
            t = Comp(outer, tuple(inners))
            validate(t, start)
            return t
        if ch == "R":
            self.pos += 1
            self.expect("(")
            base = self.term()
            self.expect(";")
            step = self.term()
            self.expect(")")
            t = PrimRec(base, step)
            validate(t, start)
            return t
        raise ParseError(f"expected a term, got {ch!r}" if ch else "unexpected end of input",
                         self.pos)


def parse_term(text: str) -> PrTerm:
    if not text.isascii():
        raise ParseError("term text must be ASCII")
    p = _Parser(text)
    t = p.term()
    p.skip_ws()
    if p.pos != len(text):
        raise ParseError("trailing input after term", p.pos)
    return t


# ---------------------------------------------------------------------------
# Clocked evaluation


@dataclass(frozen=True)
class Converged:
    value: int
    steps: int


@dataclass(frozen=True)
class OutOfBudget:
    pass


StepOutcome = Union[Converged, OutOfBudget]

OUT_OF_BUDGET = OutOfBudget()


class _Abort(Exception):
    pass


def _compile(t: PrTerm):
    """Closure-compile a term; the state cell is [visit count, budget].

    Every node visit bumps the counter and aborts once it reaches the
    budget, which keeps clocked convergence strict and monotone.
    """
    if isinstance(t, Zero):
        def run(args, st):
            st[0] += 1
            if st[0] >= st[1]:
                raise _Abort()
            return 0
        return run
    if isinstance(t, Succ):
        def run(args, st):
            st[0] += 1
            if st[0] >= st[1]:
                raise _Abort()
            return args[0] + 1
        return run
    if isinstance(t, Proj):
        i = t.i - 1

        def run(args, st):
            st[0] += 1
            if st[0] >= st[1]:
                raise _Abort()
            return args[i]
        return run
    if isinstance(t, Comp):
        inners = tuple(_compile(g) for g in t.inners)
        outer = _compile(t.outer)

        def run(args, st):
            st[0] += 1
            if st[0] >= st[1]:
                raise _Abort()
            return outer([g(args, st) for g in inners], st)
        return run
    if isinstance(t, PrimRec):
        base = _compile(t.base)
        step = _compile(t.step)

        def run(args, st):
            st[0] += 1
            if st[0] >= st[1]:
                raise _Abort()
            acc = base(args[1:], st)
            step_args = list(args) + [0, acc]
            for i in range(args[0]):
                step_args[-2] = i
                step_args[-1] = acc
                acc = step(step_args, st)
            return acc
        return run
    raise TypeError(f"not a term: {t!r}")


_COMPILED: dict = {}


def _compiled(t: PrTerm):
    hit = _COMPILED.get(id(t))
    if hit is None or hit[0] is not t:
        hit = (t, _compile(t))
        _COMPILED[id(t)] = hit
    return hit[1]


_UNBOUNDED = float("inf")


def eval_clocked(t: PrTerm, args: Sequence[int], budget: int) -> StepOutcome:
    """Evaluate t on args; converges iff total cost < budget."""
    if len(args) != arity(t):
        raise ArityError(f"term of arity {arity(t)} applied to {len(args)} arguments")
    st = [0, budget]
    try:
        value = _compiled(t)(list(args), st)
    except _Abort:
        return OUT_OF_BUDGET
    return Converged(value, st[0])


def eval_total(t: PrTerm, args: Sequence[int]) -> int:
    """Unclocked evaluation; every term is total."""
    if len(args) != arity(t):
        raise ArityError(f"term of arity {arity(t)} applied to {len(args)} arguments")
    return _compiled(t)(list(args), [0, _UNBOUNDED])


def eval_cost(t: PrTerm, args: Sequence[int]) -> int:
    """Exact node-visit cost of evaluating t on args."""
    if len(args) != arity(t):
        raise ArityError(f"term of arity {arity(t)} applied to {len(args)} arguments")
    st = [0, _UNBOUNDED]
    _compiled(t)(list(args), st)
    return st[0]


# ---------------------------------------------------------------------------
# Derived combinators

CONST0_UNARY = PrimRec(Zero(), Proj(3, 3))


def zero_of_arity(n: int) -> PrTerm:
    """The constant-zero term of arity n >= 1."""
    if n < 1:
        raise ArityError("zero_of_arity needs n >= 1")
    return Comp(CONST0_UNARY, (Proj(n, 1),))


def coerce_arity(t: PrTerm, n: int) -> PrTerm:
    """Reuse t at arity n: feed the first argument to every slot."""
    k = arity(t)
    if k == n:
        return t
    if n < 1:
        raise ArityError("cannot coerce to arity 0")
    if k == 0:
        return zero_of_arity(n)
    return Comp(t, tuple(Proj(n, 1) for _ in range(k)))


def unary_wrap(t: PrTerm) -> PrTerm:
    return coerce_arity(t, 1)


def const_term(c: int) -> PrTerm:
    """Unary term computing the constant c."""
    t: PrTerm = CONST0_UNARY
    for _ in range(c):
        t = Comp(Succ(), (t,))
    return t


# ---------------------------------------------------------------------------
# Goedel coding: total decode, injective encode, decode(encode(t)) == t.


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def cantor_unpair(z: int) -> tuple[int, int]:
    w = (math.isqrt(8 * z + 1) - 1) // 2
    b = z - w * (w + 1) // 2
    return w - b, b


def _pair_list(xs: Sequence[int]) -> int:
    acc = xs[-1]
    for x in reversed(xs[:-1]):
        acc = cantor_pair(x, acc)
    return acc


def _unpair_list(z: int, k: int) -> list[int]:
    out = []
    for _ in range(k - 1):
        a, z = cantor_unpair(z)
        out.append(a)
    out.append(z)
    return out


def encode(t: PrTerm) -> int:
    if isinstance(t, Zero):
        return 0
    if isinstance(t, Succ):
        return 1
    if isinstance(t, Proj):
        return 2 + 3 * cantor_pair(t.n - 1, t.i - 1)
    if isinstance(t, Comp):
        payload = cantor_pair(encode(t.outer), _pair_list([encode(g) for g in t.inners]))
        return 3 + 3 * payload
    if isinstance(t, PrimRec):
        return 4 + 3 * cantor_pair(encode(t.base), encode(t.step))
    raise TypeError(f"not a term: {t!r}")


@lru_cache(maxsize=1 << 16)
def decode(e: int) -> PrTerm:
    """Total decoding: every natural denotes a well-formed term."""
    if e == 0:
        return Zero()
    if e == 1:
        return Succ()
    m, tag = divmod(e - 2, 3)
    if tag == 0:
        a, b = cantor_unpair(m)
        n = a + 1
        return Proj(n, (b % n) + 1)
    if tag == 1:
        a, b = cantor_unpair(m)
        outer = decode(a)
        k = arity(outer)
        if k == 0:
            return outer
        inners = [decode(x) for x in _unpair_list(b, k)]
        n = max(1, max(arity(g) for g in inners))
        return Comp(outer, tuple(coerce_arity(g, n) for g in inners))
    a, b = cantor_unpair(m)
    base = decode(a)
    return PrimRec(base, coerce_arity(decode(b), arity(base) + 3))


def converges_within(e: int, x: int, s: int) -> Optional[int]:
    """Value of the e-th unary program on x if it converges in < s steps."""
    outcome = eval_clocked(unary_wrap(decode(e)), [x], s)
    if isinstance(outcome, Converged):
        return outcome.value
    return None


# ---------------------------------------------------------------------------
# Clocked unary programs: the common currency for opponents and witnesses.


class ClockedProgram:
    """A total unary function with a deterministic step-cost assignment.

    value(x) is total; cost(x) is the number of steps needed, so
    converges_within(x, s) returns the value exactly when cost(x) < s.
    """

    name: str

    def value(self, x: int) -> int:
        raise NotImplementedError

    def cost(self, x: int) -> int:
        raise NotImplementedError

    def converges_within(self, x: int, s: int) -> Optional[int]:
        if self.cost(x) < s:
            return self.value(x)
        return None

    def __repr__(self):
        return f"<program {self.name}>"


class TermProgram(ClockedProgram):
    """Program backed by a unary term; cost is the evaluator's node count."""

    def __init__(self, term: PrTerm, name: str | None = None):
        validate(term)
        self.source = term
        self.term = unary_wrap(term)
        self.name = name if name is not None else serialize(term)
        self._memo: dict[int, tuple[int, int]] = {}

    def _run(self, x: int) -> tuple[int, int]:
        hit = self._memo.get(x)
        if hit is None:
            st = [0, _UNBOUNDED]
            hit = (_compiled(self.term)([x], st), st[0])
            self._memo[x] = hit
        return hit

    def value(self, x: int) -> int:
        return self._run(x)[0]

    def cost(self, x: int) -> int:
        return self._run(x)[1]


class NativeProgram(ClockedProgram):
    """Program backed by a Python callable with a declared cost function.

    Used where term evaluation is infeasible (very large values); the cost
    function stands in for the step counter and must be deterministic.
    """

    def __init__(self, name: str, fn: Callable[[int], int],
                 cost_fn: Callable[[int], int] = lambda x: 1):
        self.name = name
        self.fn = fn
        self.cost_fn = cost_fn

    def value(self, x: int) -> int:
        return self.fn(x)

    def cost(self, x: int) -> int:
        return self.cost_fn(x)


class TableProgram(ClockedProgram):
    """Program backed by a finite table; lookups cost one step."""

    def __init__(self, values: Sequence[int], name: str = "table"):
        self.values = tuple(values)
        self.name = name

    def value(self, x: int) -> int:
        if x >= len(self.values):
            raise BudgetExceeded(f"table program {self.name} has horizon {len(self.values) - 1}, "
                                 f"asked for {x}")
        return self.values[x]

    def cost(self, x: int) -> int:
        return 1

    @property
    def horizon(self) -> int:
        return len(self.values) - 1


NATIVE_REGISTRY: dict[str, NativeProgram] = {
    "id": NativeProgram("id", lambda x: x),
    "succ": NativeProgram("succ", lambda x: x + 1, lambda x: 3),
    "plus2": NativeProgram("plus2", lambda x: x + 2, lambda x: 5),
    "double": NativeProgram("double", lambda x: 2 * x, lambda x: 2 + 5 * x),
    "triple": NativeProgram("triple", lambda x: 3 * x, lambda x: 2 + 7 * x),
    "square": NativeProgram("square", lambda x: x * x, lambda x: 2 + (x + 2) * x),
    "square_plus": NativeProgram("square_plus", lambda x: x * x + x + 1,
                                 lambda x: 4 + (x + 3) * x),
    "const0": NativeProgram("const0", lambda x: 0),
    "const1": NativeProgram("const1", lambda x: 1, lambda x: 2),
    "const5": NativeProgram("const5", lambda x: 5, lambda x: 6),
}


def resolve_program(text: str) -> ClockedProgram:
    """Resolve a family entry: `@name` hits the native registry, else a term."""
    text = text.strip()
    if text.startswith("@"):
        name = text[1:]
        if name not in NATIVE_REGISTRY:
            raise ParseError(f"unknown native program @{name}")
        return NATIVE_REGISTRY[name]
    return TermProgram(parse_term(text))


def program_text(p: ClockedProgram) -> str:
    """Canonical family-file text for a program."""
    if isinstance(p, TermProgram):
        return serialize(p.source)
    if isinstance(p, NativeProgram):
        return f"@{p.name}"
    raise ParseError(f"program {p!r} has no canonical text form")
