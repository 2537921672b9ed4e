"""Set descriptors, zero-count profiles, and the binary-string calculus.

A descriptor is a clocked bit-generator for a coinfinite primitive recursive
set: ``bit(n)`` is the characteristic value, total and deterministic, and
every bit carries a per-bit step cost.  Two zero-count profiles are exposed:

  * ``zeros_by_index(s)``: zeros among bits 0..s (the prefix of length s+1);
  * ``zeros_by_steps(s)``: zeros among the bits the generator can produce
    with a total step budget of s, i.e. bits 0..k for the largest k whose
    cumulative cost stays within s.

Per-bit costs: 1 for builtins, the evaluator's node count for term-backed
descriptors, and the replayed stage count (n+1 for bit n) for trace-backed
descriptors.  Both profile sequences are nondecreasing and climb by at most
one per unit.

The descriptor DSL understood by the CLI and by test fixtures:

    evens | mod K | id | term "<unary term>" bound "<unary term>"
    | trace <path> | join(<expr>, <expr>) | meet(<expr>, <expr>)
    | drop(<expr>)

``id`` denotes the set {0}, whose induced relation is the identity.
``drop`` removes the least zero (flips it to membership).
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

from . import pr_lang
from .errors import (
    CeilingExceeded,
    NotEquivalence,
    ParseError,
    PunctualityViolation,
    ShapeMismatch,
)

DEFAULT_CEILING = 200_000


# ---------------------------------------------------------------------------
# Finite binary strings


@dataclass(frozen=True)
class Prefix:
    bits: tuple

    def __len__(self):
        return len(self.bits)

    def __getitem__(self, i):
        return self.bits[i]

    def __iter__(self):
        return iter(self.bits)

    @property
    def zero_count(self) -> int:
        return len(self.bits) - sum(self.bits)

    def zero_positions(self) -> tuple:
        return tuple(i for i, b in enumerate(self.bits) if b == 0)

    def principal(self, n: int) -> int:
        """Position of the (n+1)-st zero, in order of magnitude."""
        return self.zero_positions()[n]

    def concat(self, other: "Prefix") -> "Prefix":
        return Prefix(self.bits + other.bits)

    def as_str(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_bits(cls, bits) -> "Prefix":
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def from_str(cls, text: str) -> "Prefix":
        return cls(tuple(int(c) for c in text))


def _check_shapes(sigma: Prefix, tau: Prefix):
    if len(sigma) != len(tau):
        raise ShapeMismatch(f"lengths differ: {len(sigma)} vs {len(tau)}")
    if sigma.zero_count != tau.zero_count:
        raise ShapeMismatch(
            f"zero counts differ: {sigma.zero_count} vs {tau.zero_count}")


def string_join(sigma: Prefix, tau: Prefix) -> Prefix:
    """Zeros of the join sit at min(p_sigma(n), p_tau(n)) for each n."""
    _check_shapes(sigma, tau)
    zs = sigma.zero_positions()
    zt = tau.zero_positions()
    marks = {min(a, b) for a, b in zip(zs, zt)}
    return Prefix(tuple(0 if i in marks else 1 for i in range(len(sigma))))


def string_meet(sigma: Prefix, tau: Prefix) -> Prefix:
    """Zeros of the meet sit at max(p_sigma(n), p_tau(n)) for each n."""
    _check_shapes(sigma, tau)
    zs = sigma.zero_positions()
    zt = tau.zero_positions()
    marks = {max(a, b) for a, b in zip(zs, zt)}
    return Prefix(tuple(0 if i in marks else 1 for i in range(len(sigma))))


# ---------------------------------------------------------------------------
# Set descriptors


class PrSet:
    """Clocked bit-generator for a coinfinite primitive recursive set.

    Immutable from the outside; bits and costs are memoized behind a lock so
    concurrent readers observe identical values.
    """

    def __init__(self, name: str, bit_fn: Callable[[int], int],
                 cost_fn: Callable[[int], int] | None = None,
                 *, kind: str = "derived", dsl: str | None = None,
                 zeros_fast: Callable[[int], int] | None = None,
                 coinfinite: bool = True, meta: dict | None = None):
        self.name = name
        self.kind = kind
        self.dsl = dsl
        self.declared_coinfinite = coinfinite
        self.meta = dict(meta or {})
        self._bit_fn = bit_fn
        self._cost_fn = cost_fn or (lambda n: 1)
        self._zeros_fast = zeros_fast
        self._lock = threading.Lock()
        self._bits: list[int] = []
        self._zero_cum: list[int] = []   # zeros among bits 0..n
        self._cost_cum: list[int] = []   # total cost of bits 0..n

    def __repr__(self):
        return f"<set {self.name}>"

    def _ensure(self, n: int) -> None:
        if n < len(self._bits):
            return
        with self._lock:
            while len(self._bits) <= n:
                m = len(self._bits)
                b = 1 if self._bit_fn(m) else 0
                c = max(1, self._cost_fn(m))
                self._bits.append(b)
                prev_z = self._zero_cum[-1] if self._zero_cum else 0
                prev_c = self._cost_cum[-1] if self._cost_cum else 0
                self._zero_cum.append(prev_z + (1 - b))
                self._cost_cum.append(prev_c + c)

    def bit(self, n: int) -> int:
        self._ensure(n)
        return self._bits[n]

    def prefix(self, s: int) -> Prefix:
        """Initial segment of length s+1 (bits 0..s)."""
        self._ensure(s)
        return Prefix(tuple(self._bits[:s + 1]))

    def zeros_by_index(self, s: int) -> int:
        self._ensure(s)
        return self._zero_cum[s]

    def bit_cost(self, n: int) -> int:
        self._ensure(n)
        return self._cost_cum[n] - (self._cost_cum[n - 1] if n else 0)

    def cum_cost(self, n: int) -> int:
        """Total generator cost of producing bits 0..n."""
        self._ensure(n)
        return self._cost_cum[n]

    def zeros_by_steps(self, s: int) -> int:
        """Zeros among the bits decidable within s total generator steps."""
        if s <= 0:
            return 0
        self._ensure(0)
        if self._cost_cum[0] > s:
            return 0
        # grow the memo until the cumulative cost passes s
        k = len(self._cost_cum) - 1
        while self._cost_cum[k] <= s:
            self._ensure(k + 1)
            k += 1
        # binary search for the last k with cumulative cost <= s
        lo, hi = 0, k
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._cost_cum[mid] <= s:
                lo = mid
            else:
                hi = mid - 1
        return self._zero_cum[lo]

    def zeros_up_to(self, ceiling: int) -> Iterator[int]:
        for n in range(ceiling + 1):
            if self.bit(n) == 0:
                yield n

    def principal_zero(self, n: int, ceiling: int = DEFAULT_CEILING) -> int:
        """Position of the (n+1)-st zero, in order of magnitude."""
        if self._zeros_fast is not None:
            return self._zeros_fast(n)
        seen = 0
        for pos in self.zeros_up_to(ceiling):
            if seen == n:
                return pos
            seen += 1
        raise CeilingExceeded(
            f"{self.name}: fewer than {n + 1} zeros below ceiling {ceiling}")


# Builtins


def evens_set() -> PrSet:
    return PrSet("evens", lambda n: 1 - (n % 2), kind="builtin", dsl="evens",
                 zeros_fast=lambda n: 2 * n + 1)


def mod_set(k: int) -> PrSet:
    if k < 2:
        raise ParseError(f"mod K needs K >= 2, got {k}")

    def nth_zero(n):
        # zeros are the non-multiples of k, i.e. k-1 of every k numbers
        block, off = divmod(n, k - 1)
        return block * k + off + 1

    return PrSet(f"mod{k}", lambda n: 1 if n % k == 0 else 0, kind="builtin",
                 dsl=f"mod {k}", zeros_fast=nth_zero)


def singleton_zero_set() -> PrSet:
    return PrSet("id", lambda n: 1 if n == 0 else 0, kind="builtin", dsl="id",
                 zeros_fast=lambda n: n + 1)


def blocks_set(k: int) -> PrSet:
    """Period-2k blocks: k members then k non-members.

    Useful as a partner whose zero count oscillates around the halving line,
    crossing it at every period boundary.
    """
    if k < 1:
        raise ParseError(f"blocks K needs K >= 1, got {k}")

    def nth_zero(n):
        block, off = divmod(n, k)
        return 2 * k * block + k + off

    return PrSet(f"blocks{k}", lambda n: 1 if n % (2 * k) < k else 0,
                 kind="builtin", dsl=f"blocks {k}", zeros_fast=nth_zero)


def term_set(term, bound, name: str | None = None) -> PrSet:
    """Descriptor backed by a unary term with a declared step-bound term."""
    if isinstance(term, str):
        term = pr_lang.parse_term(term)
    if isinstance(bound, str):
        bound = pr_lang.parse_term(bound)
    term = pr_lang.unary_wrap(term)
    bound = pr_lang.unary_wrap(bound)
    term_text = pr_lang.serialize(term)
    bound_text = pr_lang.serialize(bound)
    outcomes: dict[int, pr_lang.Converged] = {}

    def run(n):
        hit = outcomes.get(n)
        if hit is None:
            budget = pr_lang.eval_total(bound, [n])
            out = pr_lang.eval_clocked(term, [n], budget)
            if not isinstance(out, pr_lang.Converged):
                raise PunctualityViolation(
                    f"term set {term_text} exceeded its bound {bound_text} at n={n}")
            hit = outcomes[n] = out
        return hit

    return PrSet(name or f"term:{term_text}",
                 lambda n: 1 if run(n).value else 0,
                 lambda n: run(n).steps,
                 kind="term",
                 dsl=f'term "{term_text}" bound "{bound_text}"')


def zero_list_set(name: str, next_zero: Callable[[list], int], *,
                  kind: str = "trace", dsl: str | None = None,
                  cost_fn: Callable[[int], int] | None = None,
                  meta: dict | None = None) -> PrSet:
    """Set given by its (strictly increasing) zero positions.

    ``next_zero(zs)`` extends the list of known zeros; positions may be huge,
    so bits and principal zeros are derived from the list, never by scan.
    """
    zeros: list[int] = []
    lock = threading.Lock()

    def ensure_past(n):
        with lock:
            while not zeros or zeros[-1] <= n:
                zeros.append(next_zero(list(zeros)))

    def bit(n):
        ensure_past(n)
        i = bisect.bisect_left(zeros, n)
        return 0 if i < len(zeros) and zeros[i] == n else 1

    def nth(n):
        with lock:
            while len(zeros) <= n:
                zeros.append(next_zero(list(zeros)))
            return zeros[n]

    s = PrSet(name, bit, cost_fn or (lambda n: n + 1), kind=kind, dsl=dsl,
              zeros_fast=nth, meta=meta)
    s.meta["zero_list"] = zeros
    return s


def prefix_set(name: str, bits: Sequence[int], *, kind: str = "trace",
               dsl: str | None = None,
               cost_fn: Callable[[int], int] | None = None,
               meta: dict | None = None) -> PrSet:
    """Finite constructed prefix, extended past its end by alternating 1,0.

    The alternating tail keeps the set infinite and coinfinite at any
    horizon beyond the constructed part.
    """
    frozen = tuple(int(b) for b in bits)

    def bit(n):
        if n < len(frozen):
            return frozen[n]
        return 1 - (n - len(frozen)) % 2

    return PrSet(name, bit, cost_fn or (lambda n: n + 1), kind=kind, dsl=dsl,
                 meta=meta)


# Derived descriptors


def sample_window_mixed(x: PrSet, horizon: int, window: int = 64) -> bool:
    """Sampled coinfiniteness check: the window past the horizon holds both
    a member and a non-member.  Descriptors are user-supplied, so this is
    evidence, not proof."""
    bits = [x.bit(n) for n in range(horizon, horizon + window + 1)]
    return 0 in bits and 1 in bits


def override_zero_member(x: PrSet) -> PrSet:
    """Force 0 into the set (bit 0 becomes 1); identity if already there."""
    if x.bit(0) == 1:
        return x
    out = PrSet(f"{x.name}+0", lambda n: 1 if n == 0 else x.bit(n),
                x.bit_cost, kind=x.kind, dsl=x.dsl,
                meta={**x.meta, "zero_member_override": True})
    return out


def set_join(x: PrSet, y: PrSet) -> PrSet:
    """Supremum carrier: its index profile is the pointwise max of the two."""
    x = override_zero_member(x)
    y = override_zero_member(y)

    def bit(n):
        if n == 0:
            return 1
        before = max(x.zeros_by_index(n - 1), y.zeros_by_index(n - 1))
        after = max(x.zeros_by_index(n), y.zeros_by_index(n))
        return 0 if after > before else 1

    dsl = f"join({x.dsl}, {y.dsl})" if x.dsl and y.dsl else None
    return PrSet(f"({x.name} v {y.name})", bit,
                 lambda n: max(x.bit_cost(n), y.bit_cost(n)) + 1,
                 kind="derived", dsl=dsl)


def set_meet(x: PrSet, y: PrSet) -> PrSet:
    """Infimum carrier: its index profile is the pointwise min of the two."""
    x = override_zero_member(x)
    y = override_zero_member(y)

    def bit(n):
        if n == 0:
            return 1
        before = min(x.zeros_by_index(n - 1), y.zeros_by_index(n - 1))
        after = min(x.zeros_by_index(n), y.zeros_by_index(n))
        return 0 if after > before else 1

    dsl = f"meet({x.dsl}, {y.dsl})" if x.dsl and y.dsl else None
    return PrSet(f"({x.name} ^ {y.name})", bit,
                 lambda n: max(x.bit_cost(n), y.bit_cost(n)) + 1,
                 kind="derived", dsl=dsl)


def drop_least_zero(x: PrSet, ceiling: int = DEFAULT_CEILING) -> PrSet:
    """Flip the least zero of x to membership; profile drops by exactly one."""
    z0 = x.principal_zero(0, ceiling)
    zeros_fast = None
    if x._zeros_fast is not None:
        zeros_fast = lambda n: x._zeros_fast(n + 1)
    dsl = f"drop({x.dsl})" if x.dsl else None
    return PrSet(f"{x.name}^[-1]", lambda n: 1 if n == z0 else x.bit(n),
                 x.bit_cost, kind="derived", dsl=dsl, zeros_fast=zeros_fast,
                 meta={"dropped_zero": z0})


# ---------------------------------------------------------------------------
# Relations


class Relation:
    """Binary predicate descriptor for an equivalence relation on omega."""

    name: str

    def related(self, x: int, y: int) -> bool:
        raise NotImplementedError

    def __repr__(self):
        return f"<relation {self.name}>"


class SetRelation(Relation):
    """The 1-dimensional relation of a set: related iff both members or equal."""

    def __init__(self, carrier: PrSet):
        self.carrier = carrier
        self.name = f"R[{carrier.name}]"

    def related(self, x: int, y: int) -> bool:
        return x == y or (self.carrier.bit(x) == 1 and self.carrier.bit(y) == 1)

    def class_rep(self, x: int) -> int:
        """-1 for the main class, x for a singleton."""
        return -1 if self.carrier.bit(x) == 1 else x


class IdentityRelation(Relation):
    name = "Id"

    def related(self, x: int, y: int) -> bool:
        return x == y


class PredicateRelation(Relation):
    """User-supplied equivalence predicate with a declared step bound."""

    def __init__(self, fn: Callable[[int, int], bool], name: str,
                 step_bound: Callable[[int, int], int] | None = None):
        self.fn = fn
        self.name = name
        self.step_bound = step_bound or (lambda x, y: max(x, y) + 1)

    def related(self, x: int, y: int) -> bool:
        return bool(self.fn(x, y))


def check_equivalence_sampled(r: Relation, bound: int) -> None:
    """Sampled reflexivity/symmetry/transitivity check; raises NotEquivalence."""
    w = min(bound, 40)
    for x in range(min(bound, 500) + 1):
        if not r.related(x, x):
            raise NotEquivalence(f"{r.name} is not reflexive at {x}")
    for x in range(w + 1):
        for y in range(w + 1):
            if r.related(x, y) != r.related(y, x):
                raise NotEquivalence(f"{r.name} is not symmetric at ({x},{y})")
    t = min(bound, 20)
    for x in range(t + 1):
        for y in range(t + 1):
            if not r.related(x, y):
                continue
            for z in range(t + 1):
                if r.related(y, z) and not r.related(x, z):
                    raise NotEquivalence(
                        f"{r.name} is not transitive at ({x},{y},{z})")


def in_principal_transversal(r: Relation, y: int) -> bool:
    if y == 0:
        return False
    return all(not r.related(x, y) for x in range(y))


def principal_transversal(r: Relation, bound: int) -> Prefix:
    """Characteristic prefix of the least-representative transversal."""
    check_equivalence_sampled(r, bound)
    return Prefix(tuple(1 if in_principal_transversal(r, y) else 0
                        for y in range(bound + 1)))


def normal_form(r: Relation, *, sample_bound: int = 40):
    """Carrier of the normal form plus the two reduction programs.

    Returns (X, f, g) where X is the complement of the principal
    transversal, f reduces r to the relation of X by least representatives,
    and g maps the main class back to 0 and keeps transversal points fixed.
    """
    check_equivalence_sampled(r, sample_bound)

    memo: dict[int, bool] = {}

    def in_main(n):
        hit = memo.get(n)
        if hit is None:
            hit = memo[n] = not in_principal_transversal(r, n)
        return hit

    x = PrSet(f"nf[{r.name}]", lambda n: 1 if in_main(n) else 0,
              lambda n: n + 1, kind="derived")

    def f_fn(v):
        for y in range(v + 1):
            if r.related(y, v):
                return y
        return v

    f = pr_lang.NativeProgram(f"nf-fwd[{r.name}]", f_fn, lambda v: v + 1)
    g = pr_lang.NativeProgram(
        f"nf-back[{r.name}]", lambda v: 0 if in_main(v) else v, lambda v: v + 1)
    return x, f, g


# ---------------------------------------------------------------------------
# Descriptor DSL


class _DslParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek_word(self) -> str:
        self.skip_ws()
        j = self.pos
        while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
            j += 1
        return self.text[self.pos:j]

    def take_word(self) -> str:
        w = self.peek_word()
        self.pos += len(w)
        return w

    def expect(self, ch):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise ParseError(f"expected {ch!r} in descriptor", self.pos)
        self.pos += 1

    def quoted(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != '"':
            raise ParseError("expected a quoted string", self.pos)
        end = self.text.find('"', self.pos + 1)
        if end < 0:
            raise ParseError("unterminated quote", self.pos)
        out = self.text[self.pos + 1:end]
        self.pos = end + 1
        return out

    def path(self) -> str:
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == '"':
            return self.quoted()
        j = self.pos
        while j < len(self.text) and not self.text[j].isspace() and self.text[j] not in ",()":
            j += 1
        if j == self.pos:
            raise ParseError("expected a path", self.pos)
        out = self.text[self.pos:j]
        self.pos = j
        return out

    def expr(self) -> PrSet:
        word = self.take_word()
        if word == "evens":
            return evens_set()
        if word == "id":
            return singleton_zero_set()
        if word in ("mod", "blocks"):
            self.skip_ws()
            j = self.pos
            while j < len(self.text) and self.text[j].isdigit():
                j += 1
            if j == self.pos:
                raise ParseError(f"{word} needs a number", self.pos)
            k = int(self.text[self.pos:j])
            self.pos = j
            return mod_set(k) if word == "mod" else blocks_set(k)
        if word == "term":
            t = self.quoted()
            if self.take_word() != "bound":
                raise ParseError("term descriptor needs a bound", self.pos)
            b = self.quoted()
            return term_set(t, b)
        if word == "trace":
            p = self.path()
            from . import constructions
            return constructions.load_trace_set(p)
        if word in ("join", "meet"):
            self.expect("(")
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(")")
            return set_join(a, b) if word == "join" else set_meet(a, b)
        if word == "drop":
            self.expect("(")
            a = self.expr()
            self.expect(")")
            return drop_least_zero(a)
        raise ParseError(f"unknown descriptor {word!r}", self.pos)


def parse_set(text: str) -> PrSet:
    p = _DslParser(text.strip())
    s = p.expr()
    p.skip_ws()
    if p.pos != len(p.text):
        raise ParseError("trailing input after descriptor", p.pos)
    return s
