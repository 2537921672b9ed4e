"""Reduction witnesses, counterexample detectors, and growth-rate calculus.

A reduction between induced relations is witnessed by a clocked total unary
program together with the claim it makes.  Verification is always against a
stated finite horizon; no verdict extrapolates beyond it.

The three detectors decide, from a stage bound and the decided prefixes,
whether a program permanently violates a reduction claim.  Each fires on
the least pair (l, m) in lexicographic order whose decided data
contradicts the claimed biconditional; because prefixes only extend and
clocked convergence is monotone, a fired pair stays fired forever.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .errors import (
    NotAReduction,
    NotCertified,
    PreconditionFailed,
    WitnessBoundViolated,
)
from .pr_lang import ClockedProgram, TableProgram
from .sets import IdentityRelation, Prefix, PrSet, Relation, SetRelation


@dataclass
class ReductionWitness:
    """A clocked program plus the certificate kind it claims."""

    program: ClockedProgram
    claim: str                 # reduction | growth-h | growth-p | rate-r
    source: str
    target: str
    horizon: int
    convention: str = "index"
    verified: bool = False

    def value(self, x: int) -> int:
        return self.program.value(x)


@dataclass(frozen=True)
class Counterexample:
    flavor: str                # R_to_RY | RY_to_R | RX_to_RY | reduction
    l: int
    m: int
    stage: int
    left: bool                 # the two sides of the fired biconditional
    right: bool
    images: Optional[tuple] = None
    member: Optional[str] = None

    def describe(self) -> str:
        img = f" images={self.images}" if self.images else ""
        return (f"{self.flavor} l={self.l} m={self.m} stage={self.stage}"
                f" left={int(self.left)} right={int(self.right)}{img}")


Witnessable = Union[ReductionWitness, ClockedProgram, Sequence[int]]


def as_program(f: Witnessable) -> ClockedProgram:
    if isinstance(f, ReductionWitness):
        return f.program
    if isinstance(f, ClockedProgram):
        return f
    if isinstance(f, (list, tuple)):
        return TableProgram(f)
    raise TypeError(f"not a program or witness: {f!r}")


def _rep_fn(rel: Relation, bound: int) -> Callable[[int], int]:
    """Canonical class representative on 0..bound (least related element)."""
    if isinstance(rel, SetRelation):
        return rel.class_rep
    if isinstance(rel, IdentityRelation):
        return lambda x: x
    memo: dict[int, int] = {}

    def rep(x):
        hit = memo.get(x)
        if hit is None:
            hit = x
            for y in range(x + 1):
                if rel.related(y, x):
                    hit = y
                    break
            memo[x] = hit
        return hit

    return rep


def check_reduction_prefix(f: Witnessable, source: Relation, target: Relation,
                           n: int) -> Optional[Counterexample]:
    """Verify x ~ y iff f(x) ~ f(y) on all pairs below n.

    Returns None when the claim holds, else the lexicographically least
    violating pair.  The fast path checks that classes map consistently and
    injectively; only on failure does it rescan for the least pair.
    """
    prog = as_program(f)
    rep_s = _rep_fn(source, n)
    rep_t = _rep_fn(target, n)
    values = [prog.value(x) for x in range(n + 1)]
    image_rep = [rep_t(v) for v in values]
    forward: dict[int, int] = {}
    backward: dict[int, int] = {}
    clean = True
    for x in range(n + 1):
        a, b = rep_s(x), image_rep[x]
        if forward.setdefault(a, b) != b or backward.setdefault(b, a) != a:
            clean = False
            break
    if clean:
        return None
    for l in range(n + 1):
        for m in range(n + 1):
            if l == m:
                continue
            left = source.related(l, m)
            right = target.related(values[l], values[m])
            if left != right:
                return Counterexample("reduction", l, m, n, left, right,
                                      (values[l], values[m]))
    return None


def require_reduction(f: Witnessable, source: Relation, target: Relation,
                      n: int) -> None:
    cex = check_reduction_prefix(f, source, target, n)
    if cex is not None:
        raise NotAReduction(f"not a reduction on 0..{n}: {cex.describe()}")


# ---------------------------------------------------------------------------
# Stage detectors.  All three fire exactly when the decided data contradicts
# the claimed biconditional; eligibility needs converged images inside the
# decided prefixes, which makes every hit permanent.


def images_split(sigma: Prefix, a: int, b: int) -> bool:
    """True iff positions a, b are provably inequivalent in any extension."""
    return (sigma[a] != sigma[b]) or (a != b and sigma[a] == 0 and sigma[b] == 0)


def detect_counterexample_R_to_RY(p: ClockedProgram, source: Relation,
                                  sigma_y: Prefix, s: int,
                                  member: str | None = None) -> Optional[Counterexample]:
    """Permanent violation of `p reduces the source relation to R_Y`."""
    conv = {}
    for x in range(s + 1):
        v = p.converges_within(x, s)
        if v is not None and v < len(sigma_y):
            conv[x] = v
    for l in range(s + 1):
        if l not in conv:
            continue
        for m in range(s + 1):
            if m == l or m not in conv:
                continue
            left = source.related(l, m)
            right = images_split(sigma_y, conv[l], conv[m])
            if left == right:
                return Counterexample("R_to_RY", l, m, s, left, right,
                                      (conv[l], conv[m]), member)
    return None


def detect_counterexample_RY_to_R(p: ClockedProgram, sigma_y: Prefix,
                                  target: Relation, s: int,
                                  member: str | None = None) -> Optional[Counterexample]:
    """Permanent violation of `p reduces R_Y to the target relation`."""
    conv = {}
    for x in range(len(sigma_y)):
        v = p.converges_within(x, s)
        if v is not None:
            conv[x] = v
    for l in range(len(sigma_y)):
        if l not in conv:
            continue
        for m in range(len(sigma_y)):
            if m == l or m not in conv:
                continue
            left = sigma_y[l] == 1 and sigma_y[m] == 1
            right = not target.related(conv[l], conv[m])
            if left == right:
                return Counterexample("RY_to_R", l, m, s, left, right,
                                      (conv[l], conv[m]), member)
    return None


def detect_counterexample_RX_to_RY(p: ClockedProgram, sigma_x: Prefix,
                                   sigma_y: Prefix, s: int,
                                   member: str | None = None) -> Optional[Counterexample]:
    """Permanent violation of `p reduces R_X to R_Y`, both sets by prefix."""
    conv = {}
    for x in range(len(sigma_x)):
        v = p.converges_within(x, s)
        if v is not None and v < len(sigma_y):
            conv[x] = v
    for l in range(len(sigma_x)):
        if l not in conv:
            continue
        for m in range(len(sigma_x)):
            if m == l or m not in conv:
                continue
            left = sigma_x[l] == 1 and sigma_x[m] == 1
            right = images_split(sigma_y, conv[l], conv[m])
            if left == right:
                return Counterexample("RX_to_RY", l, m, s, left, right,
                                      (conv[l], conv[m]), member)
    return None


def revalidate_counterexample(cex: Counterexample, p: ClockedProgram, *,
                              source: Relation | None = None,
                              sigma_x: Prefix | None = None,
                              sigma_y: Prefix | None = None,
                              target: Relation | None = None) -> bool:
    """Re-derive the fired condition for the recorded pair on final data."""
    l, m, s = cex.l, cex.m, cex.stage
    vl = p.converges_within(l, s)
    vm = p.converges_within(m, s)
    if cex.flavor == "R_to_RY":
        if vl is None or vm is None or max(vl, vm) >= len(sigma_y):
            return False
        return source.related(l, m) == images_split(sigma_y, vl, vm)
    if cex.flavor == "RY_to_R":
        if vl is None or vm is None or max(l, m) >= len(sigma_y):
            return False
        left = sigma_y[l] == 1 and sigma_y[m] == 1
        return left == (not target.related(vl, vm))
    if cex.flavor == "RX_to_RY":
        if vl is None or vm is None or max(l, m) >= len(sigma_x):
            return False
        if max(vl, vm) >= len(sigma_y):
            return False
        left = sigma_x[l] == 1 and sigma_x[m] == 1
        return left == images_split(sigma_y, vl, vm)
    raise ValueError(f"unknown flavor {cex.flavor}")


# ---------------------------------------------------------------------------
# Growth-rate calculus (index convention)


def _massage_for_growth(f: Witnessable, x: PrSet, y: PrSet, horizon: int) -> ClockedProgram:
    """Verified, class-respecting, nondecreasing-on-complement form of f."""
    prog = as_program(f)
    rx, ry = SetRelation(x), SetRelation(y)
    require_reduction(prog, rx, ry, horizon)
    comp = [n for n in range(horizon + 1) if x.bit(n) == 0]
    respects = all(y.bit(prog.value(n)) == 1 for n in range(horizon + 1) if x.bit(n) == 1)
    increasing = all(prog.value(a) < prog.value(b) for a, b in zip(comp, comp[1:]))
    if respects and increasing:
        return prog
    g = respect_normal_form(prog, x, y, horizon)
    return as_program(surjectivize(g, x, y, horizon))


def synth_h_from_reduction(f: Witnessable, x: PrSet, y: PrSet,
                           horizon: int) -> ReductionWitness:
    """Growth bound from a reduction: count of zeros transfers at rate h.

    h(s) is the image of the greatest zero of x below s, or 0 when x has no
    zero there; then zeros_by_index(x, s) <= zeros_by_index(y, h(s)).
    """
    prog = _massage_for_growth(f, x, y, horizon)
    table = []
    last_zero = None
    for s in range(horizon + 1):
        if x.bit(s) == 0:
            last_zero = s
        table.append(0 if last_zero is None else prog.value(last_zero))
    for s in range(horizon + 1):
        if x.zeros_by_index(s) > y.zeros_by_index(table[s]):
            raise NotAReduction(
                f"growth synthesis failed its own bound at s={s}")
    return ReductionWitness(TableProgram(table, "h"), "growth-h",
                            x.name, y.name, horizon, "index", True)


def synth_reduction_from_h(x: PrSet, y: PrSet, h: Witnessable,
                           horizon: int) -> ReductionWitness:
    """Reduction from a growth bound, by mu-search under h for fresh zeros."""
    if y.bit(0) != 1:
        raise PreconditionFailed("growth-to-reduction synthesis needs 0 in the target set")
    hp = as_program(h)
    used: set[int] = set()
    table: list[int] = []
    for v in range(horizon + 1):
        if x.bit(v) == 1:
            table.append(0)
            continue
        if v == 0:
            z = y.principal_zero(0)
            used.add(z)
            table.append(z)
            continue
        ceiling = hp.value(v)
        pick = None
        for cand in range(ceiling + 1):
            if cand not in used and y.bit(cand) == 0:
                pick = cand
                break
        if pick is None:
            raise WitnessBoundViolated(
                f"mu-search under h({v})={ceiling} found no fresh zero of {y.name}")
        used.add(pick)
        table.append(pick)
    w = ReductionWitness(TableProgram(table, "g"), "reduction",
                         x.name, y.name, horizon, "index")
    require_reduction(w, SetRelation(x), SetRelation(y), horizon)
    w.verified = True
    return w


# Step-count convention


def synth_p_from_reduction(f: Witnessable, x: PrSet, y: PrSet,
                           horizon: int) -> ReductionWitness:
    """Step-rate bound: zeros seen of x in s steps appear in y by p(s) steps.

    p(s) is the first stage past s by which the target generator has decided
    every bit up to the running maximum of f; only bits the source generator
    can reveal within the step horizon matter, so the running maximum
    freezes at that index range and f need not extend past it.
    """
    k_max = 0
    while x.cum_cost(k_max + 1) <= horizon:
        k_max += 1
    prog = _massage_for_growth(f, x, y, k_max)
    table = []
    running = 0
    for s in range(horizon + 1):
        if s <= k_max:
            running = max(running, prog.value(s))
        table.append(max(s + 1, y.cum_cost(running)))
    # the left side only changes where the source reveals a bit, and the
    # right side is nondecreasing, so boundary checks cover every stage
    boundaries = [0] + [x.cum_cost(k) for k in range(k_max + 1)
                        if x.cum_cost(k) <= horizon]
    for s in boundaries:
        if x.zeros_by_steps(s) > y.zeros_by_steps(table[s]):
            raise NotAReduction(f"step-rate synthesis failed its own bound at s={s}")
    return ReductionWitness(TableProgram(table, "p"), "growth-p",
                            x.name, y.name, horizon, "steps", True)


def synth_reduction_from_p(x: PrSet, y: PrSet, p: Witnessable,
                           horizon: int) -> ReductionWitness:
    """Reduction from a step-rate bound via the index-convention synthesis.

    h(m) = p(cost of deciding bits 0..m of x); the p table must cover that
    cost at the horizon.
    """
    pp = as_program(p)
    table = [pp.value(x.cum_cost(m)) for m in range(horizon + 1)]
    w = synth_reduction_from_h(x, y, TableProgram(table, "h-from-p"), horizon)
    w.convention = "steps"
    return w


# ---------------------------------------------------------------------------
# Witness massaging


def respect_normal_form(f: Witnessable, x: PrSet, y: PrSet,
                        horizon: int) -> ReductionWitness:
    """Rewrite a verified reduction so members of x land inside y."""
    prog = as_program(f)
    rx, ry = SetRelation(x), SetRelation(y)
    require_reduction(prog, rx, ry, horizon)
    members = [n for n in range(horizon + 1) if x.bit(n) == 1]
    values = [prog.value(n) for n in range(horizon + 1)]
    stray = [values[n] for n in members if y.bit(values[n]) != 1]
    if not stray:
        table = values
    else:
        a = stray[0]
        y0 = None
        for cand in range(horizon + 1):
            if y.bit(cand) == 1:
                y0 = cand
                break
        if y0 is None:
            raise PreconditionFailed(f"{y.name} has no member below the horizon")
        table = []
        for n in range(horizon + 1):
            if x.bit(n) == 1:
                table.append(y0)
            elif y.bit(values[n]) == 1:
                table.append(a)
            else:
                table.append(values[n])
    w = ReductionWitness(TableProgram(table, "respect"), "reduction",
                         x.name, y.name, horizon, "index")
    require_reduction(w, rx, ry, horizon)
    if any(y.bit(table[n]) != 1 for n in members):
        raise NotAReduction("normal-form respecting rewrite failed")
    w.verified = True
    return w


def surjectivize(f: Witnessable, x: PrSet, y: PrSet,
                 horizon: int) -> ReductionWitness:
    """Rewrite a reduction to hit fresh target classes in order of magnitude.

    Output maps members of x to the least member of y and walks the
    complement of y injectively under the bound max{f(i) : i <= x}; it is
    strictly increasing on the complement of x.
    """
    w = respect_normal_form(f, x, y, horizon)
    prog = w.program
    y0 = None
    for cand in range(horizon + 1):
        if y.bit(cand) == 1:
            y0 = cand
            break
    if y0 is None:
        raise PreconditionFailed(f"{y.name} has no member below the horizon")
    used: set[int] = set()
    table: list[int] = []
    running = 0
    for v in range(horizon + 1):
        running = max(running, prog.value(v))
        if x.bit(v) == 1:
            table.append(y0)
            continue
        pick = None
        for cand in range(running + 1):
            if cand not in used and y.bit(cand) == 0:
                pick = cand
                break
        if pick is None:
            raise NotAReduction(
                f"mu-search under max f on 0..{v} found no fresh zero of {y.name}")
        used.add(pick)
        table.append(pick)
    out = ReductionWitness(TableProgram(table, "onto"), "reduction",
                           x.name, y.name, horizon, "index")
    require_reduction(out, SetRelation(x), SetRelation(y), horizon)
    comp = [n for n in range(horizon + 1) if x.bit(n) == 0]
    for a, b in zip(comp, comp[1:]):
        if not table[a] < table[b]:
            raise NotAReduction("surjectivized table is not increasing on the complement")
    out.verified = True
    return out


# ---------------------------------------------------------------------------
# Immunity evidence


@dataclass(frozen=True)
class PreImmuneVerdict:
    member: str
    injective: bool
    collision: Optional[tuple]
    hits_set_at: Optional[tuple]       # (argument, value) landing inside x
    witnesses_top_reduction: bool      # injective and never hit x on the window


def check_pre_immune(x: PrSet, family: Sequence[ClockedProgram], horizon: int,
                     ceiling: int = 10_000) -> list[PreImmuneVerdict]:
    """Desk-scale contrapositive evidence for immunity of the complement.

    A member that is injective and lands entirely inside the complement on
    the window witnesses a reduction of the identity into the set relation;
    an immune-complement construction must force every injective member to
    hit the set.
    """
    out = []
    for r in family:
        seen: dict[int, int] = {}
        collision = None
        hit = None
        for n in range(horizon + 1):
            v = r.value(n)
            if collision is None and v in seen:
                collision = (seen[v], n)
            seen.setdefault(v, n)
            if hit is None and v <= ceiling and x.bit(v) == 1:
                hit = (n, v)
        out.append(PreImmuneVerdict(r.name, collision is None, collision, hit,
                                    collision is None and hit is None))
    return out


# ---------------------------------------------------------------------------
# Certificates and witness files


def verify_claim(w: ReductionWitness, low: PrSet, high: PrSet,
                 horizon: int) -> None:
    """Check a witness against the claim kind it carries; raise NotCertified."""
    if w.claim == "reduction":
        cex = check_reduction_prefix(w, SetRelation(low), SetRelation(high), horizon)
        if cex is not None:
            raise NotCertified(f"claimed reduction fails: {cex.describe()}")
        return
    for s in range(horizon + 1):
        if w.claim == "growth-h":
            a, b = low.zeros_by_index(s), high.zeros_by_index(w.value(s))
        elif w.claim == "growth-p":
            a, b = low.zeros_by_steps(s), high.zeros_by_steps(w.value(s))
        else:
            raise NotCertified(f"unknown claim kind {w.claim!r}")
        if a > b:
            raise NotCertified(f"claimed {w.claim} bound fails at s={s}")


def domination_certificate(low: PrSet, high: PrSet, horizon: int,
                           convention: str = "index") -> ReductionWitness:
    """Certify low <= high from a pointwise profile comparison (h = identity)."""
    for s in range(horizon + 1):
        a = (low.zeros_by_index(s) if convention == "index"
             else low.zeros_by_steps(s))
        b = (high.zeros_by_index(s) if convention == "index"
             else high.zeros_by_steps(s))
        if a > b:
            raise NotCertified(
                f"profile of {low.name} exceeds {high.name} at s={s} ({a} > {b})")
    claim = "growth-h" if convention == "index" else "growth-p"
    return ReductionWitness(TableProgram(list(range(horizon + 1)), "identity"),
                            claim, low.name, high.name, horizon, convention, True)


def serialize_witness(w: ReductionWitness) -> str:
    prog = w.program
    if not isinstance(prog, TableProgram):
        raise PreconditionFailed("only table-backed witnesses serialize")
    lines = [
        f"claim\t{w.claim}",
        f"source\t{w.source}",
        f"target\t{w.target}",
        f"horizon\t{w.horizon}",
        f"convention\t{w.convention}",
        f"verified\t{int(w.verified)}",
        "---",
    ]
    lines.extend(f"{i}\t{v}" for i, v in enumerate(prog.values))
    return "\n".join(lines) + "\n"


def parse_witness(text: str) -> ReductionWitness:
    head, _, body = text.partition("---\n")
    fields = {}
    for line in head.splitlines():
        key, _, val = line.partition("\t")
        fields[key] = val
    values = []
    for line in body.splitlines():
        i, _, v = line.partition("\t")
        if int(i) != len(values):
            raise PreconditionFailed(f"witness table rows out of order at {i}")
        values.append(int(v))
    horizon = int(fields["horizon"])
    if horizon != len(values) - 1:
        raise PreconditionFailed("witness table length does not match its horizon")
    return ReductionWitness(TableProgram(values, "table"), fields["claim"],
                            fields["source"], fields["target"], horizon,
                            fields["convention"], fields["verified"] == "1")


def save_witness(w: ReductionWitness, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(serialize_witness(w))


def load_witness(path) -> ReductionWitness:
    with open(path) as fh:
        return parse_witness(fh.read())
