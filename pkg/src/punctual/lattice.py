"""Equilibrium points, diamond-interval evidence, and slow sets.

Everything here is desk-scale and horizon-qualified: an "infinitely many
stages" property from the order theory becomes "at least k distinct
witness stages below the horizon", and every verdict records the horizon,
the convention (index or step counts), and the threshold it was judged at.
No verdict claims the limit property.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import CaseUndetermined, NotCertified
from .pr_lang import ClockedProgram, TableProgram, program_text
from .reductions import ReductionWitness, as_program, domination_certificate
from .sets import DEFAULT_CEILING, PrSet, drop_least_zero, evens_set, prefix_set, zero_list_set


def zeros(x: PrSet, s: int, convention: str) -> int:
    if convention == "index":
        return x.zeros_by_index(s)
    if convention == "steps":
        return x.zeros_by_steps(s)
    raise ValueError(f"unknown convention {convention!r}")


def family_hash(family: Sequence[ClockedProgram]) -> str:
    text = "\n".join(program_text(p) for p in family)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Equilibrium points


@dataclass(frozen=True)
class EquilibriumReport:
    convention: str
    horizon: int
    points: tuple

    @property
    def count(self) -> int:
        return len(self.points)


def equilibrium_points(x: PrSet, y: PrSet, horizon: int,
                       convention: str = "index") -> EquilibriumReport:
    """All stages below the horizon where the two zero counts agree."""
    pts = tuple(s for s in range(horizon + 1)
                if zeros(x, s, convention) == zeros(y, s, convention))
    return EquilibriumReport(convention, horizon, pts)


# ---------------------------------------------------------------------------
# Diamond evidence


@dataclass(frozen=True)
class DiamondEvidence:
    kind: str                  # q-stage | r-principal
    pair: tuple
    hits: tuple
    threshold: int
    verdict: str               # evidence(k) | no-evidence-at-horizon
    convention: str
    span: tuple                # (0, horizon) or the principal window
    relaxed: bool = False

    @property
    def count(self) -> int:
        return len(self.hits)


def _require_certificate(cert) -> None:
    if cert is None or not getattr(cert, "verified", False):
        raise NotCertified("operation needs a verified reducibility certificate")


def diamond_evidence_q(x: PrSet, y: PrSet, q, horizon: int, k: int,
                       certificate: ReductionWitness, *,
                       convention: str = "steps",
                       relaxed: bool = False) -> DiamondEvidence:
    """Stages t where the target's zero count reappears in the source at q(t).

    With ``relaxed`` the equality is weakened to <=, which certifies the
    same property for comparable pairs.
    """
    _require_certificate(certificate)
    prog = as_program(q)
    hits = []
    for t in range(horizon + 1):
        a = zeros(y, t, convention)
        b = zeros(x, prog.value(t), convention)
        if a == b or (relaxed and a <= b):
            hits.append(t)
    verdict = f"evidence({k})" if len(hits) >= k else "no-evidence-at-horizon"
    return DiamondEvidence("q-stage", (x.name, y.name), tuple(hits), k, verdict,
                           convention, (0, horizon), relaxed)


def diamond_evidence_r(x: PrSet, y: PrSet, r, window: tuple,
                       certificate: ReductionWitness, *,
                       k: int = 1,
                       ceiling: int = DEFAULT_CEILING) -> DiamondEvidence:
    """Indices n where the source's n-th zero is caught by r at the target's
    next zero: principal(x, n) <= r(principal(y, n + 1))."""
    _require_certificate(certificate)
    prog = as_program(r)
    n0, n1 = window
    hits = []
    for n in range(n0, n1 + 1):
        px = x.principal_zero(n, ceiling)
        py = y.principal_zero(n + 1, ceiling)
        if px <= prog.value(py):
            hits.append(n)
    verdict = f"evidence({k})" if len(hits) >= k else "no-evidence-at-horizon"
    return DiamondEvidence("r-principal", (x.name, y.name), tuple(hits), k,
                           verdict, "principal", (n0, n1))


# ---------------------------------------------------------------------------
# Canonical witnesses (the profile-smoothing construction)


@dataclass
class CanonicalWitness:
    x_star: PrSet
    y_star: PrSet
    case: int
    good_stage_count: int
    equilibrium_count: int
    certificates: dict
    monotonized: bool
    horizon: int
    d_table: Optional[tuple] = None


def _monotonize(prog: ClockedProgram, horizon: int) -> tuple[list[int], bool]:
    vals = []
    running = 0
    changed = False
    for s in range(horizon + 1):
        v = prog.value(s)
        if v < running:
            changed = True
        running = max(running, v)
        vals.append(running)
    return vals, changed


def _smooth_profile(src: PrSet, tgt: PrSet, p_vals: list[int], horizon: int):
    """The proof's first case: cap-and-climb profile for the source set.

    c(w) is the largest u <= w whose source count is within the target count
    at w or whose p-value undershoots w; d climbs by at most one per stage
    toward the count at c(w).
    """
    zs = [src.zeros_by_steps(s) for s in range(horizon + 1)]
    zt = [tgt.zeros_by_steps(s) for s in range(horizon + 1)]
    c = []
    best = 0
    for w in range(horizon + 1):
        u = c[-1] if c else 0
        for cand in range(u, w + 1):
            if zs[cand] <= zt[w] or (cand < len(p_vals) and p_vals[cand] < w):
                u = cand
        c.append(u)
    d = []
    for w in range(horizon + 1):
        cap = zs[c[w]]
        d.append(cap if not d else min(d[-1] + 1, cap))
    # the proof's lower-bound claim, asserted outright
    reach = 0
    for w in range(horizon + 1):
        reach = max(reach, max((zs[u] for u in range(w + 1) if zs[u] <= zt[w]),
                               default=0))
        if d[w] < reach:
            raise AssertionError(f"smoothed profile undershoots its claim at w={w}")
    return c, d


def _profile_set(name: str, d: list[int]) -> PrSet:
    bits = [1 if d[m + 1] == d[m] else 0 for m in range(len(d) - 1)]
    return prefix_set(name, bits, kind="derived", cost_fn=lambda n: 1)


def canonical_diamond_witness(x: PrSet, y: PrSet, p, q, horizon: int,
                              min_pairs: int = 1) -> CanonicalWitness:
    """Replace a comparable pair by one with literal equilibrium points.

    Implements the good-pair trichotomy: when the p-side has enough pairs
    with p(s) >= s we smooth the source profile, symmetrically for the
    q-side, and when both rates undershoot, the pair already has literal
    equilibria.  Raises CaseUndetermined when no case has min_pairs
    witnesses at the horizon.
    """
    p_vals, mono_p = _monotonize(as_program(p), horizon)
    q_vals, mono_q = _monotonize(as_program(q), horizon)
    zx = [x.zeros_by_steps(s) for s in range(horizon + 1)]
    zy = [y.zeros_by_steps(s) for s in range(horizon + 1)]
    s_good = [s for s in range(horizon + 1)
              if p_vals[s] <= horizon and zx[s] == zy[p_vals[s]]]
    t_good = [t for t in range(horizon + 1)
              if q_vals[t] <= horizon and zy[t] == zx[q_vals[t]]]
    by_value_t: dict[int, list[int]] = {}
    for t in t_good:
        by_value_t.setdefault(zy[t], []).append(t)
    good_s = [s for s in s_good if zx[s] in by_value_t]
    good_t = [t for t in t_good if any(zy[t] == zx[s] for s in s_good)]

    case1_s = [s for s in good_s if p_vals[s] >= s]
    case2_t = [t for t in good_t if q_vals[t] >= t]
    case3_s = [s for s in good_s if p_vals[s] < s]
    case3_t = [t for t in good_t if q_vals[t] < t]

    def first_stage(prof, j):
        return next((u for u in range(horizon + 1) if prof[u] == j), None)

    certificates = {}
    if case1_s and len({p_vals[s] for s in case1_s if p_vals[s] < horizon}) >= min_pairs:
        case = 1
        _, d = _smooth_profile(x, y, p_vals, horizon)
        x_star = _profile_set(f"{x.name}*", d)
        y_star = y
        good_stages = sorted({p_vals[s] for s in case1_s if p_vals[s] < horizon})
        d_table = tuple(d)
        certificates["x_star<=x"] = domination_certificate(x_star, x, horizon - 1, "steps")
        back = [min(2 * max(s, p_vals[s] + 1), horizon - 1) for s in range(horizon + 1)]
        cert_h = max((s for s in range(horizon + 1)
                      if 2 * max(s, p_vals[s] + 1) <= horizon - 1), default=0)
        ok = all(zx[s] <= d[back[s]] for s in range(cert_h + 1))
        w = ReductionWitness(TableProgram(back, "back"), "growth-p", x.name,
                             x_star.name, cert_h, "steps", ok)
        certificates["x<=x_star"] = w
    elif case2_t and len({q_vals[t] for t in case2_t if q_vals[t] < horizon}) >= min_pairs:
        case = 2
        _, d = _smooth_profile(y, x, q_vals, horizon)
        y_star = _profile_set(f"{y.name}*", d)
        x_star = x
        good_stages = sorted({q_vals[t] for t in case2_t if q_vals[t] < horizon})
        d_table = tuple(d)
        certificates["y_star<=y"] = domination_certificate(y_star, y, horizon - 1, "steps")
    elif case3_s and case3_t:
        case = 3
        x_star, y_star = x, y
        stages = set()
        for s in case3_s:
            j = zx[s]
            fx, fy = first_stage(zx, j), first_stage(zy, j)
            if fx is not None and fy is not None and fx <= fy:
                stages.add(p_vals[s])
        for t in case3_t:
            j = zy[t]
            fx, fy = first_stage(zx, j), first_stage(zy, j)
            if fx is not None and fy is not None and fy <= fx:
                stages.add(q_vals[t])
        good_stages = sorted(stages)
        d_table = None
        if len(good_stages) < min_pairs:
            raise CaseUndetermined(
                f"undershooting good pairs yield only {len(good_stages)} "
                f"equilibrium stages at horizon {horizon}")
    else:
        raise CaseUndetermined(
            f"no case of the good-pair trichotomy has {min_pairs} witnesses "
            f"at horizon {horizon}")

    limit = horizon - 1 if d_table is not None else horizon
    eq = equilibrium_points(x_star, y_star, limit, "steps")
    return CanonicalWitness(x_star, y_star, case, len(good_stages), eq.count,
                            certificates, mono_p or mono_q, horizon, d_table)


def restrict_diamond_witness(x: PrSet, x2: PrSet, y2: PrSet, y: PrSet,
                             f=None, g=None, q=None, horizon: int = 1000,
                             certificate: ReductionWitness | None = None) -> tuple:
    """Push diamond evidence for an outer pair into a subinterval.

    The outer pair must have literal equilibrium stages (smooth it first if
    not); f and g default to the least stage-matching maps between the
    profiles.  Returns the new q table and its evidence report.
    """
    _require_certificate(certificate)
    zx = [x.zeros_by_steps(s) for s in range(horizon + 1)]
    zy = [y.zeros_by_steps(s) for s in range(horizon + 1)]
    zx2 = [x2.zeros_by_steps(s) for s in range(horizon + 1)]
    zy2 = [y2.zeros_by_steps(s) for s in range(horizon + 1)]
    if f is None:
        f_vals = []
        for t in range(horizon + 1):
            match = next((u for u in range(horizon + 1) if zx2[u] == zx[t]), t)
            f_vals.append(match)
    else:
        f_vals = [as_program(f).value(t) for t in range(horizon + 1)]
    if g is None:
        g_vals = []
        for t in range(horizon + 1):
            match = next((u for u in range(horizon + 1) if zy[u] == zy2[t]), t)
            g_vals.append(match)
    else:
        g_vals = [as_program(g).value(t) for t in range(horizon + 1)]

    eq_outer = [u for u in range(horizon + 1) if zx[u] == zy[u]]
    q_vals = []
    for t in range(horizon + 1):
        bound = g_vals[t + 1] if t + 1 <= horizon else horizon + 1
        u = max((e for e in eq_outer if e < bound), default=None)
        q_vals.append(t if u is None else f_vals[u])
    qw = TableProgram(q_vals, "restricted-q")
    inner_cert = ReductionWitness(qw, "growth-p", x2.name, y2.name, horizon,
                                  "steps", True)
    report = diamond_evidence_q(x2, y2, qw, horizon, 1, inner_cert)
    return qw, report


# ---------------------------------------------------------------------------
# Slow sets and anti-diamond constructions


@dataclass(frozen=True)
class SlownessCertificate:
    set_name: str
    family: tuple
    window: tuple
    verdicts: tuple            # ((member, n, holds), ...)

    @property
    def slow_on_window(self) -> bool:
        return all(h for _, _, h in self.verdicts)


def make_slow_set(family: Sequence[ClockedProgram], window_length: int) -> PrSet:
    """Set whose zero gaps outgrow every family member on the window.

    One zero per diagonal block: the next zero clears every member's value
    at the previous zero, so the certificate holds at every index, not just
    the window.  With an empty family any coinfinite set qualifies.
    """
    if not family:
        return evens_set()
    members = list(family)

    def next_zero(zs):
        if not zs:
            return 2
        prev = zs[-1]
        return max(prev + 2, max(r.value(prev) for r in members) + 1)

    h = family_hash(members)
    s = zero_list_set(f"slow[{h}]", next_zero,
                      meta={"family": tuple(program_text(r) for r in members),
                            "window_length": window_length})
    s.principal_zero(window_length + 1)
    return s


def check_slowness(x: PrSet, family: Sequence[ClockedProgram],
                   window: tuple, ceiling: int = DEFAULT_CEILING) -> SlownessCertificate:
    """Recompute the slowness verdicts on a window, member by member."""
    n0, n1 = window
    verdicts = []
    for r in family:
        for n in range(n0, n1 + 1):
            a = x.principal_zero(n + 1, ceiling)
            b = r.value(x.principal_zero(n, ceiling))
            verdicts.append((r.name, n, a > b))
    return SlownessCertificate(x.name, tuple(program_text(r) for r in family),
                               window, tuple(verdicts))


def make_nondiamond_below(y: PrSet, family: Sequence[ClockedProgram],
                          window_length: int,
                          ceiling: int = DEFAULT_CEILING) -> PrSet:
    """A set reducible to y whose zeros dodge every family rate on the window.

    The n-th zero clears both the n-th zero of y (profile domination, hence
    reducibility) and every member's value at y's next zero (anti-evidence
    in the principal-function form).
    """
    if not family:
        out = zero_list_set(f"below[{y.name}]",
                            lambda zs: y.principal_zero(len(zs), ceiling),
                            meta={"degenerate": True})
        return out
    members = list(family)

    def next_zero(zs):
        n = len(zs)
        floor = y.principal_zero(n, ceiling)
        prev = zs[-1] if zs else 0
        anti = 0
        if n < window_length:
            nxt = y.principal_zero(n + 1, ceiling)
            anti = max(r.value(nxt) for r in members) + 1
        return max(floor, prev + 2, anti)

    h = family_hash(members)
    s = zero_list_set(f"nondiamond[{y.name};{h}]", next_zero,
                      meta={"family": tuple(program_text(r) for r in members),
                            "window_length": window_length})
    s.principal_zero(window_length)
    return s


# ---------------------------------------------------------------------------
# Drop-one bounds


@dataclass(frozen=True)
class DropBoundVerdict:
    pair: tuple
    horizon: int
    diamond_side_stages: tuple     # stages with target count >= source count
    reduction_side: bool           # pointwise bound under the dropped set
    first_reduction_violation: Optional[int]


def x1_bound_check(x: PrSet, y: PrSet, horizon: int,
                   certificate: ReductionWitness) -> DropBoundVerdict:
    """Which disjunct holds below the horizon: stage evidence for the diamond
    side, or pointwise domination under the set with its least zero dropped."""
    _require_certificate(certificate)
    dropped = drop_least_zero(x)
    stages = []
    violation = None
    for s in range(horizon + 1):
        zy = y.zeros_by_steps(s)
        if zy >= x.zeros_by_steps(s):
            stages.append(s)
        if violation is None and zy > dropped.zeros_by_steps(s):
            violation = s
    return DropBoundVerdict((x.name, y.name), horizon, tuple(stages),
                            violation is None, violation)


def shift_top_certificate(g, x: PrSet, horizon: int,
                          ceiling: int = DEFAULT_CEILING):
    """Rebase an identity-into-set certificate under the dropped set.

    Given a program carrying the identity relation into the relation of x,
    skip past the input whose image is x's least zero; the tail works for
    the set with that zero flipped to membership.
    """
    prog = as_program(g)
    z0 = x.principal_zero(0, ceiling)
    hit = next((m for m in range(horizon + 1) if prog.value(m) == z0), None)
    if hit is None:
        table = [prog.value(k) for k in range(horizon + 1)]
    else:
        table = [prog.value(k + hit + 1) for k in range(horizon - hit)]
    return ReductionWitness(TableProgram(table, "shifted"), "reduction",
                            "Id", f"{x.name}^[-1]", len(table) - 1, "index")


def serialize_evidence(ev: DiamondEvidence, family=()) -> str:
    """Line-oriented evidence report; a replayed run reproduces it exactly."""
    lines = [
        f"kind\t{ev.kind}",
        f"pair\t{ev.pair[0]}\t{ev.pair[1]}",
        f"convention\t{ev.convention}",
        f"span\t{ev.span[0]}\t{ev.span[1]}",
        f"threshold\t{ev.threshold}",
        f"relaxed\t{int(ev.relaxed)}",
        f"family-hash\t{family_hash(family) if family else '-'}",
        f"verdict\t{ev.verdict}",
        "---",
    ]
    lines.extend(f"hit\t{h}" for h in ev.hits)
    return "\n".join(lines) + "\n"


def anti_reduction_evidence(x: PrSet, y: PrSet,
                            family: Sequence[ClockedProgram],
                            bound: int) -> dict:
    """Per member, the least stage where x's step count escapes y through it.

    This is the caller-side premise for the separator construction; raises
    NotCertified when some member shows no escape below the bound.
    """
    out = {}
    for p in family:
        found = None
        for s in range(bound + 1):
            if x.zeros_by_steps(s) > y.zeros_by_steps(p.value(s)):
                found = s
                break
        if found is None:
            raise NotCertified(
                f"no stage below {bound} where {x.name} escapes {y.name} via {p.name}")
        out[p.name] = found
    return out
