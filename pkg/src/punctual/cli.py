"""Command-line front door.

Every command is a pure function of its arguments and input files: no
clock, environment, or randomness reaches the output, so two runs with the
same invocation produce byte-identical results.  Output is decimal,
tab-separated, LF-terminated.

Exit codes: 0 success, 1 misuse or precondition failure, 2 stage-budget
exhaustion, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import constructions, lattice, reductions, sets
from .errors import MisuseError, PunctualError, StageBudgetExhausted
from .pr_lang import TableProgram, resolve_program
from .reductions import (
    check_reduction_prefix,
    domination_certificate,
    load_witness,
    respect_normal_form,
    save_witness,
    surjectivize,
    synth_h_from_reduction,
    synth_reduction_from_h,
)
from .sets import SetRelation, parse_set


def load_family(path) -> list:
    """One canonical program text per line; # comments; order fixes indices."""
    members = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            members.append(resolve_program(line))
    return members


def _emit(out, text):
    out.write(text)


def cmd_profile(args, out) -> int:
    x = parse_set(args.descriptor)
    for s in range(args.horizon + 1):
        _emit(out, f"{s}\t{x.zeros_by_index(s)}\t{x.zeros_by_steps(s)}\n")
    return 0


def cmd_lattice(args, out) -> int:
    if args.lattice_op in ("join", "meet"):
        x, y = parse_set(args.a), parse_set(args.b)
        combine = sets.set_join if args.lattice_op == "join" else sets.set_meet
        z = combine(x, y)
        xn = sets.override_zero_member(x)
        yn = sets.override_zero_member(y)
        pick = max if args.lattice_op == "join" else min
        ok = all(z.zeros_by_index(s) == pick(xn.zeros_by_index(s),
                                             yn.zeros_by_index(s))
                 for s in range(args.horizon + 1))
        _emit(out, f"bits\t{z.prefix(args.horizon).as_str()}\n")
        _emit(out, f"profile-identity\t{'ok' if ok else 'fail'}\n")
        return 0 if ok else 1
    if args.lattice_op == "distrib":
        x, y, z = parse_set(args.a), parse_set(args.b), parse_set(args.c)
        lhs = sets.set_join(x, sets.set_meet(y, z))
        rhs = sets.set_meet(sets.set_join(x, y), sets.set_join(x, z))
        ok = all(lhs.bit(n) == rhs.bit(n) for n in range(args.horizon + 1))
        _emit(out, f"distributivity\t{'ok' if ok else 'fail'}\n")
        return 0 if ok else 1
    x, y = parse_set(args.a), parse_set(args.b)
    rep = lattice.equilibrium_points(x, y, args.horizon, args.convention)
    _emit(out, f"convention\t{rep.convention}\n")
    _emit(out, f"count\t{rep.count}\n")
    for s in rep.points:
        _emit(out, f"point\t{s}\n")
    return 0


def cmd_reduce(args, out) -> int:
    x, y = parse_set(args.a), parse_set(args.b)
    if args.reduce_op == "check":
        w = load_witness(args.witness)
        cex = check_reduction_prefix(w, SetRelation(x), SetRelation(y),
                                     args.horizon)
        if cex is None:
            _emit(out, "check\tok\n")
            return 0
        _emit(out, f"check\tfail\t{cex.describe()}\n")
        return 1
    if args.reduce_op == "synth-h":
        w = load_witness(args.witness)
        h = synth_h_from_reduction(w, x, y, args.horizon)
        _emit(out, reductions.serialize_witness(h))
        if args.out:
            save_witness(h, args.out)
        return 0
    if args.reduce_op == "synth-g":
        h = (load_witness(args.witness) if args.witness
             else domination_certificate(x, y, args.horizon))
        g = synth_reduction_from_h(x, y, h, args.horizon)
        _emit(out, reductions.serialize_witness(g))
        if args.out:
            save_witness(g, args.out)
        return 0
    op = surjectivize if args.reduce_op == "surjectivize" else respect_normal_form
    w = load_witness(args.witness)
    g = op(w, x, y, args.horizon)
    _emit(out, reductions.serialize_witness(g))
    if args.out:
        save_witness(g, args.out)
    return 0


def cmd_diamond(args, out) -> int:
    x, y = parse_set(args.a), parse_set(args.b)
    cert = domination_certificate(x, y, args.horizon,
                                  "index" if args.convention == "index" else "steps")
    if args.diamond_op == "evidence-q":
        q = (load_witness(args.q).program if args.q
             else resolve_program(args.q_program or "P[1,1]"))
        ev = lattice.diamond_evidence_q(x, y, q, args.horizon, args.k, cert,
                                        convention=args.convention,
                                        relaxed=args.relaxed)
    elif args.diamond_op == "evidence-r":
        r = (load_witness(args.q).program if args.q
             else resolve_program(args.q_program or "P[1,1]"))
        ev = lattice.diamond_evidence_r(x, y, r, (0, args.horizon), cert,
                                        k=args.k)
    elif args.diamond_op == "canonical":
        pw = TableProgram(
            [min(s, args.horizon) for s in range(args.horizon + 1)], "p")
        w = lattice.canonical_diamond_witness(x, y, pw, pw, args.horizon, args.k)
        _emit(out, f"case\t{w.case}\n")
        _emit(out, f"good-stages\t{w.good_stage_count}\n")
        _emit(out, f"equilibria\t{w.equilibrium_count}\n")
        return 0
    else:
        qw, report = lattice.restrict_diamond_witness(
            x, parse_set(args.c), parse_set(args.d), y, None, None, None,
            args.horizon, certificate=cert)
        ev = report
    _emit(out, f"kind\t{ev.kind}\n")
    _emit(out, f"convention\t{ev.convention}\n")
    _emit(out, f"count\t{ev.count}\n")
    _emit(out, f"verdict\t{ev.verdict}\n")
    for h in ev.hits:
        _emit(out, f"hit\t{h}\n")
    return 0


def cmd_slow(args, out) -> int:
    family = load_family(args.family) if args.family else []
    if args.slow_op == "make":
        s = lattice.make_slow_set(family, args.window)
        for n in range(args.window + 1):
            _emit(out, f"zero\t{n}\t{s.principal_zero(n)}\n")
        return 0
    x = parse_set(args.descriptor)
    cert = lattice.check_slowness(x, family, (0, args.window))
    _emit(out, f"slow-on-window\t{'yes' if cert.slow_on_window else 'no'}\n")
    for member, n, holds in cert.verdicts:
        _emit(out, f"verdict\t{member}\t{n}\t{'ok' if holds else 'fail'}\n")
    return 0


def cmd_construct(args, out) -> int:
    family = load_family(args.family) if args.family else []
    kind = args.construct_op
    if kind == "immune":
        result = constructions.construct_immune(family, args.max_stages,
                                                args.policy)
    elif kind == "incomparable":
        rel = parse_set(args.r or args.target)
        result = constructions.construct_incomparable(
            SetRelation(rel), family, args.max_stages, args.policy,
            relation_dsl=rel.dsl)
    elif kind == "antichain":
        results = constructions.construct_antichain(args.count, family,
                                                    args.max_stages, args.policy)
        for i, r in enumerate(results):
            path = f"{args.out}.{i}" if args.out else None
            if path:
                constructions.save_trace(r, path)
                _emit(out, f"trace\t{path}\n")
            _emit(out, f"verdict\t{i}\t{r.trace.footer[0][1]}\n")
        return 0
    elif kind == "dense":
        x, z = parse_set(args.x), parse_set(args.z)
        f = load_witness(args.witness) if args.witness else None
        result = constructions.construct_dense(x, z, f, family,
                                               args.max_stages, args.policy)
    elif kind == "dense-incomparable":
        x, t, z = parse_set(args.x), parse_set(args.t), parse_set(args.z)
        certs = {"x<=t": domination_certificate(x, t, args.max_stages),
                 "t<=z": domination_certificate(t, z, args.max_stages)}
        result = constructions.construct_dense_incomparable(
            x, t, z, certs, family, args.max_stages, args.policy)
    elif kind == "join-split":
        result = constructions.construct_join_split(
            parse_set(args.target or args.z), family, args.max_stages,
            args.policy)
    elif kind == "meet-split":
        result = constructions.construct_meet_split(
            parse_set(args.target or args.z), family, args.max_stages,
            args.policy)
    elif kind == "diamond":
        x, z = parse_set(args.x), parse_set(args.z)
        result = constructions.construct_diamond(x, z, family, args.max_stages,
                                                 args.policy,
                                                 min_equilibria=args.k)
    elif kind == "separator":
        x, y = parse_set(args.x), parse_set(args.y)
        anti = lattice.anti_reduction_evidence(
            sets.drop_least_zero(x), y, family, args.max_stages)
        result = constructions.construct_separator(x, y, family,
                                                   args.max_stages,
                                                   anti_certificate=anti)
    else:
        raise MisuseError(f"unknown construction {kind!r}")
    if args.out:
        constructions.save_trace(result, args.out)
        _emit(out, f"trace\t{args.out}\n")
    verdict = result.trace.footer[0][1]
    _emit(out, f"verdict\t{verdict}\n")
    for name in result.outputs:
        _emit(out, f"output\t{name}\n")
    return 0 if verdict == "ok" else 1


def cmd_verify(args, out) -> int:
    ok, msg = constructions.verify_trace_file(args.trace)
    _emit(out, f"verify\t{'ok' if ok else 'fail'}\t{msg}\n")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="punctual",
                                description="clocked sets, reducibility "
                                            "calculus, and diagonalization runs")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, horizon=True):
        if horizon:
            sp.add_argument("--horizon", type=int, default=100)
        sp.add_argument("--convention", choices=["index", "steps"],
                        default="index")
        sp.add_argument("--out")

    sp = sub.add_parser("profile", help="zero-count profile in both conventions")
    sp.add_argument("descriptor")
    common(sp)
    sp.set_defaults(fn=cmd_profile)

    sp = sub.add_parser("lattice", help="join/meet/distributivity/equilibrium")
    sp.add_argument("lattice_op",
                    choices=["join", "meet", "distrib", "equilibrium"])
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("c", nargs="?")
    common(sp)
    sp.set_defaults(fn=cmd_lattice)

    sp = sub.add_parser("reduce", help="verify and transform reduction witnesses")
    sp.add_argument("reduce_op",
                    choices=["check", "synth-h", "synth-g", "surjectivize",
                             "respect"])
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--witness")
    common(sp)
    sp.set_defaults(fn=cmd_reduce)

    sp = sub.add_parser("diamond", help="diamond-interval evidence")
    sp.add_argument("diamond_op",
                    choices=["evidence-q", "evidence-r", "canonical", "restrict"])
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("c", nargs="?")
    sp.add_argument("d", nargs="?")
    sp.add_argument("--q", help="witness table file for the stage map")
    sp.add_argument("--q-program", help="program text for the stage map")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--relaxed", action="store_true")
    common(sp)
    sp.set_defaults(fn=cmd_diamond)

    sp = sub.add_parser("slow", help="slow sets and their certificates")
    sp.add_argument("slow_op", choices=["make", "check"])
    sp.add_argument("descriptor", nargs="?")
    sp.add_argument("--family")
    sp.add_argument("--window", type=int, default=10)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_slow)

    sp = sub.add_parser("construct", help="run a diagonalization construction")
    sp.add_argument("construct_op",
                    choices=["immune", "incomparable", "antichain", "dense",
                             "dense-incomparable", "join-split", "meet-split",
                             "diamond", "separator"])
    sp.add_argument("target", nargs="?",
                    help="input descriptor for the split constructions")
    sp.add_argument("--z")
    sp.add_argument("--family")
    sp.add_argument("--max-stages", type=int, default=500)
    sp.add_argument("--policy", choices=["once", "round-robin"], default="once")
    sp.add_argument("--x")
    sp.add_argument("--y")
    sp.add_argument("--t")
    sp.add_argument("--r", help="relation descriptor for incomparability")
    sp.add_argument("--count", type=int, default=2)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--witness")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_construct)

    sp = sub.add_parser("verify", help="replay a trace file and re-check it")
    sp.add_argument("trace")
    sp.set_defaults(fn=cmd_verify)
    return p


def _echo_config(args, out):
    fields = {k: v for k, v in sorted(vars(args).items()) if k != "fn"}
    rendered = " ".join(f"{k}={v}" for k, v in fields.items())
    out.write(f"# config {rendered}\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _echo_config(args, sys.stdout)
        code = args.fn(args, sys.stdout)
    except StageBudgetExhausted as exc:
        sys.stderr.write(f"stage budget exhausted: {exc}\n")
        return 2
    except MisuseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 3
    except PunctualError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
