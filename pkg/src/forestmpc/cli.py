"""Command-line front end: instance generation, solving, verification, and
benchmark sweeps emitting stats for offline plotting.

Flag precedence is flag > config file > default; the config file is JSON
({"delta": .., "c_loc": .., "machine_count": .., "bandwidth_words": ..,
"strict_mode": ..}) named by --config or the FORESTMPC_CONFIG env var.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .forest import (Forest, InvalidSpec, diameter, generate,
                     oracle_components, default_thresholds)
from .components import root_forest, solve_cc
from .lcl import UNSOLVABLE, LclProblem, lcl_solver, verify_lcl
from .maxid import maxid_solver
from .problems import bundled_problem
from .substrate import MachineConfig, MpcSim

GEN_PARAMS = ("length", "leaves", "handle", "bristles", "spine", "legs", "n",
              "components", "degree", "depth", "diameter")


def _load_config(path_flag):
    path = path_flag or os.environ.get("FORESTMPC_CONFIG")
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _setting(args, cfg, name, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in cfg:
        return cfg[name]
    return default


def _read_forest(path):
    with open(path) as fh:
        text = fh.read()
    return Forest.from_text(text)


def _thresholds(args, cfg, n, delta):
    light, _, sub = default_thresholds(max(n, 2), delta)
    light = _setting(args, cfg, "light_threshold", light)
    full_v = _setting(args, cfg, "full_threshold", None)
    sub = _setting(args, cfg, "subtree_threshold", sub)
    return int(light), (int(full_v) if full_v is not None else None), int(sub)


def cmd_gen(args):
    params = {k: getattr(args, k) for k in GEN_PARAMS if getattr(args, k, None) is not None}
    forest = generate(args.kind, seed=args.seed or 0, **params)
    text = forest.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args):
    cfg = _load_config(args.config)
    forest = _read_forest(args.input)
    delta = float(_setting(args, cfg, "delta", 0.5))
    c_loc = float(_setting(args, cfg, "c_loc", 4.0))
    strict = bool(_setting(args, cfg, "strict_memory", False))
    light, full, sub = _thresholds(args, cfg, forest.n, delta)
    config = MachineConfig(
        n=max(forest.n, 1), delta=delta, c_loc=c_loc, strict_mode=strict,
        machine_count=cfg.get("machine_count"),
        bandwidth_words=cfg.get("bandwidth_words"))
    config.validate_for_input(forest.n, forest.m)
    sim = MpcSim(config, forest.nodes())
    c_iter = int(_setting(args, cfg, "iters_coeff", 4))
    verified = True
    if args.algo == "maxid":
        dhat = args.dhat or max(diameter(forest)[1], 2)
        labels = maxid_solver(forest, dhat, light=light, full=full, sim=sim,
                              c_iter=c_iter)
        lines = [f"{v} {labels[v]}" for v in sorted(labels)]
        if args.verify:
            verified = labels == oracle_components(forest)
    elif args.algo == "cc":
        labels, sim = solve_cc(forest, delta=delta, light=light, full=full,
                               dhat=args.dhat, c_iter=c_iter, sim=sim,
                               force_fallback=args.force_fallback)
        lines = [f"{v} {labels[v]}" for v in sorted(labels)]
        if args.verify:
            verified = labels == oracle_components(forest)
    elif args.algo == "root":
        ori, sim = root_forest(forest, delta=delta, light=light, full=full,
                               dhat=args.dhat, c_iter=c_iter, sim=sim)
        lines = [f"{v} {ori.parent[v] if ori.parent[v] is not None else '-'}"
                 for v in sorted(ori.parent)]
        if args.verify:
            try:
                ori.validate()
            except AssertionError:
                verified = False
    elif args.algo == "lcl":
        if not args.problem:
            print("--problem required for --algo lcl", file=sys.stderr)
            return 2
        problem = _load_problem(args.problem)
        res, sim = lcl_solver(forest, problem, subtree_cap=sub, delta=delta,
                              sim=sim)
        if res == UNSOLVABLE:
            lines = [UNSOLVABLE]
        else:
            lines = [f"{v} {forest.adj[v][p - 1]} {res.label(v, p)}"
                     for v in sorted(forest.adj)
                     for p in range(1, forest.degree(v) + 1)]
            if args.verify:
                ok, _ = verify_lcl(forest, problem, res)
                verified = ok
    else:
        print(f"unknown algo {args.algo}", file=sys.stderr)
        return 2
    _emit(lines, args.out)
    if args.stats:
        stats = sim.stats_json()
        stats["verified"] = verified if args.verify else None
        with open(args.stats, "w") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if verified else 1


def _load_problem(spec):
    if os.path.exists(spec):
        with open(spec) as fh:
            return LclProblem.from_json(json.load(fh))
    name, _, arg = spec.partition(":")
    return bundled_problem(name, int(arg) if arg else 4)


def cmd_verify(args):
    forest = _read_forest(args.input)
    with open(args.labels) as fh:
        lines = [l.strip() for l in fh if l.strip()]
    if args.algo in ("maxid", "cc"):
        got = {}
        for line in lines:
            v, lab = line.split()
            got[int(v)] = int(lab)
        ok = got == oracle_components(forest)
    elif args.algo == "root":
        parent = {}
        for line in lines:
            v, p = line.split()
            parent[int(v)] = None if p == "-" else int(p)
        ok = _check_orientation(forest, parent)
    elif args.algo == "lcl":
        problem = _load_problem(args.problem)
        if lines == [UNSOLVABLE]:
            ok = False
        else:
            labels = {}
            for line in lines:
                v, u, lab = line.split()
                v, u = int(v), int(u)
                labels[(v, forest.port_of(v, u))] = lab
            ok, _ = verify_lcl(forest, problem, labels)
    else:
        print(f"unknown algo {args.algo}", file=sys.stderr)
        return 2
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _check_orientation(forest, parent):
    roots = [v for v, p in parent.items() if p is None]
    if len(roots) != len(forest.component_lists()):
        return False
    for v, p in parent.items():
        if p is not None and p not in forest.adj[v]:
            return False
    for v in parent:
        seen = {v}
        cur = v
        while parent[cur] is not None:
            cur = parent[cur]
            if cur in seen:
                return False
            seen.add(cur)
    return True


def _bench_instance(family, n, d, seed):
    if family == "path":
        return generate("path", length=max(d, 1))
    if family == "caterpillar":
        return generate("caterpillar", spine=max(d - 1, 1), n=n)
    if family == "random_forest":
        return generate("random_forest", n=n, components=1, seed=seed)
    if family == "st_path_family":
        return generate("st_path_family", diameter=d, components=max(n, 1), seed=seed)
    raise InvalidSpec(f"unknown bench family {family!r}")


def cmd_bench(args):
    cfg = _load_config(args.config)
    delta = float(_setting(args, cfg, "delta", 0.5))
    rows = ["n,D,rounds,peak_local,peak_global,messages"]
    points = []
    for part in args.sweep.split(","):
        ns, _, ds = part.partition(":")
        points.append((int(ns), int(ds)))
    for n, d in points:
        for rep in range(args.reps):
            forest = _bench_instance(args.family, n, d, seed=(args.seed or 0) + rep)
            light, full, sub = _thresholds(args, cfg, forest.n, delta)
            config = MachineConfig(n=max(forest.n, 1), delta=delta)
            sim = MpcSim(config, forest.nodes())
            measured_d = diameter(forest)[1]
            if args.algo == "maxid":
                maxid_solver(forest, args.dhat or max(measured_d, 2),
                             light=light, full=full, sim=sim)
            elif args.algo == "cc":
                solve_cc(forest, delta=delta, light=light, full=full,
                         dhat=args.dhat, sim=sim)
            elif args.algo == "root":
                root_forest(forest, delta=delta, light=light, full=full,
                            dhat=args.dhat, sim=sim)
            elif args.algo == "lcl":
                problem = _load_problem(args.problem or "mis:8")
                lcl_solver(forest, problem, subtree_cap=sub, delta=delta, sim=sim)
            else:
                raise InvalidSpec(f"unknown algo {args.algo}")
            led = sim.ledger
            rows.append(f"{forest.n},{measured_d},{sim.stats.rounds_elapsed},"
                        f"{led.peak_local},{led.peak_global},"
                        f"{sim.stats.messages_total}")
    _emit(rows, args.out)
    return 0


def _add_shared(p):
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--c-loc", dest="c_loc", type=float, default=None)
    p.add_argument("--light-threshold", dest="light_threshold", type=int, default=None)
    p.add_argument("--full-threshold", dest="full_threshold", type=int, default=None)
    p.add_argument("--subtree-threshold", dest="subtree_threshold", type=int, default=None)
    p.add_argument("--dhat", type=int, default=None)
    p.add_argument("--iters-coeff", dest="iters_coeff", type=int, default=None)
    p.add_argument("--strict-memory", dest="strict_memory", action="store_const",
                   const=True, default=None)
    p.add_argument("--stats", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="forestmpc")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a forest instance")
    g.add_argument("kind")
    for k in GEN_PARAMS:
        g.add_argument(f"--{k}", type=int, default=None)
    _add_shared(g)
    g.set_defaults(fn=cmd_gen)

    s = sub.add_parser("solve", help="run an algorithm on an instance")
    s.add_argument("input")
    s.add_argument("--algo", required=True, choices=["maxid", "cc", "root", "lcl"])
    s.add_argument("--problem", default=None)
    s.add_argument("--force-fallback", action="store_true")
    _add_shared(s)
    s.set_defaults(fn=cmd_solve)

    v = sub.add_parser("verify", help="check an output file against an instance")
    v.add_argument("input")
    v.add_argument("--algo", required=True, choices=["maxid", "cc", "root", "lcl"])
    v.add_argument("--labels", required=True)
    v.add_argument("--problem", default=None)
    _add_shared(v)
    v.set_defaults(fn=cmd_verify)

    b = sub.add_parser("bench", help="sweep instances and emit a CSV")
    b.add_argument("--algo", required=True, choices=["maxid", "cc", "root", "lcl"])
    b.add_argument("--family", required=True)
    b.add_argument("--sweep", required=True, help="comma list of n:D points")
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--problem", default=None)
    _add_shared(b)
    b.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidSpec, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
