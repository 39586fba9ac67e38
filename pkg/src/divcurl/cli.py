"""Command-line front-end.

Subcommands: decompose, extend, estimate, verify, genfield, study, probe.
Every report is JSON with schema_version "1" and a config echo; grids and
cube tables are CSV/binary as defined by the owning modules.  Exit codes:
0 success, 1 usage or config error, 2 invariant violation, 3 numerical
failure.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    pass


class InvariantError(Exception):
    pass


def _domain_from_args(args):
    from . import domains

    if getattr(args, "descriptor", None):
        if not os.path.exists(args.descriptor):
            raise ConfigError(f"descriptor file not found: {args.descriptor}")
        return domains.load_descriptor(args.descriptor)
    tag = getattr(args, "gallery", None)
    if not tag:
        raise ConfigError("one of --gallery or --descriptor is required")
    params = {}
    for item in getattr(args, "param", None) or []:
        if "=" not in item:
            raise ConfigError(f"bad --param (expected key=value): {item}")
        k, v = item.split("=", 1)
        try:
            params[k] = int(v)
        except ValueError:
            try:
                params[k] = float(v)
            except ValueError:
                params[k] = v
    try:
        return domains.gallery(tag, **params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"unknown gallery tag: {tag} ({exc})") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args):
    out = getattr(args, "out", None) or os.environ.get("DIVCURL_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _apply_threads(args):
    t = getattr(args, "threads", None)
    if t is None:
        return
    if t < 1:
        raise ConfigError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(t)


def _echo_config(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_report(path, command, args, payload):
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "config": _echo_config(args)}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return doc


def cmd_decompose(args):
    from .cubes import root_for_domain
    from . import whitney
    from .whitney import whitney_decompose, select_w3, verify_invariants

    dom = _domain_from_args(args)
    out = _out_dir(args)
    root = root_for_domain(dom)
    w1 = whitney_decompose(dom, "interior", args.max_level, root=root)
    w2 = whitney_decompose(dom, "complement", args.max_level, root=root)
    w3 = select_w3(w2, dom.epsilon, dom.delta)
    checks = []
    for w, side in ((w1, "interior"), (w2, "complement")):
        for c in verify_invariants(w):
            c["detail"]["side"] = side
            checks.append(c)
    whitney.dump_csv(w1, os.path.join(out, f"whitney_interior_{dom.tag}.csv"))
    whitney.dump_csv(w2, os.path.join(out, f"whitney_complement_{dom.tag}.csv"), w3_positions=w3)
    payload = {
        "domain": dom.descriptor(),
        "interior": whitney.summary(w1),
        "complement": whitney.summary(w2),
        "w3_count": len(w3),
        "checks": checks,
        "violations": sum(1 for c in checks if not c["passed"]),
    }
    _write_report(os.path.join(out, f"decompose_{dom.tag}.json"), "decompose", args, payload)
    if payload["violations"]:
        tags = sorted({c["tag"] for c in checks if not c["passed"]})
        raise InvariantError("invariant violation: " + ", ".join(tags))
    print(f"decompose {dom.tag}: {len(w1)} interior, {len(w2)} complement, {len(w3)} small")
    return EXIT_OK


def cmd_extend(args):
    from . import fields as field_calculus
    from .extension import extend, global_report, sampled_cube_reports

    dom = _domain_from_args(args)
    out = _out_dir(args)
    prefix = args.field
    if not os.path.exists(prefix + ".json"):
        raise ConfigError(f"field not found: {prefix}.json")
    try:
        v = field_calculus.load_field(prefix, dom)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    asm = extend(v, dom, args.max_level)
    rep = global_report(asm, p=args.p)
    cubes = sampled_cube_reports(asm, p=args.p, limit=args.cube_limit)
    ev_prefix = os.path.join(out, f"ev_{dom.tag}")
    field_calculus.save_field(asm.Ev, ev_prefix)
    payload = {
        "domain": dom.descriptor(),
        "assembly": asm.report,
        "global": rep,
        "per_cube": cubes,
    }
    _write_report(os.path.join(out, f"extend_{dom.tag}.json"), "extend", args, payload)
    print(
        f"extend {dom.tag}: corol1={rep['corol1_ratio']:.6g} "
        f"corol2={rep['corol2_ratio']:.6g} -> {ev_prefix}.bin"
    )
    return EXIT_OK


def cmd_estimate(args):
    from . import fields as field_calculus
    from .lab import build_lab_basis, estimate_constant

    if args.samples < 1:
        raise ConfigError("samples must be >= 1")
    dom = _domain_from_args(args)
    out = _out_dir(args)
    p = math.inf if args.p == "inf" else float(args.p)
    bc = args.bc.replace("-", "_")
    h = args.h if args.h else 1.0 / 128.0
    grid = field_calculus.build_grid(dom, h, pad=2.0 * h)
    basis = build_lab_basis(dom, grid, bc, kmax=args.kmax)
    est = estimate_constant(
        dom,
        args.inequality,
        bc,
        p=p,
        samples=args.samples,
        seed=args.seed,
        ascent_iters=args.ascent_iters,
        basis=basis,
    )
    payload = {"domain": dom.descriptor(), "estimate": est.to_dict()}
    _write_report(
        os.path.join(out, f"estimate_{args.inequality}_{dom.tag}.json"),
        "estimate",
        args,
        payload,
    )
    maximizer = field_calculus.GridField(
        grid=grid,
        values=basis.field(np.asarray(est.maximizer_coeffs)),
        meta={"kind": "maximizer", "inequality": args.inequality, "bc": bc},
    )
    field_calculus.save_field(
        maximizer, os.path.join(out, f"maximizer_{args.inequality}_{dom.tag}")
    )
    print(f"estimate {dom.tag} {args.inequality} p={args.p}: max_ratio={est.max_ratio:.6g}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_suite

    dom = _domain_from_args(args)
    out = _out_dir(args)
    report = run_suite(
        dom,
        args.max_level,
        seed=args.seed,
        inject_fault=args.inject_fault,
        with_fields=not args.skip_fields,
    )
    payload = report.to_dict()
    _write_report(os.path.join(out, f"verify_{dom.tag}.json"), "verify", args, payload)
    for c in report.checks:
        print(f"{c['tag']}: {'pass' if c['passed'] else 'FAIL'}")
    if not report.passed:
        raise InvariantError("invariant violation: " + ", ".join(report.failing_tags()))
    return EXIT_OK


def cmd_genfield(args):
    from . import fields as field_calculus

    dom = _domain_from_args(args)
    out = _out_dir(args)
    grid = field_calculus.build_grid(dom, args.h)
    v = field_calculus.generate_test_field(
        dom,
        grid,
        args.bc.replace("-", "_"),
        seed=args.seed,
        modes=args.modes,
        collar_width=args.collar_width,
    )
    prefix = args.prefix or os.path.join(out, f"field_{dom.tag}_{args.bc}_{args.seed}")
    field_calculus.save_field(v, prefix)
    print(f"genfield {dom.tag}: {prefix}.bin")
    return EXIT_OK


def cmd_study(args):
    from .lab import koch_level_study

    out = _out_dir(args)
    levels = list(range(args.min_level, args.max_level + 1))
    ps = [float(x) for x in args.p.split(",")]
    bcs = [b.replace("-", "_") for b in args.bc.split(",")]
    path = args.csv or os.path.join(out, "koch_study.csv")
    rows = koch_level_study(
        levels,
        bcs,
        ps,
        path,
        samples=args.samples,
        seed=args.seed,
        kmax=args.kmax,
        ascent_iters=args.ascent_iters,
    )
    bad = [r for r in rows if not np.isfinite(r["max_ratio"])]
    if bad:
        raise RuntimeError(f"non-finite ratio at level {bad[0]['level']}")
    print(f"study: {len(rows)} rows -> {path}")
    return EXIT_OK


def cmd_probe(args):
    from .probe import epsilon_delta_probe

    dom = _domain_from_args(args)
    out = _out_dir(args)
    rep = epsilon_delta_probe(dom, pair_count=args.pairs, seed=args.seed, max_level=args.max_level)
    payload = {"domain": dom.descriptor(), "probe": rep.to_dict()}
    _write_report(os.path.join(out, f"probe_{dom.tag}.json"), "probe", args, payload)
    print(
        f"probe {dom.tag}: worst_epsilon={rep.worst_epsilon:.6g} "
        f"shipped={rep.shipped_epsilon:.6g} failing={rep.failing_pairs}"
    )
    return EXIT_OK


def _add_domain_args(sp):
    sp.add_argument("--gallery", help="gallery tag (unit_square, l_shape, ...)")
    sp.add_argument("--param", action="append", help="gallery parameter key=value")
    sp.add_argument("--descriptor", help="domain descriptor JSON path")


def build_parser():
    ap = argparse.ArgumentParser(prog="divcurl", description=__doc__)
    ap.add_argument("--threads", type=int, help="cap worker threads")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="dump Whitney cubes and invariant checks")
    _add_domain_args(d)
    d.add_argument("--max-level", type=int, default=8)
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    e = sub.add_parser("extend", help="extend a stored field across the boundary")
    _add_domain_args(e)
    e.add_argument("--field", required=True, help="field path prefix (no extension)")
    e.add_argument("--max-level", type=int, default=8)
    e.add_argument("--p", type=float, default=2.0)
    e.add_argument("--cube-limit", type=int, default=200)
    e.add_argument("--out")
    e.set_defaults(func=cmd_extend)

    s = sub.add_parser("estimate", help="estimate an inequality constant")
    _add_domain_args(s)
    s.add_argument("--inequality", choices=["friedrichs", "gaffney"], required=True)
    s.add_argument("--bc", choices=["normal-zero", "tangential-zero", "none"], default="normal-zero")
    s.add_argument("--p", default="2")
    s.add_argument("--samples", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--h", type=float)
    s.add_argument("--kmax", type=int, default=3)
    s.add_argument("--ascent-iters", type=int, default=60)
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", help="run the full invariant suite")
    _add_domain_args(v)
    v.add_argument("--max-level", type=int, default=6)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--inject-fault", choices=["w3"], help="test hook: corrupt one cube")
    v.add_argument("--skip-fields", action="store_true")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("genfield", help="generate a boundary-adapted test field")
    _add_domain_args(g)
    g.add_argument("--h", type=float, required=True)
    g.add_argument("--bc", choices=["normal-zero", "tangential-zero", "none"], default="none")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--modes", type=int, default=12)
    g.add_argument("--collar-width", type=float, help="boundary cutoff width (default scales with the domain)")
    g.add_argument("--prefix")
    g.add_argument("--out")
    g.set_defaults(func=cmd_genfield)

    st = sub.add_parser("study", help="ratio-vs-prefractal-level CSV")
    st.add_argument("--min-level", type=int, default=0)
    st.add_argument("--max-level", type=int, default=4)
    st.add_argument("--p", default="1.5,2,3")
    st.add_argument("--bc", default="normal-zero,tangential-zero")
    st.add_argument("--samples", type=int, default=8)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--kmax", type=int, default=2)
    st.add_argument("--ascent-iters", type=int, default=24)
    st.add_argument("--csv")
    st.add_argument("--out")
    st.set_defaults(func=cmd_study)

    pr = sub.add_parser("probe", help="empirical arc-condition probe")
    _add_domain_args(pr)
    pr.add_argument("--pairs", type=int, default=64)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--max-level", type=int, default=6)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_probe)

    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        _apply_threads(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
