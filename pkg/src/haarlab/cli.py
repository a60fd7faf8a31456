"""Command-line front-end: ``haarlab <command> [options]``.

Commands: rd-curve, converge, check, transport, group-info. CSV goes to
``--out`` (stdout by default); JSON reports go to ``--json`` when given.
Exit codes: 0 success, 1 failed check, 2 configuration error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from .circle import NEG_TOL, parse_fourier
from .convergence import (
    ONE_BIT,
    decay_bound_check,
    detect_obstruction,
    fit_rate,
    one_bit_floor_check,
    run_series,
    run_series_fourier,
)
from .distortion import d_crit, parse_profile, so2_spec, transport_distance
from .errors import (
    HaarlabError,
    InsufficientData,
    NoConvergence,
    PreconditionFailed,
    QuadratureFailure,
)
from .groups import coset_analysis, group_from_json, parse_group, subgroup_closure
from .measures import (
    GroupDistribution,
    compensation_identity_residual,
    density,
    divergence,
    haar_check,
    point_mass,
    total_variation,
    uniform,
    uniform_on,
)
from .ratedist import parse_beta_grid, rd_curve, sandwich_check

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
CHECKS = ("haar", "pinsker", "compensation", "sandwich", "decay_bound", "one_bit")
DEFAULT_CHECK_GROUPS = ("cyclic:6", "cyclic:8", "dihedral:4", "symmetric:3", "cube_rotations")
DEFAULT_BETAS = "log:-20..0:40"


class ConfigError(Exception):
    pass


# -- formatting ---------------------------------------------------------------

def fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


def to_csv(columns):
    names = list(columns)
    rows = zip(*(columns[k] for k in names))
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _emit(text, path, fallback=None):
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        (fallback or sys.stdout).write(text)


# -- spec parsing -------------------------------------------------------------

def load_group(text):
    if text is None:
        raise ConfigError("--group is required")
    if text.startswith("@"):
        with open(text[1:]) as fh:
            return group_from_json(fh.read())
    return parse_group(text)


def parse_dist(text, G, rng=None):
    """Distribution spec: ``uniform``, ``uniform-on:1,3,5``, ``point:g``,
    ``random``, ``{"mass": [...]}`` or a comma-separated mass vector."""
    text = (text or "uniform").strip()
    if text == "uniform":
        return uniform(G)
    if text.startswith("uniform-on:"):
        return uniform_on(G, [int(t) for t in text[11:].split(",")])
    if text.startswith("point:"):
        return point_mass(G, int(text[6:]))
    if text == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        return GroupDistribution(G, rng.dirichlet(np.ones(G.order)))
    if text.startswith("{"):
        return GroupDistribution(G, json.loads(text)["mass"])
    return GroupDistribution(G, [float(t) for t in text.split(",")])


def default_profile(G):
    return "cosine" if G.cyclic else "hamming"


# -- commands -----------------------------------------------------------------

def cmd_rd_curve(args):
    betas = parse_beta_grid(args.betas or DEFAULT_BETAS)
    if args.group in ("so2", "SO2", "circle"):
        spec, P = so2_spec(), None
        if args.source not in (None, "uniform"):
            raise ConfigError("the SO(2) curve is available for the uniform source only")
    else:
        G = load_group(args.group)
        spec = parse_profile(args.profile or default_profile(G), G)
        P = parse_dist(args.source, G, np.random.default_rng(args.seed))
    curve = rd_curve(P, spec, betas, closed_form=not args.ba)
    rate_name, scale, unit = ("rate_bits", 1.0 / ONE_BIT, "bits") if args.bits else ("rate_nats", 1.0, "nats")
    cols = {"beta": curve.betas, "delta": curve.deltas, rate_name: curve.rates * scale}
    _emit(to_csv(cols), args.out)
    if args.figure:
        from .figures import rd_figure

        rd_figure(curve.deltas, curve.rates * scale, args.figure, unit=unit, d_crit=d_crit(spec))
    if args.json:
        _emit(dump_json({"points": len(curve.points), "source": curve.source,
                         "convex": curve.is_convex()}), args.json)
    return EXIT_OK


def cmd_converge(args):
    report = {}
    if args.fourier:
        A = parse_fourier(args.fourier)
        series = run_series_fourier(A, args.n)
        cols = {"n": series.n_values, "divergence_nats": series.divergence,
                "divergence_quadratic": series.quadratic}
        report["fourier"] = {"amps": list(A.amps), "phases": list(A.phases)}
    else:
        G = load_group(args.group)
        P = parse_dist(args.dist, G, np.random.default_rng(args.seed))
        spec = parse_profile(args.profile, G) if args.profile else None
        report["obstruction"] = detect_obstruction(P).to_dict()
        series = run_series(P, args.n, spec)
        cols = series.columns()
        c = float(np.min(density(P)))
        if c > 0:
            d1 = series.divergence[0]
            cols["bound_(1-c)^(n-1)"] = np.array([(1 - min(c, 1.0)) ** (n - 1) * d1 for n in series.n_values])
        report["c"] = c
    try:
        report["fit"] = fit_rate(series, burn_in=args.burn_in)
    except InsufficientData as exc:
        report["fit"] = {"error": str(exc)}
    if args.bits:
        cols = {(k.replace("nats", "bits") if k == "divergence_nats" else k):
                (v / ONE_BIT if k.startswith("divergence") else v) for k, v in cols.items()}
    _emit(to_csv(cols), args.out)
    if args.figure:
        from .figures import series_figure

        series_figure(cols, args.figure)
    _emit(dump_json(report), args.json, sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def _random_mass(rng, n, alpha=1.0):
    return rng.dirichlet(np.full(n, alpha))


def _run_check(name, G, rng, instances, extra):
    """Run one named check over ``instances`` random cases; return (passed, failed, detail)."""
    passed = failed = 0
    detail = {}
    cases = [GroupDistribution(G, _random_mass(rng, G.order)) for _ in range(instances)] + extra
    if name == "haar":
        for P in cases + [uniform(G)]:
            r = haar_check(P)
            expect = bool(np.allclose(P.mass, 1.0 / G.order, atol=1e-10, rtol=0))
            ok = r["equivalent"] and r["is_haar"] == expect
            passed, failed = passed + ok, failed + (not ok)
    elif name == "pinsker":
        U = uniform(G)
        for P in cases:
            ok = 0.5 * total_variation(P, U) ** 2 <= divergence(P, U) * (1 + 1e-9) + 1e-15
            passed, failed = passed + ok, failed + (not ok)
    elif name == "compensation":
        worst = 0.0
        for P in cases:
            fam = [P] + [GroupDistribution(G, _random_mass(rng, G.order)) for _ in range(2)]
            res = compensation_identity_residual(fam, _random_mass(rng, 3))
            worst = max(worst, res)
            ok = res <= 1e-10
            passed, failed = passed + ok, failed + (not ok)
        detail["max_residual"] = worst
    elif name == "sandwich":
        spec = parse_profile(default_profile(G), G)
        betas = parse_beta_grid("log:-10..-0.01:8")
        n_viol = 0
        for P in cases:
            r = sandwich_check(P, spec, betas)
            n_viol += len(r["violations"])
            ok = not r["violations"]
            passed, failed = passed + ok, failed + (not ok)
        detail["violations"] = n_viol
    elif name == "decay_bound":
        worst = math.inf
        for P in cases:
            if np.min(P.mass) <= 0:
                continue
            r = decay_bound_check(P, 20)
            worst = min(worst, float(np.min(r["margin"])))
            passed, failed = passed + r["holds"], failed + (not r["holds"])
        detail["min_margin"] = worst
    elif name == "one_bit":
        skipped = 0
        for P in cases:
            try:
                r = one_bit_floor_check(P)
            except PreconditionFailed:
                skipped += 1
                continue
            passed, failed = passed + r["holds"], failed + (not r["holds"])
        detail["skipped_above_one_bit"] = skipped
    else:
        raise ConfigError(f"unknown check {name!r}")
    return passed, failed, detail


def cmd_check(args):
    rng = np.random.default_rng(args.seed)
    names = args.check or list(CHECKS)
    for nm in names:
        if nm not in CHECKS:
            raise ConfigError(f"unknown check {nm!r}; choose from {', '.join(CHECKS)}")
    groups = [args.group] if args.group else list(DEFAULT_CHECK_GROUPS)
    results = {}
    total_failed = 0
    for gs in groups:
        G = load_group(gs)
        extra = [parse_dist(args.dist, G, rng)] if args.dist else []
        for nm in names:
            p, f, detail = _run_check(nm, G, rng, args.instances, extra)
            total_failed += f
            results.setdefault(nm, {})[gs] = dict(passed=int(p), failed=int(f), **detail)
    summary = {
        "seed": args.seed,
        "checks": results,
        "passed": sum(v["passed"] for r in results.values() for v in r.values()),
        "failed": total_failed,
        "ok": total_failed == 0,
    }
    _emit(dump_json(summary), args.json)
    return EXIT_OK if total_failed == 0 else EXIT_CHECK


def cmd_transport(args):
    G = load_group(args.group)
    rng = np.random.default_rng(args.seed)
    P = parse_dist(args.dist, G, rng)
    Q = parse_dist(args.to, G, rng)
    spec = parse_profile(args.profile or default_profile(G), G)
    res = transport_distance(P, Q, spec)
    if args.out:
        joint = res["coupling"].joint
        _emit("".join(",".join(fmt(v) for v in row) + "\n" for row in joint), args.out)
    _emit(dump_json({"value": res["value"], "tv": total_variation(P, Q)}), args.json)
    return EXIT_OK


def cmd_group_info(args):
    G = load_group(args.group)
    info = {
        "name": G.name,
        "order": G.order,
        "identity": G.identity,
        "abelian": G.is_abelian(),
        "cyclic": bool(G.cyclic),
        "element_orders": [G.element_order(g) for g in range(G.order)],
        "labels": [G.label(g) for g in range(G.order)],
    }
    if args.table:
        info["table"] = G.table.tolist()
    if args.subgroup:
        F = subgroup_closure(G, [int(t) for t in args.subgroup.split(",")])
        ca = coset_analysis(G, F)
        info["subgroup"] = {"members": list(F.members), "normal": F.is_normal(),
                            "index": ca["index"], "left_cosets": ca["left_cosets"]}
    _emit(dump_json(info), args.json)
    return EXIT_OK


# -- argument handling --------------------------------------------------------

def _common(p):
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--json", help="JSON report path")
    p.add_argument("--seed", type=int, default=0, help="seed for random distributions")
    p.add_argument("--bits", action="store_true", help="report rates and divergences in bits")
    p.add_argument("--figure", help="also render a PNG/PDF figure to this path")
    p.add_argument("--config", help="JSON file whose keys mirror the flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="haarlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("rd-curve", help="rate-distortion curve as beta, delta, rate")
    _common(p)
    p.add_argument("--group", default="so2")
    p.add_argument("--profile")
    p.add_argument("--source", help="source distribution (default uniform)")
    p.add_argument("--betas", help=f"slope grid, e.g. {DEFAULT_BETAS}")
    p.add_argument("--ba", action="store_true", help="use Blahut-Arimoto even for the uniform source")
    p.set_defaults(func=cmd_rd_curve)

    p = sub.add_parser("converge", help="divergence series of convolution powers")
    _common(p)
    p.add_argument("--group")
    p.add_argument("--dist", help="distribution spec")
    p.add_argument("--fourier", help='circle density, e.g. "a1=0.8@0"')
    p.add_argument("--profile", help="add a transport-distance column")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--burn-in", type=int, default=1)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("check", help="seeded pass/fail suite")
    _common(p)
    p.add_argument("--group")
    p.add_argument("--dist", help="extra distribution to include in every check")
    p.add_argument("--check", action="append", help=f"one of {', '.join(CHECKS)}; repeatable")
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("transport", help="exact transport distance between two distributions")
    _common(p)
    p.add_argument("--group")
    p.add_argument("--profile")
    p.add_argument("--dist", help="first distribution")
    p.add_argument("--to", default="uniform", help="second distribution")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("group-info", help="describe a group and optionally a subgroup")
    _common(p)
    p.add_argument("--group")
    p.add_argument("--subgroup", help="generators of a subgroup, e.g. 2")
    p.add_argument("--table", action="store_true")
    p.set_defaults(func=cmd_group_info)
    return parser


def _config_tokens(doc):
    tokens = []
    for key, val in doc.items():
        if key in ("command", "config"):
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                tokens.append(flag)
        elif isinstance(val, list):
            for v in val:
                tokens += [flag, str(v)]
        elif val is not None:
            tokens += [flag, str(val)]
    return tokens


def _expand_config(argv):
    """Splice a ``--config`` document in front of the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("--config needs a path")
    with open(argv[i + 1]) as fh:
        doc = json.load(fh)
    rest = argv[:i] + argv[i + 2:]
    commands = {"rd-curve", "converge", "check", "transport", "group-info"}
    if rest and rest[0] in commands:
        cmd, rest = rest[0], rest[1:]
    elif "command" in doc:
        cmd = doc["command"]
    else:
        raise ConfigError("no command given")
    return [cmd] + _config_tokens(doc) + rest


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (OSError, ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (NoConvergence, QuadratureFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, HaarlabError, ValueError, KeyError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
