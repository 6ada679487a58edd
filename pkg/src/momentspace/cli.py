"""Command-line interface: ``momentspace <command> [options]``.

Commands
--------
transform   map between canonical coordinates, moments and recursion coefficients
sample      draw random moment vectors (CSV)
density     density grid and atoms of a limit measure (CSV)
verify      run a verification suite (JSON report)
stieltjes   evaluate Stieltjes transforms (CSV)

Exit codes: 0 success, 1 a verification suite failed, 2 domain error,
64 usage error, 70 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__, asymptotics, coords, measures, stieltjes
from .errors import DomainError, InversionError, MomentSpaceError, NumericError
from .sampling import PotentialSpec, sample_moment_vector

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_DOMAIN = 2
EXIT_USAGE = 64
EXIT_NUMERIC = 70


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


def fmt(x):
    return "%.17g" % float(x)


def _floats(text):
    if text is None or str(text).strip() == "":
        return []
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",")]


def _exact_floats(text):
    return [Fraction(v) for v in _floats(text)]


def _potential(value):
    if value is None:
        return PotentialSpec()
    if isinstance(value, PotentialSpec):
        return value
    if isinstance(value, dict):
        return PotentialSpec(tuple(value.get("poly", (0.0,))), value.get("log_left", 0.0),
                             value.get("log_right", 0.0))
    if isinstance(value, (list, tuple)):
        return PotentialSpec(tuple(value))
    return PotentialSpec.parse(value)


def _potentials(args):
    v1 = _potential(args.v1)
    return v1, (v1 if args.v2 is None else _potential(args.v2))


def _space(args):
    return coords.parse_space(args.space, args.a, args.b)


def _measure(args):
    kind = (args.measure or "").lower()
    if kind in ("fb", "free_binomial"):
        return measures.FreeBinomial(args.p1, args.p2, args.a, args.b)
    if kind in ("mp", "marchenko_pastur"):
        return measures.MarchenkoPastur(args.z1, args.z2)
    if kind in ("sc", "semicircle"):
        return measures.Semicircle(args.alpha, args.beta)
    raise UsageError(f"unknown or missing --measure {args.measure!r}")


def _grid(text):
    """``lo:hi:count`` or a comma list."""
    if text is None or str(text).strip() == "":
        return np.empty(0)
    text = str(text)
    if ":" in text:
        lo, hi, count = text.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    return np.array(_floats(text))


def _complex_list(values):
    out = []
    for item in values or []:
        for part in str(item).split(","):
            part = part.strip().replace(" ", "")
            if part:
                out.append(complex(part))
    return out


def _write(text, path):
    if path in (None, "", "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_transform(args):
    space = _space(args)
    values = _exact_floats(args.input)
    direction = args.to
    if direction == "moments":
        out = coords.canonical_to_moments(space, values).values
    elif direction == "canonical":
        out = coords.moments_to_canonical(space, values).values
    elif direction == "recursion":
        out = coords.canonical_to_recursion(space, values).interleaved()
    else:
        raise UsageError(f"unknown direction {direction!r}")
    _write(",".join(fmt(v) for v in out) + "\n", args.out)
    return EXIT_OK


def cmd_sample(args):
    space = _space(args)
    V = _potentials(args)
    n = int(args.n)
    k = int(args.k) if args.k else min(n, coords.MAX_ORDER)
    batch = sample_moment_vector(space, n, V, int(args.seed), int(args.count), k=k)
    header = ["rep"] + [f"m{i}" for i in range(1, k + 1)]
    rows = [[r] + [fmt(v) for v in row] for r, row in enumerate(batch.moments)]
    _write(_csv(rows, header), args.out)
    return EXIT_OK


def cmd_density(args):
    mu = _measure(args)
    xs = _grid(args.grid)
    rows = [[fmt(x), fmt(d)] for x, d in zip(xs, np.atleast_1d(mu.density(xs)))]
    rows += [["atom", fmt(x), fmt(w)] for x, w in mu.atoms()]
    _write(_csv(rows, ["x", "density"]), args.out)
    return EXIT_OK


def cmd_stieltjes(args):
    zs = _complex_list(args.z)
    if args.rc_alpha is not None:
        alpha = _floats(args.rc_alpha)
        beta = _floats(args.rc_beta)
        rc = coords.RecursionCoefficients(alpha, beta)
        depth = int(args.depth) if args.depth else len(alpha)
        phi = lambda z: stieltjes.cf_convergent(rc, depth, z)
    else:
        mu = _measure(args)
        if args.depth:
            rc = mu.recursion_coefficients(int(args.depth))
            phi = lambda z: stieltjes.cf_convergent(rc, int(args.depth), z)
        else:
            phi = mu.stieltjes
    rows = []
    for z in zs:
        if not z.imag > 0:
            raise DomainError(f"z = {z} is not in the upper half plane")
        w = phi(z)
        rows.append([fmt(z.real), fmt(z.imag), fmt(w.real), fmt(w.imag)])
    _write(_csv(rows, ["re_z", "im_z", "re_phi", "im_phi"]), args.out)
    return EXIT_OK


def _verify_mdp(space, V, k, seed, count=100):
    sigma = asymptotics.clt_covariance(space, V, k)
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x4D44])))
    worst = 0.0
    for _ in range(count):
        x = gen.standard_normal(k)
        lhs = asymptotics.mdp_rate(space, V, x)
        rhs = 0.5 * float(x @ np.linalg.solve(sigma, x))
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    chol_ok = True
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        chol_ok = False
    rep = asymptotics.ExperimentReport("mdp", {"k": k, "seed": seed, "count": count})
    rep.targets["sigma"] = sigma
    rep.deviations["max_relative_error"] = worst
    rep.criteria["mdp_matches_clt"] = worst < 1e-8
    rep.criteria["sigma_positive_definite"] = chol_ok
    return rep


def cmd_verify(args):
    suite = args.suite
    t0 = time.perf_counter()
    if suite in ("lln", "clt", "mdp", "ldp"):
        space = _space(args)
        V = _potentials(args)
    if suite == "lln":
        reports = [asymptotics.run_lln_experiment(space, V, int(args.n), int(args.count),
                                                  int(args.k), int(args.seed))]
    elif suite == "clt":
        reports = [asymptotics.run_clt_experiment(space, V, int(args.n), int(args.count),
                                                  int(args.k), int(args.seed))]
    elif suite == "mdp":
        reports = [_verify_mdp(space, V, int(args.k), int(args.seed))]
    elif suite == "ldp":
        n = int(args.n)
        grid = sorted({max(n // 16, 1), max(n // 4, 1), n})
        reports = [asymptotics.run_ldp_check(space, V, float(args.c), grid)]
    elif suite == "equilibrium":
        mu = _measure(args)
        eq = measures.verify_equilibrium(mu)
        rep = asymptotics.ExperimentReport("equilibrium", {"measure": repr(mu)})
        rep.estimates.update(constant_level=eq.constant_level)
        rep.deviations.update(constancy_spread=eq.constancy_spread,
                              exterior_violation=eq.exterior_violation,
                              derivative_mismatch=eq.derivative_mismatch)
        rep.criteria["constant_on_support"] = eq.constancy_spread < 1e-4
        rep.criteria["exterior_inequality"] = eq.exterior_violation <= 1e-6
        reports = [rep]
    elif suite == "scaling":
        mu = _measure(args)
        m_values = _floats(args.m) or [1e2, 1e4, 1e6]
        sc = measures.scaling_limit_check(args.mode, mu, m_values, k=int(args.k or 4))
        rep = asymptotics.ExperimentReport("scaling", {"mode": args.mode, "target": repr(mu),
                                                       "m": m_values})
        rep.deviations["sup_density_error"] = [r.sup_density_error for r in sc.rows]
        rep.deviations["max_moment_error"] = [float(np.max(r.moment_errors)) for r in sc.rows]
        rep.criteria["density_error_decreasing"] = sc.density_decreasing
        rep.criteria["moment_error_decreasing"] = sc.moments_decreasing
        reports = [rep]
    else:
        raise UsageError(f"unknown suite {suite!r}")
    results = [r.to_dict() for r in reports]
    passed = all(r.passed is not False for r in reports)
    envelope = {
        "tool_version": __version__,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "results": results,
        "summary": {"suite": suite, "passed": passed,
                    "criteria": {f"{r.name}.{c}": bool(v) for r in reports
                                 for c, v in r.criteria.items()}},
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write(json.dumps(envelope, indent=2, default=_json_default) + "\n", args.out)
    return EXIT_OK if passed else EXIT_FAILED


def _json_default(obj):
    if isinstance(obj, (np.floating, Fraction)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, PotentialSpec):
        return {"poly": list(obj.poly), "log_left": obj.log_left, "log_right": obj.log_right}
    return str(obj)


# ---------------------------------------------------------------------------
# parser


def _add_space(p):
    p.add_argument("--space", default="compact", choices=["compact", "halfline", "realline"])
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)


def _add_potentials(p):
    p.add_argument("--v1", default="0", help='e.g. "0,1;logL=0.5"')
    p.add_argument("--v2", help="defaults to --v1")


def _add_measure(p):
    p.add_argument("--measure", choices=["fb", "mp", "sc"])
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--z1", type=float)
    p.add_argument("--z2", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)


def build_parser():
    parser = _Parser(prog="momentspace", description="Random moment sequences toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file whose keys replace command-line flags")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("transform", help="coordinate transforms")
    _add_space(p)
    p.add_argument("--to", required=True, choices=["moments", "canonical", "recursion"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("sample", help="sample moment vectors")
    _add_space(p)
    _add_potentials(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("density", help="density grid of a limit measure")
    _add_measure(p)
    p.add_argument("--grid", help="lo:hi:count or comma list")
    p.add_argument("--out")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True,
                   choices=["lln", "clt", "mdp", "ldp", "equilibrium", "scaling"])
    p.add_argument("--space", default="compact", choices=["compact", "halfline", "realline"])
    _add_measure(p)
    _add_potentials(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=0.8, help="ldp threshold on the first coordinate")
    p.add_argument("--mode", default="to_sc", choices=["to_mp", "to_sc"])
    p.add_argument("--m", help="comma list of scaling parameters")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stieltjes", help="evaluate Stieltjes transforms")
    _add_measure(p)
    p.add_argument("--rc-alpha", dest="rc_alpha", help="comma list of recursion alphas")
    p.add_argument("--rc-beta", dest="rc_beta", default="", help="comma list of recursion betas")
    p.add_argument("--depth", type=int)
    p.add_argument("--z", action="append", help="points like 2+1j; repeatable or comma list")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stieltjes)
    return parser


def _load_config(parser, argv):
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv, {}
    try:
        with open(known.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}")
    if not isinstance(config, dict):
        raise UsageError("config must be a JSON object")
    argv = list(argv)
    command = config.pop("command", None)
    if command and not any(a in parser._subparsers._group_actions[0].choices for a in argv):
        argv.append(command)
    return argv, config


def _apply_config(parser, args, config):
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions}
    for key, value in config.items():
        if key not in dests:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        # explicit command-line flags win over the file
        if getattr(args, key) == sub.get_default(key):
            setattr(args, key, value)
    for action in sub._actions:
        if action.required and getattr(args, action.dest, None) is None:
            raise UsageError(f"missing required option {action.option_strings[0]}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        argv, config = _load_config(parser, argv)
        if config:
            # required flags may come from the file; relax them for parsing
            for sp in parser._subparsers._group_actions[0].choices.values():
                for action in sp._actions:
                    if action.dest in config:
                        action.required = False
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("no command given")
        if config:
            _apply_config(parser, args, config)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        where = f" (index {exc.index})" if getattr(exc, "index", None) else ""
        print(f"domain error{where}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (MomentSpaceError, ValueError, TypeError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NumericError, InversionError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
