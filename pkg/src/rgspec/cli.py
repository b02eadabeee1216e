"""Command-line front end: ``rgcheck``.

Exit codes: 0 pass, 1 fail (counterexample), 2 usage or parse error,
3 budget exceeded.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

from . import checks, dsl
from . import kernel as K

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment line."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   delimiters=("=",))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_string("[config]\n" + fh.read(), source=path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc}") from None
    return dict(cp["config"])


def _settings(args, name) -> dict:
    spec = checks.REGISTRY[name]
    out = {}
    if args.config:
        out.update(read_config(args.config))
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.max_len is not None:
        key = "max_len" if "max_len" in spec.defaults else "explore_len"
        if key not in spec.defaults:
            raise UsageError(f"{name} has no trace bound")
        out[key] = str(args.max_len)
    if args.lassos is not None:
        if "lassos" not in spec.defaults:
            raise UsageError(f"{name} has no lasso option")
        out["lassos"] = args.lassos
    return out


def _listing() -> str:
    width = max(len(n) for n in checks.REGISTRY)
    return "\n".join(f"  {n:<{width}}  {c.summary}" for n, c in checks.REGISTRY.items())


def _print_outcome(o: checks.Outcome, out):
    word = {"pass": "PASS", "fail": "FAIL", "error": "ERROR"}[o.status]
    if o.budget_exceeded:
        word += " (budget exceeded)"
    print(f"{o.check}: {word}  [{o.checked} checked, {o.wall_time:.2f}s]", file=out)
    for line in o.details:
        print(f"  {line}", file=out)
    cx = o.counterexample
    if cx is not None:
        print("  counterexample:", file=out)
        for line in cx["trace"].splitlines():
            print(f"    {line}", file=out)
        verdicts = ", ".join(f"{k}={v}" for k, v in cx["verdicts"].items())
        print(f"  verdicts: {verdicts}", file=out)


def _exit_code(outcomes) -> int:
    if any(o.budget_exceeded for o in outcomes):
        return EXIT_BUDGET
    if any(o.status != "pass" for o in outcomes):
        return EXIT_FAIL
    return EXIT_PASS


def _replay(path, out) -> int:
    try:
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    records = []
    for ln in lines:
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: not a report line: {exc}") from None
        cx = rec.get("counterexample", rec) if "kind" not in rec else rec
        if cx:
            records.append((rec.get("check", "counterexample"), cx))
    if not records:
        raise UsageError(f"{path} holds no counterexample")
    code = EXIT_PASS
    for name, cx in records:
        try:
            got = checks.replay(cx)
        except (KeyError, ValueError, dsl.DslError) as exc:
            raise UsageError(f"{name}: malformed counterexample: {exc}") from None
        same = got == cx.get("verdicts")
        print(f"{name}: replay {'reproduced' if same else 'DIFFERS'}", file=out)
        for k, v in got.items():
            print(f"  {k}: {v}", file=out)
        if not same:
            code = EXIT_FAIL
    return code


def _parse_file(path, out) -> int:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    mod = dsl.parse_module(text)
    print(dsl.format_module(mod), end="", file=out)
    for d in mod.defs.values():
        # reflexivity needs concrete values, so parameterised bodies skip it
        decls = None if d.params else mod.decls
        for w in K.lint(d.body, mod.resources.values(), decls, dsl.format_expr):
            print(f"rgcheck: warning: {d.name}: {w}", file=sys.stderr)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rgcheck",
        description="Bounded checks of rely/guarantee specifications.",
        epilog="exit codes: 0 pass, 1 counterexample, 2 usage or parse error, 3 budget exceeded",
    )
    p.add_argument("--check", action="append", metavar="NAME", help="run a named check (repeatable)")
    p.add_argument("--config", metavar="FILE", help="key=value settings for the check")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="one setting (repeatable)")
    p.add_argument("--max-len", type=int, metavar="N", help="trace bound")
    p.add_argument("--lassos", metavar="BOOL", help="include lasso traces")
    p.add_argument("--report", metavar="PATH", help="write one JSON record per check")
    p.add_argument("--replay", metavar="FILE", help="re-run the counterexamples of a report")
    p.add_argument("--parse", metavar="FILE", help="parse a module file and print it back")
    p.add_argument("--list", action="store_true", help="list the registered checks")
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        if args.list:
            print(_listing(), file=out)
            return EXIT_PASS
        if args.replay:
            return _replay(args.replay, out)
        if args.parse:
            return _parse_file(args.parse, out)
        if not args.check:
            parser.print_usage(sys.stderr)
            print("rgcheck: one of --check, --replay, --parse or --list is required", file=sys.stderr)
            return EXIT_USAGE
        unknown = [n for n in args.check if n not in checks.REGISTRY]
        if unknown:
            print(f"rgcheck: unknown check {unknown[0]!r}; registered checks:", file=sys.stderr)
            print(_listing(), file=sys.stderr)
            return EXIT_USAGE
        outcomes = []
        for name in args.check:
            o = checks.run_check(name, _settings(args, name))
            _print_outcome(o, out)
            outcomes.append(o)
        if args.report:
            with open(args.report, "w") as fh:
                for o in outcomes:
                    fh.write(json.dumps(o.record(), sort_keys=True) + "\n")
        return _exit_code(outcomes)
    except (UsageError, checks.OptionError, K.ConfigError) as exc:
        print(f"rgcheck: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except dsl.DslError as exc:
        print(f"rgcheck: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
