"""Command-line entry point ``frackin``.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import diagnostics as Dg
from . import experiments as X
from .config import load_config, valid_keys
from .errors import FrackinError, InvalidInputError

THREADS_ENV = "FRACKIN_THREADS"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

# subcommand -> runner; "sweep" runs whatever experiment.id names
RUNNER_OF = {"kinetic": "E2", "compare": "E1", "particles": "E3", "fractional": "fractional", "sweep": None}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frackin", description="Kinetic chemotaxis model and its fractional diffusion limit.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config, help="INI config file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
        sp.add_argument("--seed", type=int, help="overrides run.seed")
        sp.add_argument("--threads", type=int, help=f"overrides run.threads (default from ${THREADS_ENV})")

    sp = sub.add_parser("validate", help="check the parameter inequalities and print mu, nu, B0")
    common(sp)
    sp = sub.add_parser("constants", help="print c1, c2, C-, B0, nu to 12 significant digits")
    common(sp)
    for name, text in (("kinetic", "kinetic run with bounds (E2)"), ("compare", "kinetic vs fractional sweep (E1)"),
                       ("particles", "particles vs fractional (E3)"), ("fractional", "fractional reference solve"),
                       ("sweep", "run the experiment named by experiment.id")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--out", required=True, help="output directory")
    sp = sub.add_parser("report", help="summarize a run directory; --verify rebuilds it from its manifest")
    sp.add_argument("--out", required=True, help="run directory containing manifest.txt")
    sp.add_argument("--verify", action="store_true", help="rerun from the manifest and compare output hashes")
    return p


def _load(args):
    overrides = list(args.set)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise InvalidInputError("--seed must be an unsigned 64-bit integer")
        overrides.append(f"run.seed={args.seed}")
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise InvalidInputError(f"${THREADS_ENV} must be an integer") from None
    if threads is not None:
        if threads < 1:
            raise InvalidInputError("thread count must be >= 1")
        overrides.append(f"run.threads={threads}")
    return load_config(args.config, overrides)


def cmd_validate(args) -> int:
    cfg = _load(args)
    rep = cfg.admissibility()
    if not rep.ok:
        print(rep.render())
        return EXIT_FAIL
    d = X.derived_constants(cfg)
    print(f"ok mu={d['mu']:.12g} nu={d['nu']:.12g} B0={d['B0']:.12g}")
    return EXIT_OK


def cmd_constants(args) -> int:
    cfg = _load(args)
    c = cfg.coefficients()
    d = X.derived_constants(cfg)
    alpha = c.beta - c.n_exp
    print(f"c1(alpha={alpha:g}, beta1={c.beta:g}) = {d['c1']:.12g}")
    print(f"c2(alpha={alpha:g}, beta2={c.beta:g}) = {d['c2']:.12g}")
    print(f"C_minus = {d['C_minus']:.12g}")
    print(f"B0 = {d['B0']:.12g}")
    print(f"nu = {d['nu']:.12g}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    rep = cfg.admissibility()
    if not rep.ok:
        print(rep.render())
        return EXIT_FAIL
    res = X.run_experiment(cfg, args.out, RUNNER_OF[args.command])
    print("\n".join(res.summary))
    print(f"manifest: {Path(res.out_dir) / 'manifest.txt'}")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_report(args) -> int:
    out = Path(args.out)
    manifest = out / "manifest.txt"
    if not manifest.is_file():
        raise InvalidInputError(f"{manifest} not found")
    cfg, hashes, runner = X.read_manifest(manifest)
    print(f"run {out} ({runner}), {len(hashes)} hashed outputs")
    ok = True
    bounds = out / "reports" / "bounds.csv"
    if bounds.is_file():
        reps = Dg.reports_from_csv(bounds)
        print(Dg.summary_text(reps))
        ok &= all(r.passed for r in reps)
    for name in ("convergence.csv", "particles.csv", "flux_verdicts.csv"):
        path = out / "reports" / name
        if path.is_file():
            text = path.read_text()
            print(f"-- {name}\n{text.rstrip()}")
            ok &= "FAIL" not in text and "not monotone" not in text
    for name, digest in hashes.items():
        path = out / name
        if not path.is_file() or X.sha256_file(path) != digest:
            print(f"hash mismatch: {name}")
            ok = False
    if args.verify:
        with tempfile.TemporaryDirectory() as tmp:
            same, problems = X.verify_manifest(manifest, tmp)
        print("rebuild reproduces all hashes" if same else "rebuild differs:\n  " + "\n  ".join(problems))
        ok &= same
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    handler = {"validate": cmd_validate, "constants": cmd_constants, "report": cmd_report}.get(args.command, cmd_run)
    try:
        return handler(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if "unknown key" in str(exc) and "valid keys" not in str(exc):
            print("valid keys: " + ", ".join(valid_keys()), file=sys.stderr)
        return EXIT_INPUT
    except FrackinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
