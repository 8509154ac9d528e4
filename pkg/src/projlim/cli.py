"""Command line front end.

    projlim {converge|schwinger|check|oracle} -c CONFIG.json [-o OUTDIR]
    projlim schema NAME

Exit codes: 0 success / converged, 1 error or failed check, 2 not converged,
3 ill-conditioned normalisation.  ``result.json`` (and ``table.csv`` for
``converge``) are written to OUTDIR; the log goes to standard error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import rng
from .config import (
    ConfigError,
    interaction_from_spec,
    integrand_from_spec,
    kernel_from_spec,
    load_config,
    polynomial_from_spec,
    schema_document,
    system_from_spec,
    validate_output,
)
from .diagram import ProjectiveChain, check_chain_consistency
from .discrete import brute_force_integral, discrete_conditional_expectation, verify_tower
from .errors import EnumerationGuardError, IllConditionedNormalization, LevelConstructionError, ProjlimError
from .gaussian import positivity_check
from .integration import projective_limit_integral
from .polynomial import CylinderFunction
from .qft import perturbative_oracle, schwinger_free, schwinger_interacting

log = logging.getLogger("projlim")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_ILL_CONDITIONED = 0, 1, 2, 3
ORACLE_MAX_LAMBDA = 0.05


class CommandFailed(Exception):
    """Carries a partial result document and an exit code."""

    def __init__(self, message: str, code: int = EXIT_ERROR, result: dict | None = None):
        super().__init__(message)
        self.code = code
        self.result = result or {}


def _write_outputs(name: str, result: dict, outdir: Path, cfg: dict, table_csv: str | None = None):
    out = cfg.get("output", {})
    outdir.mkdir(parents=True, exist_ok=True)
    result = {"subcommand": name, "timestamp": datetime.now(timezone.utc).isoformat(),
              "generator": rng.GENERATOR_NAME, **result}
    validate_output(result, name)
    (outdir / out.get("result", "result.json")).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    if table_csv is not None:
        (outdir / out.get("table", "table.csv")).write_text(table_csv)
    log.info("wrote results to %s", outdir)


def cmd_converge(cfg: dict) -> tuple:
    kernel = kernel_from_spec(cfg["kernel"])
    f = integrand_from_spec(cfg["integrand"])
    tol, window, horizon = cfg.get("tol", 1e-12), cfg.get("window", 3), cfg["horizon"]
    log.info("converge: %r over %s kernel, horizon %d", f, kernel.source, horizon)
    table = projective_limit_integral(f, kernel, tol, window, horizon,
                                      samples=cfg.get("samples", 200_000), seed=cfg.get("seed", 0))
    data = table.to_dict()
    data["integrand"] = f.to_json()
    code = EXIT_OK if table.converged else EXIT_NOT_CONVERGED
    data.update(status="converged" if table.converged else "not-converged", exit_code=code)
    return code, data, table.to_csv()


def cmd_schwinger(cfg: dict) -> tuple:
    kernel = kernel_from_spec(cfg["kernel"])
    fs = cfg["test_functions"]
    free = schwinger_free(fs, kernel)
    data = {"k": len(fs), "free_value": free}
    if "interaction" not in cfg:
        log.info("free %d-point function: %r", len(fs), free)
        data.update(mode="free", status="ok", exit_code=EXIT_OK)
        return EXIT_OK, data, None
    inter = interaction_from_spec(cfg["interaction"])
    data.update(mode="interacting", **{"lambda": inter.coupling})
    try:
        est = schwinger_interacting(fs, inter, kernel, cfg.get("level"),
                                    samples=cfg.get("samples", 1_000_000), seed=cfg.get("seed", 0))
    except IllConditionedNormalization as exc:
        data.update(status="ill-conditioned", exit_code=EXIT_ILL_CONDITIONED, error=str(exc))
        raise CommandFailed(str(exc), EXIT_ILL_CONDITIONED, data) from exc
    data["estimate"] = est.to_dict()
    data["oracle"] = (perturbative_oracle(fs, inter, kernel, est.level)
                      if inter.coupling <= ORACLE_MAX_LAMBDA else None)
    log.info("interacting estimate %.6g +- %.2g (Z = %.6g)", est.value, est.stderr, est.z)
    data.update(status="ok", exit_code=EXIT_OK)
    return EXIT_OK, data, None


def cmd_check(cfg: dict) -> tuple:
    depth = cfg["depth"]
    data = {"consistency": None, "positivity": None, "failed_checks": []}

    def fail(check: str, message: str):
        data["failed_checks"].append(check)
        data.update(passed=False, status="failed", exit_code=EXIT_ERROR, error=message)
        return CommandFailed(f"{check}: {message}", EXIT_ERROR, data)

    kernel = kernel_from_spec(cfg["kernel"])
    try:
        report = check_chain_consistency(ProjectiveChain.gaussian(kernel, depth), depth)
    except LevelConstructionError as exc:
        pivot = getattr(exc.cause, "pivot", None)
        msg = str(exc) if pivot is None else f"level {exc.level}: not positive definite at pivot {pivot}"
        raise fail("chain-consistency", msg) from exc
    data["consistency"] = report.to_dict()
    if not report.passed:
        raise fail("chain-consistency", f"{len(report.failures)} consistency failures")

    pos = cfg.get("positivity", {})
    tol = pos.get("tol", 1e-10)
    if "vectors" in pos:
        batteries = [np.asarray(pos["vectors"], dtype=float)]
    else:
        gen = rng.stream(pos.get("seed", 0), 0)
        batteries = [pos.get("spread", 1.0) * gen.standard_normal((pos.get("count", 8), depth))
                     for _ in range(pos.get("trials", 1))]
    eigs = [positivity_check(kernel, vecs) for vecs in batteries]
    min_eig = min(eigs) if eigs else None
    data["positivity"] = {"trials": len(eigs), "min_eigenvalue": min_eig, "tol": tol,
                          "passed": min_eig is None or min_eig >= -tol}
    log.info("positivity: min eigenvalue %r over %d trial(s)", min_eig, len(eigs))
    if not data["positivity"]["passed"]:
        raise fail("positivity", f"min eigenvalue {min_eig!r} below -{tol}")
    data.update(passed=True, status="passed", exit_code=EXIT_OK)
    return EXIT_OK, data, None


def cmd_oracle(cfg: dict) -> tuple:
    tol = cfg.get("tol", 1e-14)
    cases = []
    data = {"cases": cases}
    for si, sys_spec in enumerate(cfg["systems"]):
        system = system_from_spec(sys_spec)
        top = system.max_level
        for fi, records in enumerate(cfg["functions"]):
            f = CylinderFunction(polynomial_from_spec(records))
            if f.support_level > top:
                raise ConfigError(f"function {fi} depends on x{f.support_level}, system {si} has {top} coordinates")
            try:
                reference = brute_force_integral(f, system, top)
                gaps = [abs(brute_force_integral(f, system, n) - reference)
                        for n in range(f.level, top + 1)]
                gaps += [abs(brute_force_integral(discrete_conditional_expectation(f, n, system), system, n)
                             - reference) for n in range(1, top + 1)]
                tower = all(verify_tower(f, system, n, m, tol)
                            for m in range(1, top + 1) for n in range(1, m + 1))
            except EnumerationGuardError as exc:
                data.update(passed=False, status="error", exit_code=EXIT_ERROR, error=str(exc))
                raise CommandFailed(str(exc), EXIT_ERROR, data) from exc
            gap = max(gaps)
            cases.append({"system": si, "function": fi, "integral": reference, "max_discrepancy": gap,
                          "tower": tower, "passed": bool(gap <= tol and tower)})
    passed = all(c["passed"] for c in cases)
    data.update(passed=passed, status="match" if passed else "mismatch",
                exit_code=EXIT_OK if passed else EXIT_ERROR)
    if not passed:
        raise CommandFailed("brute-force and conditional-expectation routes disagree", EXIT_ERROR, data)
    return EXIT_OK, data, None


COMMANDS = {"converge": cmd_converge, "schwinger": cmd_schwinger, "check": cmd_check, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="projlim", description="Integrals over projective limits of measures")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", required=True, help="JSON run configuration")
        p.add_argument("-o", "--outdir", default=".", help="directory for result.json / table.csv")
    p = sub.add_parser("schema", help="print a published JSON schema")
    p.add_argument("name", help="converge|schwinger|check|oracle, or output.<name>")
    return ap


def run(name: str, config_path, outdir) -> int:
    outdir = Path(outdir)
    try:
        cfg = load_config(config_path, name)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    try:
        code, data, table = COMMANDS[name](cfg)
    except CommandFailed as exc:
        log.error("%s", exc)
        if exc.result:
            exc.result.setdefault("status", "error")
            exc.result.setdefault("exit_code", exc.code)
            exc.result.setdefault("error", str(exc))
            _write_outputs(name, exc.result, outdir, cfg)
        return exc.code
    except (ProjlimError, ConfigError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    _write_outputs(name, data, outdir, cfg, table)
    if code == EXIT_NOT_CONVERGED:
        log.warning("net did not stabilise within the horizon")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "schema":
        try:
            print(json.dumps(schema_document(args.name), indent=2, sort_keys=True))
        except KeyError:
            log.error("unknown schema %r", args.name)
            return EXIT_ERROR
        return EXIT_OK
    return run(args.command, args.config, args.outdir)


if __name__ == "__main__":
    sys.exit(main())
