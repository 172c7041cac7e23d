"""Command-line front end.

Exit statuses: 0 pass, 1 verification failure, 2 precondition failure,
3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Optional, Sequence

import numpy as np

from dpextend import jsonio
from dpextend.errors import (
    BadParameters,
    DPExtendError,
    InvalidHypothesis,
    InvalidMechanism,
    NotPrivateOnH,
    TooLarge,
    TooManyOutputs,
)
from dpextend.extension import extend
from dpextend.graphs_app import GraphExperimentConfig, run_rate_experiment
from dpextend.mechanism import DEFAULT_REL_TOL, Mechanism, PartialMechanism, measured_epsilon, verify_epsilon
from dpextend.spaces import validate_metric
from dpextend.verifier import MAX_SET_LEVEL_OUTPUTS, audit_extension, audit_set_level

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PRECONDITION = 2
EXIT_IO = 3


class _Exit(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        super().__init__(message)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read(path: str) -> Any:
    try:
        return jsonio.read_json(path)
    except json.JSONDecodeError as exc:
        raise _Exit(EXIT_IO, f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise _Exit(EXIT_IO, f"{path}: {exc.strerror or exc}")


def _load_checked(path: str) -> Mechanism:
    """Parse a mechanism file and validate its metric and table."""
    obj = _read(path)
    try:
        space = jsonio.space_from_json(jsonio._require(obj, "space", "mechanism"))
    except jsonio.SchemaError as exc:
        raise _Exit(EXIT_IO, f"{path}: {exc}")
    except (DPExtendError, ValueError, TypeError) as exc:
        raise _Exit(EXIT_FAIL, f"{path}: invalid metric space: {exc}")
    result = validate_metric(space)
    if not result.ok:
        witness = ", ".join(space.labels[i] for i in result.witness)
        raise _Exit(EXIT_FAIL, f"{path}: {result.kind} witness ({witness}): {result.message}")
    try:
        return jsonio.mechanism_from_json(obj)
    except jsonio.SchemaError as exc:
        raise _Exit(EXIT_IO, f"{path}: {exc}")
    except InvalidMechanism as exc:
        raise _Exit(EXIT_FAIL, f"{path}: invalid mechanism: {exc}")
    except (DPExtendError, ValueError, TypeError) as exc:
        raise _Exit(EXIT_FAIL, f"{path}: {exc}")


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"{path}: {exc.strerror or exc}")


def _partial(m: Mechanism, path: str) -> PartialMechanism:
    if not isinstance(m, PartialMechanism):
        raise _Exit(EXIT_PRECONDITION, f"{path}: no 'hypothesis' field; nothing to extend")
    return m


def _resolve_eps(m: PartialMechanism, eps: Optional[float]) -> float:
    if eps is not None:
        return eps
    report = measured_epsilon(m)
    if not report.private:
        raise _Exit(EXIT_PRECONDITION, f"mechanism is not private on H: {report.summary()}")
    _err(f"NOTE: --eps not given; extending with the measured eps on H = {report.epsilon!r}")
    return report.epsilon


def cmd_validate(args: argparse.Namespace) -> int:
    m = _load_checked(args.file)
    kind = "partial" if isinstance(m, PartialMechanism) else "full"
    print(f"valid: {len(m.space)} datasets, {len(m.outputs)} outputs, {kind} mechanism ({m.table.shape[0]} rows)")
    return EXIT_OK


def cmd_measure(args: argparse.Namespace) -> int:
    m = _load_checked(args.file)
    if args.claimed_eps is None:
        report = measured_epsilon(m)
    else:
        report = verify_epsilon(m, args.claimed_eps, args.rel_tol)
    if args.json:
        sys.stdout.write(jsonio.dumps(report.to_dict()))
    else:
        print(report.summary())
    if report.claimed_eps is not None and not report.passed:
        return EXIT_FAIL
    return EXIT_OK


def cmd_extend(args: argparse.Namespace) -> int:
    m = _partial(_load_checked(args.file), args.file)
    eps = _resolve_eps(m, args.eps)
    try:
        r = extend(m, eps, rel_tol=args.rel_tol)
    except NotPrivateOnH as exc:
        raise _Exit(EXIT_PRECONDITION, str(exc))
    _write(args.out, jsonio.dumps(jsonio.extension_to_json(r)))
    out_eps = measured_epsilon(r.mechanism)
    log = print if args.out else _err
    z = r.normalizers
    log(f"eps_in = {eps!r}; base = {m.space.labels[r.base_index]}")
    log(f"Z: min {float(z.min())!r}, max {float(z.max())!r}, {int(np.sum(np.abs(z - 1) <= 1e-9))} datasets with Z = 1")
    log(f"measured eps of extension = {out_eps.epsilon!r} (bound {2 * eps!r})")
    log(f"density-scaling operations = {r.operations}")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    m = _partial(_load_checked(args.file), args.file)
    eps = _resolve_eps(m, args.eps)
    try:
        r = extend(m, eps, rel_tol=args.rel_tol)
        report = audit_extension(m, eps, rel_tol=args.rel_tol, result=r)
    except NotPrivateOnH as exc:
        raise _Exit(EXIT_PRECONDITION, str(exc))
    if len(m.outputs) <= MAX_SET_LEVEL_OUTPUTS:
        try:
            report.extend(audit_set_level(r.mechanism, 2 * eps, args.rel_tol), prefix="extension_")
        except TooManyOutputs:
            pass
    _write(args.out, report.to_json() if args.json else report.to_text())
    return EXIT_OK if report.overall else EXIT_FAIL


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_graph_experiment(args: argparse.Namespace) -> int:
    settings: dict[str, Any] = {}
    if args.config:
        obj = _read(args.config)
        if not isinstance(obj, dict):
            raise _Exit(EXIT_IO, f"{args.config}: config must be a JSON object")
        settings.update(obj)
    for key in ("n", "degree_bound", "eps", "trials", "seed"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    if args.p is not None:
        settings["p_values"] = args.p
    try:
        cfg = GraphExperimentConfig.from_dict(settings)
        report = run_rate_experiment(cfg)
    except (TooLarge, BadParameters, InvalidHypothesis, NotPrivateOnH) as exc:
        raise _Exit(EXIT_PRECONDITION, str(exc))
    except TypeError as exc:
        raise _Exit(EXIT_IO, f"bad config: {exc}")
    _write(args.out, report.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpextend", description="Extend and audit differentially private mechanisms on finite metric spaces."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a mechanism file's metric and probability table")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("measure", help="measure the privacy level of a mechanism")
    p.add_argument("file")
    p.add_argument("--claimed-eps", type=float)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("extend", help="extend a mechanism from its hypothesis set to all datasets")
    p.add_argument("file")
    p.add_argument("--eps", type=float, help="privacy level on H (default: measured)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("audit", help="extend and re-check every guarantee")
    p.add_argument("file")
    p.add_argument("--eps", type=float, help="privacy level on H (default: measured)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--json", action="store_true", help="write the report as JSON")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("graph-experiment", help="G(n, p) edge-density MSE comparison")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--n", type=int)
    p.add_argument("--degree-bound", dest="degree_bound", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--p", type=_parse_floats, help="comma-separated edge probabilities")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_graph_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        _err(str(exc))
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
