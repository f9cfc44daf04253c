"""Command-line entry point: ``bohmreduce run|validate|list-scenarios``.

Exit codes: 0 success, 2 config or schema error, 3 numerical abort
(``diagnostics.json`` is then written to the output directory).
Relative output directories resolve against $BOHMREDUCE_OUTPUT_ROOT when
it is set, otherwise against the current directory.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import DESCRIPTIONS, Issue, RunConfig, load_config_file
from .errors import BohmReduceError, NumericalAbort
from .scenarios import ScenarioResult, run_scenario

OUTPUT_ROOT_ENV = "BOHMREDUCE_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
MANIFEST = "manifest.json"
DIAGNOSTICS = "diagnostics.json"


def output_dir_for(cfg: RunConfig) -> Path:
    path = Path(cfg["output_dir"]).expanduser()
    if not path.is_absolute():
        path = Path(os.environ.get(OUTPUT_ROOT_ENV) or os.getcwd()) / path
    return path.resolve()


class OutputDir:
    """Writes only bare file names inside one directory, each atomically."""

    def __init__(self, path: Path):
        self.path = path

    def target(self, name: str) -> Path:
        target = (self.path / name).resolve()
        if target.parent != self.path or Path(name).name != name:
            raise ValueError(f"refusing to write {name!r} outside {self.path}")
        return target

    def write(self, name: str, data: bytes) -> Path:
        target = self.target(name)
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if v is None:
        return ""
    return repr(float(v))


def render_csv(table, cfg: RunConfig, conventions: dict, units_label: str) -> bytes:
    conv = ";".join(f"{k}={v}" for k, v in sorted(conventions.items()))
    lines = [
        f"# scenario: {cfg.scenario}",
        f"# config_sha256: {cfg.digest()}",
        f"# units: {units_label}",
        f"# conventions: {conv}",
        ",".join(table.columns),
    ]
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    return ("\n".join(lines) + "\n").encode()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _print_issues(issues, stream=None):
    for issue in issues:
        print(issue, file=stream or sys.stderr)


def _load(path) -> tuple[RunConfig | None, list[Issue], int]:
    try:
        cfg, issues = load_config_file(path)
    except OSError as exc:
        return None, [Issue("E000", f"cannot read config: {exc}")], EXIT_CONFIG
    return cfg, issues, EXIT_OK if cfg is not None else EXIT_CONFIG


def cmd_validate(args) -> int:
    cfg, issues, status = _load(args.config)
    _print_issues(issues, sys.stdout)
    if status == EXIT_OK and not issues:
        print(f"{args.config}: ok ({cfg.scenario})")
    return status


def _prepare_output(cfg: RunConfig) -> tuple[OutputDir | None, str | None]:
    path = output_dir_for(cfg)
    if path.exists() and not path.is_dir():
        return None, f"output path {path} exists and is not a directory"
    if path.exists() and any(path.iterdir()) and not cfg["overwrite"]:
        return None, f"output directory {path} is not empty; set overwrite = true to replace its outputs"
    path.mkdir(parents=True, exist_ok=True)
    return OutputDir(path), None


def _diagnostics(exc: Exception) -> dict:
    diag = {"error": type(exc).__name__, "message": str(exc)}
    extra = getattr(exc, "diagnostics", None)
    if extra:
        diag["diagnostics"] = extra
    return diag


def cmd_run(args) -> int:
    cfg, issues, status = _load(args.config)
    _print_issues(issues)
    if status != EXIT_OK:
        return status
    out, problem = _prepare_output(cfg)
    if problem:
        print(f"error E008: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    started = _now()
    try:
        result: ScenarioResult = run_scenario(cfg)
    except (NumericalAbort, BohmReduceError, FloatingPointError) as exc:
        out.write(DIAGNOSTICS, (json.dumps(_diagnostics(exc), indent=2, sort_keys=True, default=str)
                                + "\n").encode())
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    units_label = "SI (kg, m, s)" if cfg["units"] == "SI" else "natural (hbar = G = 1)"
    checksums = {}
    for table in result.tables:
        data = render_csv(table, cfg, result.conventions, units_label)
        out.write(table.name, data)
        checksums[table.name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "tool": "bohmreduce",
        "version": __version__,
        "scenario": cfg.scenario,
        "config": cfg.values,
        "config_sha256": cfg.digest(),
        "units": units_label,
        "conventions": result.conventions,
        "warnings": [str(i) for i in issues],
        "summary": result.summary,
        "outputs": checksums,
        "started": started,
        "finished": _now(),
    }
    out.write(MANIFEST, (json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n").encode())
    print(f"{cfg.scenario}: wrote {', '.join(checksums)} to {out.path}")
    return EXIT_OK


def cmd_list(args) -> int:
    width = max(map(len, DESCRIPTIONS))
    for name, text in DESCRIPTIONS.items():
        print(f"{name:<{width}}  {text}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bohmreduce", description="Bohmian gravitational-reduction scenarios")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="validate a config, run it and write CSV outputs and a manifest")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_val = sub.add_parser("validate", help="check a config without computing")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)
    p_list = sub.add_parser("list-scenarios", help="list available scenarios")
    p_list.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
