"""Command-line driver: ``run``, ``convergence`` and ``verify``.

Exit codes are 0 on success, 1 for configuration errors and 2 for numerical
failures (invariant violations or divergence).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import benchmarks
from .io import format_error_csv, write_error_csv, write_residual_history, write_vtk
from .law import InvariantViolation
from .limiter import SCHEMES
from .time_integration import NumericalFailure, integrate, march_to_steady

log = logging.getLogger("mcldg")

OUTPUT_ENV = "MCLDG_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    preset: str
    scheme: str = "mcl"
    p: Optional[int] = None
    res: Optional[int] = None
    mesh: Optional[str] = None
    dt: Optional[float] = None
    t_final: Optional[float] = None
    output: Optional[str] = None
    dump_every: int = 0
    threads: int = 1
    resolutions: List[int] = field(default_factory=list)
    max_steps: int = 200000

    def validate(self) -> "RunConfig":
        try:
            preset = benchmarks.get_preset(self.preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {', '.join(SCHEMES)}")
        for name in ("p", "res", "dt", "t_final", "threads", "max_steps"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive (got {v})")
        if self.dump_every < 0:
            raise ConfigError("dump_every must be non-negative")
        if any(r <= 0 for r in self.resolutions):
            raise ConfigError("resolutions must be positive")
        if self.mesh is not None and preset.kind != "tri":
            raise ConfigError(f"preset {self.preset} uses a structured {preset.kind} mesh; --mesh is not supported")
        if preset.kind == "tri" and (self.p or preset.default_p) != 1:
            raise ConfigError("triangle presets are limited to p = 1")
        p = self.p or preset.default_p
        if preset.resolution == "dof":
            for r in self.resolutions or [self.res or preset.default_res]:
                if r % (p + 1):
                    raise ConfigError(f"#DOF per direction {r} is not divisible by p + 1 = {p + 1}")
        return self


_KEYS = {f.name for f in fields(RunConfig)}


def _read_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    if "h" in data:
        data["res"] = data.pop("h")
    unknown = sorted(set(data) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return data


def parse_config(args: argparse.Namespace, file: Optional[str] = None) -> RunConfig:
    """Merge a JSON file with command-line flags; flags win."""
    data = _read_config_file(file) if file else {}
    for key in _KEYS:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if "preset" not in data:
        raise ConfigError("no preset given")
    try:
        cfg = RunConfig(**data)
        for name, typ in (("p", int), ("res", int), ("dump_every", int), ("threads", int),
                          ("max_steps", int), ("dt", float), ("t_final", float)):
            v = getattr(cfg, name)
            if v is not None:
                if typ is int and (isinstance(v, bool) or float(v) != int(v)):
                    raise ConfigError(f"{name} must be an integer (got {v!r})")
                setattr(cfg, name, typ(v))
        cfg.resolutions = [int(r) for r in cfg.resolutions]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed value: {exc}") from None
    return cfg.validate()


def output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output or os.environ.get(OUTPUT_ENV) or "mcldg_output")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mesh_text(cfg: RunConfig) -> Optional[str]:
    if cfg.mesh is None:
        return None
    try:
        return Path(cfg.mesh).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read mesh file {cfg.mesh}: {exc.strerror}") from None


def _setup(cfg: RunConfig, res: Optional[int] = None):
    try:
        return benchmarks.setup(cfg.preset, cfg.scheme, cfg.p, res or cfg.res, cfg.dt, _mesh_text(cfg))
    except ValueError as exc:
        if isinstance(exc, InvariantViolation):
            raise
        raise ConfigError(str(exc)) from None


def _bounds_summary(pr, U) -> dict:
    law = pr.law
    out = {}
    for c, name in enumerate(law.component_names):
        out[name] = [float(U[..., c].min()), float(U[..., c].max())]
    try:
        dname, dval = law.derived(U)
        out[dname] = [float(np.min(dval)), float(np.max(dval))]
    except ArithmeticError:
        pass
    return out


def run(cfg: RunConfig) -> dict:
    """Run one preset and write VTK dumps, a summary and (if steady) a residual history."""
    pr = _setup(cfg)
    out = output_dir(cfg)
    stem = f"{cfg.preset}_{cfg.scheme}_p{pr.space.p}"
    t0 = time.perf_counter()
    summary = {"config": asdict(cfg), "elements": pr.space.E, "dofs": pr.space.n_dofs}
    if pr.preset.steady:
        dt = cfg.dt or pr.preset.dt
        res = march_to_steady(pr.semi, pr.U0, dt, max_steps=cfg.max_steps)
        U = res.U
        write_residual_history(res.residuals, out / f"{stem}_residuals.csv", res.residuals_l2)
        summary.update(converged=res.converged, steps=res.steps,
                       final_residual=res.residuals[-1] if res.residuals else 0.0)
        log.info("steady march: %s after %d steps", "converged" if res.converged else "not converged",
                 res.steps)
    else:
        t_final = cfg.t_final or pr.preset.t_final

        def dump(U, t, k):
            if cfg.dump_every and k % cfg.dump_every == 0:
                write_vtk(pr.space, U, out / f"{stem}_{k:06d}.vtk", pr.law, f"{stem} t={t:.6g}")

        r = integrate(pr.semi, pr.U0, t_final, pr.controller, callback=dump)
        U = r.U
        summary.update(t=r.t, steps=r.steps)
        if pr.preset.exact is not None:
            err = benchmarks.l1_error(pr.space, U, pr.preset.exact, r.t) * pr.preset.error_scale
            summary["l1_error"] = err.tolist()
    summary["ranges"] = _bounds_summary(pr, U)
    summary["wall_seconds"] = round(time.perf_counter() - t0, 3)
    write_vtk(pr.space, U, out / f"{stem}_final.vtk", pr.law, stem)
    (out / f"{stem}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def convergence(cfg: RunConfig) -> List[dict]:
    """Sweep the preset's table resolutions and write the error table with EOCs."""
    preset = benchmarks.get_preset(cfg.preset)
    if preset.exact is None:
        raise ConfigError(f"preset {cfg.preset} has no exact solution")
    levels = cfg.resolutions or list(preset.table_res)
    if len(levels) < 2:
        raise ConfigError("a convergence study needs at least two resolutions")
    rows, errors, inv_h = [], [], []
    for res in levels:
        pr = _setup(cfg, res)
        t_final = cfg.t_final or preset.t_final
        r = integrate(pr.semi, pr.U0, t_final, pr.controller)
        err = float(benchmarks.l1_error(pr.space, r.U, preset.exact, r.t).sum() * preset.error_scale)
        ih = pr.space.E / preset.measure if preset.dim == 1 else res
        errors.append(err)
        inv_h.append(ih)
        rows.append({"preset": cfg.preset, "scheme": cfg.scheme, "p": pr.space.p, "inv_h": ih,
                     "dof": pr.space.n_dofs, "l1_error": err, "eoc": None})
        log.info("%s %s p=%d 1/h=%d: L1 error %.5e", cfg.preset, cfg.scheme, pr.space.p, ih, err)
    for row, rate in zip(rows[1:], benchmarks.eoc(errors, inv_h)):
        row["eoc"] = rate
    path = output_dir(cfg) / f"convergence_{cfg.preset}_{cfg.scheme}_p{rows[0]['p']}.csv"
    write_error_csv(rows, path)
    return rows


def _build_parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            raise ConfigError(message)

    parser = Parser(prog="mcldg", description="Bernstein DG solver with monolithic convex limiting.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    for name, text in (("run", "run one benchmark"),
                       ("convergence", "error table and EOCs over a resolution sweep")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--preset", choices=sorted(benchmarks.PRESETS))
        sp.add_argument("--scheme", choices=SCHEMES)
        sp.add_argument("--p", type=int)
        sp.add_argument("--h", dest="res", type=int, help="1/h or #DOF per direction, as the preset defines")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--t-final", dest="t_final", type=float)
        sp.add_argument("--mesh", help="triangle mesh file (unstructured presets only)")
        sp.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or ./mcldg_output)")
        sp.add_argument("--dump-every", dest="dump_every", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--max-steps", dest="max_steps", type=int)
        sp.add_argument("--config", help="JSON file with the same keys; flags take precedence")
        if name == "convergence":
            sp.add_argument("--resolutions", type=int, nargs="+")
    vp = sub.add_parser("verify", help="run the property suites")
    vp.add_argument("--quick", action="store_true", help="fewer random trials")
    vp.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        args = _build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.DEBUG)
        if args.command == "verify":
            from .verification import run_all
            results = run_all(quick=args.quick, seed=args.seed)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
            return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC
        cfg = parse_config(args, args.config)
        if args.command == "run":
            summary = run(cfg)
            print(json.dumps({k: summary[k] for k in summary if k != "config"}, sort_keys=True))
        else:
            sys.stdout.write(format_error_csv(convergence(cfg)))
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
