"""Command-line front end.

Subcommands: simulate, distance, stein, lindeberg, verify, report.  All
outputs are deterministic given the arguments and seed: JSON documents carry
no timestamps and floats serialize via shortest round-trip repr.

Exit codes: 0 on success with all asserted checks passing, 1 if any checked
bound fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, arrays, bounds, dist, metrics, stein
from .reports import all_passed, dump_reports, load_reports, render_figures, write_csv


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """Grids come as comma lists '0.1,0.3' or ranges 'start:stop:step' (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("grid step must be > 0")
        out = []
        x = start
        while x <= stop + 1e-12:
            out.append(round(x, 12))
            x += step
        return out
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise ConfigError(f"empty grid {text!r}")
    return vals


def parse_int_grid(text: str) -> list[int]:
    vals = parse_grid(text)
    out = [int(round(v)) for v in vals]
    if any(abs(v - i) > 1e-9 for v, i in zip(vals, out)):
        raise ConfigError(f"expected integers in {text!r}")
    return out


@dataclass
class RunConfig:
    """Batch-run knobs; every field validated, errors name the offending field."""

    n_schedule: list[int] | None = None
    eps_grid: list[float] | None = None
    lambda_grid: list[float] | None = None
    reps: int = 1_000_000
    seed: int = 7
    prune_tol: float | None = None
    tol: float = 1e-6
    out: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fp:
                doc = json.load(fp)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be an object")
        cfg = cls()
        known = set(cfg.__dataclass_fields__)
        for key, value in doc.items():
            if key not in known:
                raise ConfigError(f"config: unknown field {key!r}")
            setattr(cfg, key, value)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.n_schedule is not None:
            if not self.n_schedule or any(int(n) < 1 for n in self.n_schedule):
                raise ConfigError("config: n_schedule must be a nonempty list of positive integers")
            self.n_schedule = [int(n) for n in self.n_schedule]
        for name in ("eps_grid", "lambda_grid"):
            grid = getattr(self, name)
            if grid is not None:
                if not grid or any(float(x) <= 0 for x in grid):
                    raise ConfigError(f"config: {name} must be a nonempty list of positive reals")
                setattr(self, name, [float(x) for x in grid])
        if int(self.reps) < 1:
            raise ConfigError("config: reps must be >= 1")
        self.reps = int(self.reps)
        self.seed = int(self.seed)
        if self.prune_tol is not None and float(self.prune_tol) < 0:
            raise ConfigError("config: prune_tol must be >= 0")
        if float(self.tol) <= 0:
            raise ConfigError("config: tol must be > 0")


def _default_threads() -> int:
    env = os.environ.get("CLT_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"CLT_LAB_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _load_family(path: str) -> arrays.ArrayFamily:
    with open(path, encoding="utf-8") as fp:
        return arrays.load_family(fp)


def _load_law(spec: str):
    if spec == "normal":
        return dist.STANDARD_NORMAL
    with open(spec, encoding="utf-8") as fp:
        return dist.load_json(fp)


def _dump_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    fam = _load_family(args.family)
    law = arrays.row_sum_sample(fam, args.n, args.reps, args.seed)
    with open(args.out, "w", encoding="utf-8") as fp:
        dist.dump_json(law, fp)
        fp.write("\n")
    return 0


def cmd_distance(args) -> int:
    p = _load_law(args.p)
    if not isinstance(p, dist.DiscreteDistribution):
        raise ConfigError("--p must be a finitely supported law file")
    q = _load_law(args.q)
    mv = metrics.compute_distance(args.metric, p, q, lam=args.lam, tol=args.tol)
    _dump_json({"metric": args.metric, "value": mv.value, "method": mv.method, "error_budget": mv.error_budget}, args.out)
    return 0


def cmd_stein(args) -> int:
    h = stein.from_name(args.h)
    ev = stein.evaluate_stein(h)
    checks = stein.check_transform_derivative_bounds(h, ev)
    doc = {
        "meta": {"tool": "clt-lab", "version": __version__},
        "evaluation": ev.summary(),
        "bound_checks": [r.to_record() for r in checks],
    }
    _dump_json(doc, args.report)
    return 0 if all_passed(checks) else 1


def cmd_lindeberg(args) -> int:
    fam = _load_family(args.family)
    profile = arrays.lindeberg_profile(fam, parse_int_grid(args.n), parse_grid(args.eps))
    _dump_json(profile.to_dict(), args.out)
    return 0


def cmd_verify(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    suite_cfg = bounds.SuiteConfig(threads=args.threads, tol=cfg.tol, reps=cfg.reps, seed=cfg.seed)
    if cfg.n_schedule is not None:
        suite_cfg.n_values = tuple(cfg.n_schedule)
    if cfg.eps_grid is not None:
        suite_cfg.eps_values = tuple(cfg.eps_grid)
    if cfg.lambda_grid is not None:
        suite_cfg.lambda_grid = tuple(cfg.lambda_grid)
    if cfg.prune_tol is not None:
        suite_cfg.prune_tol = cfg.prune_tol
    if args.family:
        suite_cfg.families = [_load_family(args.family)]

    if args.suite == "aclt" and args.family:
        reports = bounds.suite_aclt(suite_cfg, families=suite_cfg.families)
    else:
        reports = bounds.run_suite(args.suite, suite_cfg)

    out = args.out or cfg.out
    if out:
        if args.format == "csv":
            write_csv(reports, out)
        else:
            dump_reports(reports, out, meta={"suite": args.suite, "version": __version__})
    if args.figures_dir:
        render_figures(reports, args.figures_dir, stem=args.suite)
    n_fail = sum(not r.passed for r in reports)
    print(f"suite {args.suite}: {len(reports) - n_fail}/{len(reports)} checks passed")
    return 0 if n_fail == 0 else 1


def cmd_report(args) -> int:
    reports = load_reports(args.infile)
    rows = write_csv(reports, args.out)
    print(f"wrote {rows} rows to {args.out}")
    if not args.no_figures:
        directory = args.figures_dir or str(Path(args.out).parent)
        stem = Path(args.out).stem
        for path in render_figures(reports, directory, stem):
            print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clt-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"clt-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="empirical row-sum law by seeded Monte Carlo")
    p.add_argument("--family", required=True, help="family JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distance", help="distance between two laws")
    p.add_argument("--metric", required=True, choices=["kolmogorov", "wasserstein", "prokhorov", "tv"])
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=metrics.PROKHOROV_DEFAULT_TOL)
    p.add_argument("--p", required=True, help="law JSON file")
    p.add_argument("--q", required=True, help="law JSON file or 'normal'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("stein", help="transform evaluation summary for one test function")
    p.add_argument("--h", required=True, help="e.g. sigmoid, smooth_step:0:1, mollified:sigmoid:0.1")
    p.add_argument("--report", help="output JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_stein)

    p = sub.add_parser("lindeberg", help="truncated-second-moment profile of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--n", required=True, help="comma list or start:stop:step")
    p.add_argument("--eps", required=True, help="comma list or start:stop:step")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lindeberg)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True, choices=sorted(bounds.SUITES))
    p.add_argument("--family", help="restrict to one family JSON file")
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--out", help="report output path")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--figures-dir", help="also render figures into this directory")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="render a report JSON to CSV and figures")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--figures-dir", help="figure directory (default: alongside the CSV)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and args.command == "verify":
        args.threads = _default_threads()
    try:
        return args.func(args)
    except (
        ConfigError,
        dist.DistributionError,
        metrics.MetricError,
        arrays.ArrayError,
        stein.SteinError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
