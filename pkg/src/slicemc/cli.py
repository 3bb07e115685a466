"""Command-line front end: integration, sampling, planning, and
baseline-comparison jobs over manifold description files.

Every output embeds the resolved job configuration, excluding the worker
count and the output path since neither changes the numbers.  With a
fixed --seed, output bytes are identical for any --workers value.

Exit codes: 0 success, 1 unreliable result or runtime error, 2 bad
arguments or parse error, 3 solver error, 4 sampling error, 5 I/O error.
"""

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import ParseError, SamplingError, SliceMCError, SolverError
from .estimators import (
    RejectionConfig,
    baseline_running_means,
    estimate_bounds_by_exploration,
    estimate_integral,
    explore_projective_bound,
    plan_sample_size,
    running_means,
    sample_points,
    sample_points_projective,
    variance_bound,
    windowed_ratio_scan,
)
from .expressions import parse_scalar
from .manifold_io import load_manifold, load_scalar, read_expression_text

# Sub-key for the visualization projection matrix, far above any trial
# index so the stream never collides with the sampling substreams.
_PROJECTION_KEY = 2 ** 48

_EXIT_CODES = (
    "exit codes: 0 success, 1 unreliable result or runtime error, "
    "2 bad arguments or parse error, 3 solver error, 4 sampling error, "
    "5 I/O error"
)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParseError(message)


def _resolve_seed(value):
    """Base seed tuple for the run; a missing --seed draws fresh OS
    entropy so the embedded configuration still reproduces the run."""
    if value is None:
        return (int(np.random.SeedSequence().entropy),)
    return (int(value),)


def _load_manifold(args):
    manifold = load_manifold(args.manifold)
    if getattr(args, "projective", False) and not manifold.projective:
        try:
            manifold = dataclasses.replace(manifold, projective=True)
        except ValueError as e:
            raise ParseError(f"{args.manifold}: --projective: {e}") from None
    return manifold


def _parse_integrand(args, manifold):
    if args.f is None:
        return None
    return parse_scalar(args.f, manifold.system.variables)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render_csv(config, header, rows) -> str:
    lines = [
        f"# {key} = {json.dumps(config[key], sort_keys=True)}"
        for key in sorted(config)
    ]
    lines.append(",".join(header))
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _render_json(config, payload) -> str:
    return json.dumps({"config": config, **payload}, sort_keys=True, indent=2) + "\n"


def _write_output(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_scalar(args, config, payload) -> None:
    if args.format == "json":
        text = _render_json(config, payload)
    else:
        header = sorted(payload)
        text = _render_csv(config, header, [[payload[key] for key in header]])
    _write_output(text, args.out)


def _emit_table(args, config, header, rows) -> None:
    if args.format == "json":
        payload = {"columns": list(header), "rows": [list(r) for r in rows]}
        text = _render_json(config, payload)
    else:
        text = _render_csv(config, header, rows)
    _write_output(text, args.out)


def _base_config(args, command, seed_t) -> dict:
    return {
        "command": command,
        "manifold": str(args.manifold),
        "seed": list(seed_t),
        "format": args.format,
        "version": __version__,
    }


def _report_payload(report, eps) -> dict:
    return {
        "mean": float(report.mean),
        "empirical_variance": float(report.empirical_variance),
        "chebyshev_bound": float(report.chebyshev_bound(eps)),
        "k": int(report.k),
        "failures": int(report.failures),
        "empty_slices": int(report.empty_slices),
        "unreliable": bool(report.unreliable),
    }


def _cmd_volume(args) -> int:
    _require(args.k >= 2, "--k must be at least 2")
    _require(args.eps > 0.0, "--eps must be positive")
    _require(args.workers >= 1, "--workers must be at least 1")
    manifold = _load_manifold(args)
    seed_t = _resolve_seed(args.seed)
    report = estimate_integral(
        manifold, None, k=args.k, seed=seed_t, workers=args.workers
    )
    config = _base_config(args, "volume", seed_t)
    config.update(k=args.k, eps=args.eps, projective=bool(manifold.projective))
    _emit_scalar(args, config, _report_payload(report, args.eps))
    return 1 if report.unreliable else 0


def _cmd_integrate(args) -> int:
    _require(args.k >= 2, "--k must be at least 2")
    _require(args.eps > 0.0, "--eps must be positive")
    _require(args.workers >= 1, "--workers must be at least 1")
    manifold = _load_manifold(args)
    f = _parse_integrand(args, manifold)
    seed_t = _resolve_seed(args.seed)
    report = estimate_integral(
        manifold, f, k=args.k, seed=seed_t, workers=args.workers
    )
    config = _base_config(args, "integrate", seed_t)
    config.update(
        k=args.k, eps=args.eps, f=args.f, projective=bool(manifold.projective)
    )
    _emit_scalar(args, config, _report_payload(report, args.eps))
    return 1 if report.unreliable else 0


def _point_table(manifold, sample, seed_t, project):
    """Point rows: one coordinate column per variable, then alpha and
    residual, then the optional seeded Gaussian projection columns."""
    header = list(manifold.system.variables) + ["alpha", "residual"]
    data = np.column_stack([sample.points, sample.alphas, sample.residuals])
    if project is not None:
        gen = np.random.default_rng([*seed_t, _PROJECTION_KEY])
        matrix = gen.standard_normal((sample.points.shape[1], project))
        data = np.column_stack([data, sample.points @ matrix])
        header.extend(f"proj_{j}" for j in range(1, project + 1))
    rows = [[float(v) for v in row] for row in data]
    return header, rows


def _cmd_sample(args) -> int:
    _require(args.count >= 1, "--count must be positive")
    _require(args.workers >= 1, "--workers must be at least 1")
    _require(args.project is None or args.project >= 1,
             "--project needs a positive dimension")
    manifold = _load_manifold(args)
    if manifold.projective:
        raise SamplingError(
            "manifold is projective; use the sample-projective command instead"
        )
    f = _parse_integrand(args, manifold)
    seed_t = _resolve_seed(args.seed)
    if args.explore:
        _require(args.K is None and args.C is None,
                 "--explore replaces --K and --C")
        K, C = estimate_bounds_by_exploration(
            manifold, f, trials=args.explore_trials, seed=(*seed_t, 1)
        )
    else:
        _require(args.K is not None and args.C is not None,
                 "--K and --C are required unless --explore is given")
        K, C = args.K, args.C
    if args.kappa is None:
        config_r = RejectionConfig.for_manifold(manifold, K, C)
    else:
        config_r = RejectionConfig(
            kappa=args.kappa, K=K, C=C, d=manifold.degree_bound
        )
    sample = sample_points(
        manifold, f, args.count, config_r, seed=seed_t, workers=args.workers
    )
    config = _base_config(args, "sample", seed_t)
    config.update(
        f=args.f,
        count=args.count,
        kappa=float(config_r.kappa),
        K=float(config_r.K),
        C=float(config_r.C),
        explore=bool(args.explore),
        trials=int(sample.trials),
        acceptance_rate=float(sample.accepted / sample.trials),
        project=args.project,
    )
    header, rows = _point_table(manifold, sample, seed_t, args.project)
    _emit_table(args, config, header, rows)
    return 0


def _cmd_sample_projective(args) -> int:
    _require(args.count >= 1, "--count must be positive")
    _require(args.workers >= 1, "--workers must be at least 1")
    _require(args.project is None or args.project >= 1,
             "--project needs a positive dimension")
    manifold = load_manifold(args.manifold)
    if not manifold.projective:
        raise SamplingError("manifold is affine; use the sample command instead")
    f = _parse_integrand(args, manifold)
    seed_t = _resolve_seed(args.seed)
    if args.K is None:
        K = explore_projective_bound(
            manifold, f, args.explore_trials, (*seed_t, 1)
        )
    else:
        K = args.K
    sample = sample_points_projective(
        manifold, f, args.count, seed=seed_t, K=K, workers=args.workers
    )
    config = _base_config(args, "sample-projective", seed_t)
    config.update(
        f=args.f,
        count=args.count,
        K=float(K),
        kappa=float(1.0 / (manifold.degree_bound * K)),
        explore=args.K is None,
        trials=int(sample.trials),
        acceptance_rate=float(sample.accepted / sample.trials),
        project=args.project,
    )
    header, rows = _point_table(manifold, sample, seed_t, args.project)
    _emit_table(args, config, header, rows)
    return 0


def _cmd_physics(args) -> int:
    _require(args.k >= 2, "--k must be at least 2")
    _require(args.workers >= 1, "--workers must be at least 1")
    _require(args.grid_step > 0.0, "--grid-step must be positive")
    _require(args.grid_stop >= args.grid_start,
             "--grid-stop must not precede --grid-start")
    _require(args.dtheta > 0.0, "--dtheta must be positive")
    manifold = load_manifold(args.manifold)
    variables = manifold.system.variables
    theta = load_scalar(args.theta, variables)
    energy_text = read_expression_text(args.energy)
    density = parse_scalar(f"exp(-({energy_text}))", variables)
    grid_deg = np.arange(
        args.grid_start, args.grid_stop + args.grid_step / 2.0, args.grid_step
    )
    seed_t = _resolve_seed(args.seed)
    scan = windowed_ratio_scan(
        manifold,
        theta,
        density,
        np.radians(grid_deg),
        math.radians(args.dtheta),
        args.k,
        seed=seed_t,
        workers=args.workers,
    )
    config = _base_config(args, "physics", seed_t)
    config.update(
        theta=str(args.theta),
        energy=str(args.energy),
        grid_start=float(args.grid_start),
        grid_stop=float(args.grid_stop),
        grid_step=float(args.grid_step),
        dtheta=float(args.dtheta),
        k=args.k,
    )
    header = ["theta0", "mu1", "mu2", "rho"]
    rows = [
        [float(g), float(m1), float(m2), float(r)]
        for g, m1, m2, r in zip(grid_deg, scan.mu1, scan.mu2, scan.rho)
    ]
    _emit_table(args, config, header, rows)
    return 1 if scan.unreliable else 0


def _checkpoint_schedule(k: int, n_checkpoints: int) -> list[int]:
    """Roughly geometric checkpoints ending exactly at k."""
    lo = min(10, k)
    raw = np.geomspace(lo, k, num=n_checkpoints)
    return sorted({int(round(x)) for x in raw} | {int(k)})


def _cmd_compare_baseline(args) -> int:
    _require(args.k >= 2, "--k must be at least 2")
    _require(args.workers >= 1, "--workers must be at least 1")
    _require(args.radius > 0.0, "--radius must be positive")
    _require(args.checkpoints >= 1, "--checkpoints must be positive")
    manifold = load_manifold(args.manifold)
    seed_t = _resolve_seed(args.seed)
    checkpoints = _checkpoint_schedule(args.k, args.checkpoints)
    gaussian, report = running_means(
        manifold, None, checkpoints, seed=(*seed_t, 0), workers=args.workers
    )
    baseline = baseline_running_means(
        manifold, args.radius, checkpoints, seed=(*seed_t, 1),
        workers=args.workers,
    )
    config = _base_config(args, "compare-baseline", seed_t)
    config.update(
        k=args.k,
        radius=float(args.radius),
        checkpoints=int(args.checkpoints),
        reference=args.reference,
    )
    header = ["k", "gaussian_slice_estimate", "sphere_baseline_estimate"]
    rows = [
        [int(c), float(g), float(b)]
        for c, g, b in zip(checkpoints, gaussian, baseline)
    ]
    if args.reference is not None:
        header.append("reference")
        for row in rows:
            row.append(float(args.reference))
    _emit_table(args, config, header, rows)
    return 1 if report.unreliable else 0


def _cmd_plan(args) -> int:
    _require(args.d >= 1, "--d must be at least 1")
    _require(args.n >= 1, "--n must be at least 1")
    _require(args.K > 0.0, "--K must be positive")
    _require(args.C > 0.0, "--C must be positive")
    _require(args.eps > 0.0, "--eps must be positive")
    _require(0.0 < args.confidence <= 1.0,
             "--confidence must lie in (0, 1]")
    bound = variance_bound(args.d, args.C, args.n, args.K)
    plan = plan_sample_size(bound, args.eps, args.confidence)
    config = {
        "command": "plan",
        "d": args.d,
        "n": args.n,
        "K": float(args.K),
        "C": float(args.C),
        "eps": float(args.eps),
        "confidence": float(args.confidence),
        "format": args.format,
        "version": __version__,
    }
    payload = {
        "variance_bound": float(bound),
        "k": int(plan.k),
        "strict_k": None if plan.strict_k is None else int(plan.strict_k),
    }
    _emit_scalar(args, config, payload)
    return 0


def _add_common(parser, default_format, seeded=True):
    if seeded:
        parser.add_argument(
            "--seed", type=int, default=None,
            help="base RNG seed; omitting it draws fresh entropy",
        )
        parser.add_argument(
            "--workers", type=int, default=1,
            help="worker processes; results do not depend on this",
        )
    parser.add_argument(
        "--format", choices=("json", "csv"), default=default_format,
        help=f"output format (default: {default_format})",
    )
    parser.add_argument(
        "--out", default=None, metavar="PATH",
        help="write the output to this file instead of stdout",
    )


def _add_project_flag(parser):
    parser.add_argument(
        "--project", type=int, default=None, metavar="D",
        help="append D extra columns with a seeded Gaussian projection of "
        "the points (for visualization; not uniform on the image)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicemc",
        description="Monte Carlo integration and sampling on real algebraic "
        "manifolds via random linear slices.",
        epilog=_EXIT_CODES,
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser(
        "volume", help="estimate the volume of a manifold",
        description="Estimate the volume of the manifold from k random slices.",
    )
    p.add_argument("manifold", help="manifold description file")
    p.add_argument("--k", type=int, default=1000, help="number of slices")
    p.add_argument(
        "--eps", type=float, default=0.1,
        help="accuracy target for the reported Chebyshev bound",
    )
    p.add_argument(
        "--projective", action="store_true",
        help="treat the manifold as projective even if the file does not say so",
    )
    _add_common(p, "json")
    p.set_defaults(func=_cmd_volume)

    p = sub.add_parser(
        "integrate", help="integrate a scalar function over a manifold",
        description="Estimate the integral of --f over the manifold from "
        "k random slices.",
    )
    p.add_argument("manifold", help="manifold description file")
    p.add_argument("--f", required=True, help="integrand expression")
    p.add_argument("--k", type=int, default=1000, help="number of slices")
    p.add_argument(
        "--eps", type=float, default=0.1,
        help="accuracy target for the reported Chebyshev bound",
    )
    p.add_argument(
        "--projective", action="store_true",
        help="treat the manifold as projective even if the file does not say so",
    )
    _add_common(p, "json")
    p.set_defaults(func=_cmd_integrate)

    p = sub.add_parser(
        "sample", help="draw i.i.d. points from a density on a manifold",
        description="Draw points whose density is proportional to --f "
        "(uniform when omitted) by rejection on whole slices.",
    )
    p.add_argument("manifold", help="manifold description file")
    p.add_argument("--f", default=None, help="density expression (default: uniform)")
    p.add_argument("--count", type=int, default=100, help="points to draw")
    p.add_argument("--K", type=float, default=None, help="bound on sup f")
    p.add_argument(
        "--C", type=float, default=None, help="bound on sup |x|^2 over the manifold"
    )
    p.add_argument(
        "--kappa", type=float, default=None,
        help="override the acceptance constant derived from --K and --C",
    )
    p.add_argument(
        "--explore", action="store_true",
        help="estimate K and C from exploration slices instead of flags",
    )
    p.add_argument(
        "--explore-trials", type=int, default=100, metavar="T",
        help="slices used by --explore (default: 100)",
    )
    _add_project_flag(p)
    _add_common(p, "csv")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser(
        "sample-projective",
        help="draw i.i.d. points from a density on a projective manifold",
        description="Projective rejection sampling with unit weights; "
        "points are unit-norm sign-normalized representatives.",
    )
    p.add_argument("manifold", help="manifold description file")
    p.add_argument("--f", default=None, help="density expression (default: uniform)")
    p.add_argument("--count", type=int, default=100, help="points to draw")
    p.add_argument(
        "--K", type=float, default=None,
        help="bound on sup f; explored from slices when omitted",
    )
    p.add_argument(
        "--explore-trials", type=int, default=64, metavar="T",
        help="slices used to explore K when --K is omitted (default: 64)",
    )
    _add_project_flag(p)
    _add_common(p, "csv")
    p.set_defaults(func=_cmd_sample_projective)

    p = sub.add_parser(
        "physics",
        help="windowed ratio scan of a Boltzmann density over an observable",
        description="For each grid value t (degrees), estimate mu1 = "
        "integral of exp(-energy) over {|theta - t| < dtheta} and mu2 = "
        "the window's volume, and report rho = mu1/mu2.",
    )
    p.add_argument("manifold", help="manifold description file")
    p.add_argument(
        "--theta", required=True, metavar="FILE",
        help="file with the observable expression (radians)",
    )
    p.add_argument(
        "--energy", required=True, metavar="FILE",
        help="file with the energy expression; the density is exp(-energy)",
    )
    p.add_argument(
        "--grid-start", type=float, default=60.0, help="first grid angle in degrees"
    )
    p.add_argument(
        "--grid-stop", type=float, default=180.0, help="last grid angle in degrees"
    )
    p.add_argument(
        "--grid-step", type=float, default=3.0, help="grid spacing in degrees"
    )
    p.add_argument(
        "--dtheta", type=float, default=3.0,
        help="window half-width in degrees: a grid angle t covers |theta - t| < dtheta",
    )
    p.add_argument("--k", type=int, default=1000, help="slices per integral pool")
    _add_common(p, "csv")
    p.set_defaults(func=_cmd_physics)

    p = sub.add_parser(
        "compare-baseline",
        help="running volume estimates vs a uniform-line baseline",
        description="Emit running volume estimates of a plane curve from "
        "the Gaussian slice estimator and from uniform lines through a "
        "circle of radius R, at a geometric grid of slice counts up to k.",
    )
    p.add_argument("manifold", help="manifold description file (plane curve)")
    p.add_argument(
        "--radius", type=float, required=True,
        help="radius R of the circle containing the curve",
    )
    p.add_argument("--k", type=int, default=100000, help="final slice count")
    p.add_argument(
        "--checkpoints", type=int, default=200,
        help="number of running-estimate rows (default: 200)",
    )
    p.add_argument(
        "--reference", type=float, default=None,
        help="known volume to repeat in a reference column",
    )
    _add_common(p, "csv")
    p.set_defaults(func=_cmd_compare_baseline)

    p = sub.add_parser(
        "plan", help="sample sizes guaranteeing a target accuracy",
        description="Deterministic variance bound and the slice counts "
        "needed for accuracy eps at the given confidence.",
    )
    p.add_argument("--d", type=int, required=True, help="degree bound of the system")
    p.add_argument("--n", type=int, required=True, help="manifold dimension")
    p.add_argument("--K", type=float, required=True, help="bound on sup f")
    p.add_argument(
        "--C", type=float, required=True, help="bound on sup |x|^2 over the manifold"
    )
    p.add_argument("--eps", type=float, default=0.1, help="accuracy target")
    p.add_argument(
        "--confidence", type=float, default=0.9, help="success probability target"
    )
    _add_common(p, "json", seeded=False)
    p.set_defaults(func=_cmd_plan)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SolverError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except SamplingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5
    except (ValueError, SliceMCError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
