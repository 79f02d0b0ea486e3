"""Command-line driver wiring generators, metrics, certificates, and
checkers into reproducible runs.

Every artifact embeds the resolved configuration, including the seed;
JSON is written with sorted keys and no timestamps, so identical
configurations produce byte-identical files.  Wall-clock timings go to
a separate plain-text log.  Exit status: 0 on success, 2 when a check
fails, 1 on usage errors or bad inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .atlas import classify_approx, piece_gram, spline_cover, spline_svg
from .boxdim import box_counts, fit_box_dimension, loglog_svg, scale_ladder, series_csv
from .geometry import read_csv, write_csv
from .ifs import parse_system, prefractal
from .metrics import shape_difference
from .perturb import (
    PerturbationSchedule,
    certify_perturbation,
    perturb_composed,
    perturb_interval_cantor,
    structure_consistency,
    structure_from_ifs,
)
from .quasi import (
    DotPattern,
    check_quasi_prototiles,
    crystal_check,
    dodecagon_packing,
    monte_carlo_density,
    packing_density,
    quasi_symmetry_lambda,
    unit_square,
    wavy_partition,
)
from .registration import LIGHT_PARAMS
from .geometry import Transform

__all__ = ["main"]

_SEED_ENV = "FRACSHAPE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _echo(args: argparse.Namespace) -> dict:
    cfg = {}
    for key, value in vars(args).items():
        if key == "func" or key.startswith("_"):
            continue
        if isinstance(value, Path):
            value = str(value)
        cfg[key] = value
    cfg["version"] = __version__
    return cfg


def _payload(args: argparse.Namespace, results: dict) -> dict:
    return {"config": _echo(args), "results": results}


def _write_json(path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="ascii")


def _search_params(args: argparse.Namespace):
    budget = getattr(args, "budget", None)
    if budget is None:
        return LIGHT_PARAMS
    if budget < 50:
        raise UsageError("--budget must be at least 50")
    return replace(LIGHT_PARAMS, budget=int(budget))


def _transform_dict(t: Transform) -> dict:
    return {
        "ortho": t.ortho.tolist(),
        "translation": t.translation.tolist(),
        "ratio": t.ratio,
    }


def _parse_scales(text: str) -> np.ndarray:
    ladder = re.fullmatch(r"pow(\d+):(\d+)\.\.(\d+)", text.strip())
    if ladder:
        base, lo, hi = (int(g) for g in ladder.groups())
        if base < 2:
            raise UsageError("scale ladder base must be at least 2")
        if lo > hi:
            raise UsageError("scale ladder range must be increasing")
        return scale_ladder(1.0 / base, range(lo, hi + 1))
    try:
        values = sorted({float(part) for part in text.split(",")}, reverse=True)
    except ValueError as exc:
        raise UsageError(f"cannot parse scales {text!r}: {exc}") from None
    if not values:
        raise UsageError("at least one scale is required")
    return np.asarray(values, dtype=float)


def _build_structure(args: argparse.Namespace):
    mode = args.mode
    if mode == "none":
        return structure_from_ifs(parse_system(args.system), args.depth)
    if mode == "interval":
        schedule = PerturbationSchedule(
            mode="interval", seed=args.seed, b0=args.b0, randomize=True
        )
        return perturb_interval_cantor(schedule, args.depth)
    if mode in ("rotation", "similitude"):
        schedule = PerturbationSchedule(
            mode=mode,
            seed=args.seed,
            theta0=args.theta0,
            r0=args.r0,
            lam=args.lam,
            randomize=True,
        )
        return perturb_composed(parse_system(args.system), schedule, args.depth)
    raise UsageError(f"unknown perturbation mode {mode!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    system = parse_system(args.preset)
    base = system.base_points(args.base_spacing) if args.base_spacing else None
    cloud = prefractal(system, base, args.depth)
    echo = json.dumps(_echo(args), sort_keys=True)
    write_csv(cloud, args.output, comments=(f"config={echo}",))
    print(f"{args.output}: {cloud.n} points, dim {cloud.dim}, eta {cloud.eta:.3g}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    a = read_csv(args.first)
    b = read_csv(args.second)
    report = shape_difference(a, b, args.variant, _search_params(args))
    results = {
        "variant": report.variant.name,
        "lower": report.lower,
        "upper": report.upper,
        "evals": report.evals,
        "search_tol": report.search_tol,
        "witness": _transform_dict(report.witness),
    }
    _write_json(args.output, _payload(args, results))
    return 0


def cmd_certify(args: argparse.Namespace) -> int:
    system = _build_structure(args)
    certificate = certify_perturbation(system, params=_search_params(args))
    results = certificate.to_dict()
    results["consistency"] = structure_consistency(system)
    _write_json(args.output, _payload(args, results))
    if args.max_delta is not None and certificate.delta_hat > args.max_delta:
        print(
            f"certificate delta_hat {certificate.delta_hat:.6g} exceeds "
            f"--max-delta {args.max_delta:.6g}",
            file=sys.stderr,
        )
        return 2
    return 0


def cmd_dimension(args: argparse.Namespace) -> int:
    cloud = read_csv(args.input)
    scales = _parse_scales(args.scales)
    series = box_counts(cloud, scales)
    fit = fit_box_dimension(series)
    Path(args.output).write_text(series_csv(series), encoding="ascii")
    results = {"series": series.to_dict(), "fit": fit.to_dict()}
    json_path = args.json or str(Path(args.output).with_suffix(".json"))
    _write_json(json_path, _payload(args, results))
    if args.plot:
        svg_path = str(Path(args.output).with_suffix(".svg"))
        Path(svg_path).write_text(loglog_svg(series, fit), encoding="ascii")
    print(f"slope {fit.slope:.5f} over {len(scales)} scales -> {args.output}")
    return 0


def cmd_atlas(args: argparse.Namespace) -> int:
    system = structure_from_ifs(parse_system(args.system), args.depth)
    gram = piece_gram(system, params=_search_params(args))
    approx = classify_approx(gram)
    spline = spline_cover(gram, args.delta, level=args.level)
    results = {
        "approx": approx.to_dict(),
        "spline": spline.to_dict(),
        "words": list(gram_labels(gram)),
    }
    _write_json(args.output, _payload(args, results))
    if args.plot:
        svg_path = str(Path(args.output or "atlas.json").with_suffix(".svg"))
        Path(svg_path).write_text(spline_svg(spline), encoding="ascii")
    return 0


def gram_labels(gram) -> list:
    return [w.label for w in gram.words]


def cmd_tiling(args: argparse.Namespace) -> int:
    patch = wavy_partition(
        args.delta, seed=args.seed, nx=args.nx, ny=args.ny, margin=args.margin
    )
    check_delta = args.delta if args.check_delta is None else args.check_delta
    proto = check_quasi_prototiles(
        patch,
        [unit_square()],
        [check_delta],
        size=args.size,
        params=_search_params(args),
    )
    symmetries = {}
    maps = {
        "tau_x": Transform(np.eye(2), [1.0, 0.0]),
        "tau_y": Transform(np.eye(2), [0.0, 1.0]),
        "quarter_turn": Transform(np.array([[0.0, -1.0], [1.0, 0.0]]), [0.0, 0.0]),
    }
    for name, transform in maps.items():
        symmetries[name] = quasi_symmetry_lambda(patch, transform).lambda_hat
    results = {
        "tiles": patch.n,
        "prototile": proto.to_dict(),
        "lambda_hat": symmetries,
    }
    _write_json(args.output, _payload(args, results))
    return 0 if proto.passed else 2


def cmd_pack(args: argparse.Namespace) -> int:
    if args.collapse:
        interlocked = packing_density(dodecagon_packing(0.0, "interlocked"))
        stacked = packing_density(dodecagon_packing(args.epsilon, "stacked"))
        results = {
            "interlocked": interlocked.to_dict(),
            "stacked": stacked.to_dict(),
            "difference": interlocked.density - stacked.density,
        }
    else:
        patch = dodecagon_packing(args.epsilon, args.mode)
        report = packing_density(patch)
        results = {args.mode: report.to_dict()}
        if args.mc:
            estimate = monte_carlo_density(patch, n=args.mc, seed=args.seed)
            results["monte_carlo"] = {"estimate": estimate, "samples": args.mc}
    _write_json(args.output, _payload(args, results))
    return 0


def cmd_crystal(args: argparse.Namespace) -> int:
    if args.demo_jitter is not None:
        grid = np.stack(
            np.meshgrid(np.arange(5.0), np.arange(5.0)), -1
        ).reshape(-1, 2)
        reference = DotPattern(grid)
        rng = np.random.default_rng(args.seed)
        bound = args.demo_jitter / np.sqrt(2.0)
        pattern = DotPattern(grid + rng.uniform(-bound, bound, grid.shape))
    else:
        if not args.pattern or not args.reference:
            raise UsageError("crystal needs --pattern and --reference, or --demo-jitter")
        pattern = DotPattern(read_csv(args.pattern).points)
        reference = DotPattern(read_csv(args.reference).points)
    report = crystal_check(pattern, reference, args.lam, params=_search_params(args))
    _write_json(args.output, _payload(args, report.to_dict()))
    return 0 if report.passed else 2


def cmd_repro(args: argparse.Namespace) -> int:
    if not args.all:
        raise UsageError("repro currently only supports --all")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = str(args.seed)
    jobs = [
        (
            "generate-cantor",
            ["generate", "--preset", "cantor", "--depth", "6", "--seed", seed,
             "-o", str(out / "cantor6.csv")],
        ),
        (
            "generate-koch",
            ["generate", "--preset", "koch", "--depth", "3", "--seed", seed,
             "-o", str(out / "koch3.csv")],
        ),
        (
            "generate-sierpinski",
            ["generate", "--preset", "sierpinski", "--depth", "3", "--seed", seed,
             "-o", str(out / "sierpinski3.csv")],
        ),
        (
            "compare",
            ["compare", str(out / "koch3.csv"), str(out / "sierpinski3.csv"),
             "--variant", "isometry-radius", "--budget", "1500", "--seed", seed,
             "-o", str(out / "compare.json")],
        ),
        (
            "certify",
            ["certify", "--mode", "interval", "--b0", "1.2", "--depth", "3",
             "--seed", seed, "--budget", "1500", "-o", str(out / "certify.json")],
        ),
        (
            "dimension",
            ["dimension", str(out / "cantor6.csv"), "--scales", "pow3:2..5",
             "--seed", seed, "-o", str(out / "dimension.csv"),
             "--json", str(out / "dimension.json"), "--plot"],
        ),
        (
            "atlas",
            ["atlas", "--system", "cantor", "--depth", "2", "--delta", "0.1",
             "--seed", seed, "--budget", "1500", "-o", str(out / "atlas.json")],
        ),
        (
            "tiling",
            ["tiling", "--delta", "0.1", "--seed", seed, "--nx", "4", "--ny", "4",
             "--margin", "0.85", "--size", "diameter", "--budget", "1500",
             "-o", str(out / "tiling.json")],
        ),
        (
            "pack",
            ["pack", "--collapse", "--epsilon", "0.2", "--seed", seed,
             "-o", str(out / "pack.json")],
        ),
        (
            "crystal",
            ["crystal", "--demo-jitter", "0.04", "--lam", "0.05", "--seed", seed,
             "--budget", "1500", "-o", str(out / "crystal.json")],
        ),
    ]
    statuses = {}
    log_lines = []
    worst = 0
    for name, argv in jobs:
        started = time.time()
        code = main(argv)
        elapsed = time.time() - started
        statuses[name] = code
        worst = max(worst, code)
        log_lines.append(f"{name}: exit {code} in {elapsed:.2f}s")
    summary = {
        "config": _echo(args),
        "results": {"jobs": statuses, "artifacts": sorted(p.name for p in out.iterdir() if p.suffix in (".csv", ".json", ".svg"))},
    }
    # run.log carries the wall-clock timings and is excluded from the
    # byte-identical guarantee; summary.json carries none.
    _write_json(out / "summary.json", summary)
    (out / "run.log").write_text("\n".join(log_lines) + "\n", encoding="ascii")
    print(f"repro suite -> {out} ({len(jobs)} jobs, worst exit {worst})")
    return worst


# ---------------------------------------------------------------------------
# parser


def _add_common(sub: argparse.ArgumentParser, budget: bool = True) -> None:
    sub.add_argument("--seed", type=int, default=0, help="run seed, recorded in outputs")
    sub.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="cap on worker parallelism; the numeric kernels run on one worker",
    )
    if budget:
        sub.add_argument(
            "--budget", type=int, default=None, help="alignment search budget"
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="fracshape", description=__doc__)
    subs = parser.add_subparsers(dest="subcommand", required=True)

    gen = subs.add_parser("generate", help="write a prefractal point-cloud CSV")
    gen.add_argument("--preset", required=True, help="system name, e.g. koch or c_lambda:0.5")
    gen.add_argument("--depth", type=int, default=4)
    gen.add_argument("--base-spacing", type=float, default=None,
                     help="sample the base segment at this spacing instead of the default base")
    gen.add_argument("-o", "--output", required=True)
    _add_common(gen, budget=False)
    gen.set_defaults(func=cmd_generate)

    cmp_ = subs.add_parser("compare", help="certified shape difference between two CSV clouds")
    cmp_.add_argument("first")
    cmp_.add_argument("second")
    cmp_.add_argument("--variant", default="isometry",
                      help="metric variant, e.g. isometry, rigid-radius, none-diameter")
    cmp_.add_argument("-o", "--output", default=None)
    _add_common(cmp_)
    cmp_.set_defaults(func=cmd_compare)

    cert = subs.add_parser("certify", help="quasi-self-similarity certificate for a structure system")
    cert.add_argument("--system", default="cantor")
    cert.add_argument("--mode", default="none",
                      choices=["none", "interval", "rotation", "similitude"])
    cert.add_argument("--depth", type=int, default=3)
    cert.add_argument("--b0", type=float, default=1.0, help="interval-mode right endpoint bound")
    cert.add_argument("--theta0", type=float, default=0.0, help="rotation bound in radians")
    cert.add_argument("--r0", type=float, default=0.0, help="translation deviation bound")
    cert.add_argument("--lam", type=float, default=0.0, help="similitude-mode deviation budget")
    cert.add_argument("--max-delta", type=float, default=None,
                      help="fail (exit 2) when delta_hat exceeds this")
    cert.add_argument("-o", "--output", default=None)
    _add_common(cert)
    cert.set_defaults(func=cmd_certify)

    dim = subs.add_parser("dimension", help="box-counting series and dimension fit")
    dim.add_argument("input")
    dim.add_argument("--scales", required=True, help="pow3:2..8 or a comma list")
    dim.add_argument("-o", "--output", required=True, help="series CSV path")
    dim.add_argument("--json", default=None, help="fit report path (default: output with .json)")
    dim.add_argument("--plot", action="store_true", help="also write a log-log SVG")
    _add_common(dim, budget=False)
    dim.set_defaults(func=cmd_dimension)

    atl = subs.add_parser("atlas", help="piece distances, approximation senses, spline cover")
    atl.add_argument("--system", default="cantor")
    atl.add_argument("--depth", type=int, default=2)
    atl.add_argument("--delta", type=float, default=0.1)
    atl.add_argument("--level", type=int, default=0)
    atl.add_argument("--plot", action="store_true", help="also write a gallery SVG")
    atl.add_argument("-o", "--output", default=None)
    _add_common(atl)
    atl.set_defaults(func=cmd_atlas)

    til = subs.add_parser("tiling", help="wavy-partition prototile and symmetry checks")
    til.add_argument("--delta", type=float, default=0.1, help="wall amplitude")
    til.add_argument("--check-delta", type=float, default=None,
                     help="prototile budget (default: the amplitude)")
    til.add_argument("--size", default="diameter", choices=["radius", "diameter"],
                     help="prototile budget scale")
    til.add_argument("--nx", type=int, default=6)
    til.add_argument("--ny", type=int, default=6)
    til.add_argument("--margin", type=float, default=1.25)
    til.add_argument("-o", "--output", default=None)
    _add_common(til)
    til.set_defaults(func=cmd_tiling)

    pac = subs.add_parser("pack", help="windowed packing density of dodecagon columns")
    pac.add_argument("--epsilon", type=float, default=0.0)
    pac.add_argument("--mode", default="stacked", choices=["interlocked", "stacked"])
    pac.add_argument("--collapse", action="store_true",
                     help="report interlocked(0) vs stacked(epsilon) densities")
    pac.add_argument("--mc", type=int, default=0,
                     help="also run a sampling estimate with this many points")
    pac.add_argument("-o", "--output", default=None)
    _add_common(pac, budget=False)
    pac.set_defaults(func=cmd_pack)

    cry = subs.add_parser("crystal", help="spacing-relative crystal certification")
    cry.add_argument("--pattern", default=None, help="pattern CSV")
    cry.add_argument("--reference", default=None, help="reference CSV")
    cry.add_argument("--lam", type=float, required=True)
    cry.add_argument("--demo-jitter", type=float, default=None,
                     help="use a seeded jittered 5x5 grid instead of files")
    cry.add_argument("-o", "--output", default=None)
    _add_common(cry)
    cry.set_defaults(func=cmd_crystal)

    rep = subs.add_parser("repro", help="deterministic multi-module artifact suite")
    rep.add_argument("--all", action="store_true")
    rep.add_argument("--out", default="repro_out")
    _add_common(rep, budget=False)
    rep.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if _SEED_ENV in os.environ and hasattr(args, "seed"):
        try:
            args.seed = int(os.environ[_SEED_ENV])
        except ValueError:
            print(f"usage error: {_SEED_ENV} must be an integer", file=sys.stderr)
            return 1
    if getattr(args, "jobs", 1) < 1:
        print("usage error: --jobs must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
