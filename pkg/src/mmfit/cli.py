"""Experiment driver.

Subcommands: ``sim`` (noise/outlier sweeps), ``fit-homography``,
``fit-planes``, ``benchmark`` (manifest of cases), and ``gen-fixtures``
(synthetic inputs for the other commands). Every output file is validated
against its schema before the process exits; partially written outputs are
removed on failure. All randomness flows from --seed, so reruns with the
same flags are byte-identical at any --threads value.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ingest
from .errors import MmfitError
from .pipelines import (
    HomographyTask,
    PlaneTask,
    run_homography_segmentation,
    run_plane_segmentation,
)
from .simworld import (
    aggregate_rows,
    make_corner_scene,
    make_single_homography_matches,
    misclassification_error,
    render_wedge_scene,
    run_noise_sweep,
    run_outlier_sweep,
)
from .solver import OUTLIER

SCHEMA_VERSION = 1

HOMOGRAPHY_DEFAULTS = {"lam": 0.5, "beta": 100.0, "gamma": 20.0, "s": 100}
PLANE_DEFAULTS = {"lam": 1.0, "beta": 5000.0, "gamma": 9.0, "s": 200}


class CliError(MmfitError):
    """Configuration or input error; maps to exit code 2."""


class _Outputs:
    """Tracks output files so failures can clean up partial results."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def track(self, name):
        path = self.dir / name
        self.written.append(path)
        return path

    def write_json(self, name, obj, validator):
        validator(obj)
        path = self.track(name)
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", "utf-8")
        return path

    def write_csv(self, name, header, rows):
        path = self.track(name)
        lines = [",".join(header)]
        lines.extend(",".join(str(v) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n", "utf-8")
        return path

    def write_label_pgm(self, name, labels):
        """Label image as plain PGM; stored value = label + 1, 0 = outlier."""
        labels = np.asarray(labels, dtype=np.int64)
        h, w = labels.shape
        vals = labels + 1
        if vals.min() < 0:
            raise ValueError("labels below -1")
        maxval = max(1, int(vals.max()))
        body = "\n".join(" ".join(str(v) for v in row) for row in vals)
        path = self.track(name)
        path.write_text(f"P2\n{w} {h}\n{maxval}\n{body}\n", "ascii")
        return path

    def cleanup(self):
        for path in self.written:
            try:
                path.unlink()
            except OSError:
                pass


def _validate_summary(obj):
    for key in ("schema_version", "command", "seed", "params"):
        if key not in obj:
            raise ValueError(f"summary missing key {key!r}")
    if not isinstance(obj["params"], dict):
        raise ValueError("summary params must be a dict")


def _validate_labels_json(obj):
    for key in ("schema_version", "n_points", "labels"):
        if key not in obj:
            raise ValueError(f"labels.json missing key {key!r}")
    if len(obj["labels"]) != obj["n_points"]:
        raise ValueError("labels.json length mismatch")
    if not all(isinstance(v, int) and v >= OUTLIER for v in obj["labels"]):
        raise ValueError("labels.json entries must be ints >= -1")


def _validate_models_json(obj):
    for key in ("schema_version", "kind", "models"):
        if key not in obj:
            raise ValueError(f"models.json missing key {key!r}")


def _validate_report(obj):
    for key in ("schema_version", "per_case", "mean_me", "median_me"):
        if key not in obj:
            raise ValueError(f"report missing key {key!r}")
    for case in obj["per_case"]:
        if "name" not in case or "me" not in case:
            raise ValueError("report case missing name/me")


def _require_file(path, what):
    path = Path(path)
    if not path.is_file():
        raise CliError(f"{what} not found: {path}")
    return path


def _parse_float_list(text, flag):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"bad {flag} value {text!r}") from exc


def _energy_rows(trace):
    return [
        (i, repr(e.data), repr(e.smoothness), repr(e.label_cost), repr(e.total))
        for i, e in enumerate(trace)
    ]


def _common_flags(sub, defaults):
    sub.add_argument("--seed", type=int, default=0, help="master random seed")
    sub.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes for sweep trials (results are thread-count independent)",
    )
    sub.add_argument("--lambda", dest="lam", type=float, default=defaults["lam"],
                     help="smoothness weight")
    sub.add_argument("--beta", type=float, default=defaults["beta"],
                     help="per-model label cost")
    sub.add_argument("--gamma", type=float, default=defaults["gamma"],
                     help="constant outlier cost")
    sub.add_argument("--proposals", type=int, default=defaults["s"],
                     help="number of stochastic model proposals")
    sub.add_argument("--inner-iters", type=int, default=500,
                     help="primal-dual iterations per outer step")
    sub.add_argument("--max-outer", type=int, default=20,
                     help="maximum outer iterations")
    sub.add_argument("--method", choices=("coral", "ransac"), default="coral",
                     help="fitting method")
    sub.add_argument("--out", type=Path, default=Path("out"),
                     help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmfit",
        description="Geometric multi-model fitting: simulation sweeps, "
        "homography and plane segmentation, benchmarks.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    sim = subs.add_parser("sim", formatter_class=fmt,
                          help="simulated-scene noise/outlier sweeps")
    _common_flags(sim, HOMOGRAPHY_DEFAULTS)
    sim.add_argument("--sweep", choices=("noise", "outliers"), required=True)
    sim.add_argument("--sigmas", default="0.5,1.0,1.5",
                     help="comma list of pixel-noise levels (noise sweep)")
    sim.add_argument("--ratios", default="0.0,0.2,0.4",
                     help="comma list of outlier/inlier ratios (outlier sweep)")
    sim.add_argument("--trials", type=int, default=10, help="seeded trials per cell")
    sim.add_argument("--points-per-plane", type=int, default=60,
                     help="sampled points per simulated plane")
    sim.add_argument("--k", type=int, default=4, help="graph neighbors per point")
    sim.set_defaults(func=cmd_sim)

    fith = subs.add_parser("fit-homography", formatter_class=fmt,
                           help="segment a correspondence file into homographies")
    _common_flags(fith, HOMOGRAPHY_DEFAULTS)
    fith.add_argument("--input", type=Path, required=True,
                      help="correspondence CSV file")
    fith.add_argument("--sigma-pixel", type=float, default=1.0,
                      help="assumed pixel noise std")
    fith.add_argument("--k", type=int, default=4, help="graph neighbors per point")
    fith.set_defaults(func=cmd_fit_homography)

    fitp = subs.add_parser("fit-planes", formatter_class=fmt,
                           help="segment an RGB-D frame into planes")
    _common_flags(fitp, PLANE_DEFAULTS)
    fitp.add_argument("--depth", type=Path, required=True, help="depth grid file")
    fitp.add_argument("--image", type=Path, required=True, help="intensity PGM file")
    fitp.add_argument("--gt-labels", type=Path, default=None,
                      help="optional ground-truth label grid")
    fitp.add_argument("--sigma-xi", type=float, default=0.005,
                      help="inverse-depth noise std (1/m)")
    fitp.add_argument("--edge-alpha", type=float, default=10.0,
                      help="intensity-edge sharpness for smoothing weights")
    fitp.set_defaults(func=cmd_fit_planes)

    bench = subs.add_parser("benchmark", formatter_class=fmt,
                            help="run a manifest of cases and report mean/median ME")
    _common_flags(bench, HOMOGRAPHY_DEFAULTS)
    bench.add_argument("--manifest", type=Path, required=True,
                       help="JSON manifest of cases")
    # Per-kind defaults apply unless a flag (or a case "params" entry in the
    # manifest) overrides them.
    bench.set_defaults(lam=None, beta=None, gamma=None, proposals=None)
    bench.set_defaults(func=cmd_benchmark)

    gen = subs.add_parser("gen-fixtures", formatter_class=fmt,
                          help="write synthetic input fixtures")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, default=Path("fixtures"))
    gen.set_defaults(func=cmd_gen_fixtures)

    return parser


def _sweep_params(args):
    return {
        "lam": args.lam,
        "beta": args.beta,
        "gamma": args.gamma,
        "s": args.proposals,
        "k": args.k,
        "n_inner": args.inner_iters,
        "max_outer": args.max_outer,
    }


def cmd_sim(args, out: _Outputs):
    values = (
        _parse_float_list(args.sigmas, "--sigmas")
        if args.sweep == "noise"
        else _parse_float_list(args.ratios, "--ratios")
    )
    if not values or args.trials < 1:
        raise CliError("need at least one sweep value and one trial")
    scene = make_corner_scene(n_per_plane=args.points_per_plane)
    runner = run_noise_sweep if args.sweep == "noise" else run_outlier_sweep
    rows = runner(
        values,
        args.trials,
        methods=("coral", "ransac"),
        scene=scene,
        seed=args.seed,
        task_params=_sweep_params(args),
        n_jobs=args.threads,
    )
    out.write_csv(
        "sweep.csv",
        ("method", "sweep_value", "trial", "ME"),
        [(r.method, repr(r.sweep_value), r.trial, repr(r.me)) for r in rows],
    )
    cells = [
        {"method": m, "sweep_value": v, **stats}
        for (m, v), stats in aggregate_rows(rows).items()
    ]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "sim",
        "sweep": args.sweep,
        "values": values,
        "trials": args.trials,
        "seed": args.seed,
        "params": _sweep_params(args),
        "cells": cells,
    }
    out.write_json("summary.json", summary, _validate_summary)
    return 0


def _write_fit_outputs(out, args, result, me, kind, models_payload, params):
    labels = [int(v) for v in result.labels]
    out.write_json(
        "labels.json",
        {
            "schema_version": SCHEMA_VERSION,
            "n_points": len(labels),
            "labels": labels,
            "me": me,
        },
        _validate_labels_json,
    )
    out.write_json(
        "models.json",
        {"schema_version": SCHEMA_VERSION, "kind": kind, "models": models_payload},
        _validate_models_json,
    )
    out.write_csv(
        "energy_trace.csv",
        ("outer_iter", "data", "smoothness", "label_cost", "total"),
        _energy_rows(result.energy_trace),
    )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": f"fit-{kind}",
        "method": args.method,
        "seed": args.seed,
        "params": params,
        "n_models": len(result.models),
        "outer_iterations": result.iterations,
        "final_energy": result.energy_trace[-1].total,
        "me": me,
    }
    out.write_json("summary.json", summary, _validate_summary)


def cmd_fit_homography(args, out: _Outputs):
    path = _require_file(args.input, "correspondence file")
    cs, gt, _size = ingest.load_correspondences(path)
    task = HomographyTask(
        correspondences=cs,
        sigma_pixel=args.sigma_pixel,
        k=args.k,
        lam=args.lam,
        beta=args.beta,
        gamma=args.gamma,
        s=args.proposals,
        seed=args.seed,
        n_inner=args.inner_iters,
        max_outer=args.max_outer,
    )
    result = run_homography_segmentation(task, method=args.method)
    me = float(misclassification_error(result.labels, gt)) if len(gt) else None
    models_payload = [m.matrix.tolist() for m in result.models]
    params = {
        "lam": args.lam, "beta": args.beta, "gamma": args.gamma,
        "s": args.proposals, "k": args.k, "sigma_pixel": args.sigma_pixel,
        "n_inner": args.inner_iters, "max_outer": args.max_outer,
    }
    _write_fit_outputs(out, args, result, me, "homography", models_payload, params)
    return 0


def cmd_fit_planes(args, out: _Outputs):
    depth_path = _require_file(args.depth, "depth file")
    image_path = _require_file(args.image, "intensity file")
    gt = None
    if args.gt_labels is not None:
        gt_path = _require_file(args.gt_labels, "ground-truth label file")
        gt = ingest.load_label_grid(gt_path)
    frame = ingest.load_rgbd(depth_path, image_path)
    task = PlaneTask(
        xi=frame.xi,
        intensity=frame.intensity,
        sigma_xi=args.sigma_xi,
        edge_alpha=args.edge_alpha,
        lam=args.lam,
        beta=args.beta,
        gamma=args.gamma,
        s=args.proposals,
        seed=args.seed,
        n_inner=args.inner_iters,
        max_outer=args.max_outer,
    )
    result, label_img = run_plane_segmentation(task, method=args.method)
    me = None
    if gt is not None:
        if gt.shape != label_img.shape:
            raise CliError("ground-truth labels and depth image sizes differ")
        me = float(misclassification_error(label_img.ravel(), gt.ravel()))
    out.write_label_pgm("labels.pgm", label_img)
    models_payload = [{"w": m.w.tolist(), "c": m.c} for m in result.models]
    params = {
        "lam": args.lam, "beta": args.beta, "gamma": args.gamma,
        "s": args.proposals, "sigma_xi": args.sigma_xi,
        "edge_alpha": args.edge_alpha,
        "n_inner": args.inner_iters, "max_outer": args.max_outer,
    }
    _write_fit_outputs(out, args, result, me, "planes", models_payload, params)
    return 0


def _benchmark_params(args, kind, case):
    defaults = HOMOGRAPHY_DEFAULTS if kind == "homography" else PLANE_DEFAULTS
    eff = dict(defaults)
    for flag, key in (("lam", "lam"), ("beta", "beta"), ("gamma", "gamma"),
                      ("proposals", "s")):
        val = getattr(args, flag)
        if val is not None:
            eff[key] = val
    eff.update(case.get("params", {}))
    return eff


def cmd_benchmark(args, out: _Outputs):
    manifest_path = _require_file(args.manifest, "manifest")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"manifest is not valid JSON: {exc}") from exc
    cases = manifest.get("cases", [])
    if not cases:
        raise CliError(f"manifest lists no cases: {manifest_path}")
    base = manifest_path.parent

    per_case = []
    for case in cases:
        name = case.get("name")
        kind = case.get("kind")
        if not name or kind not in ("homography", "planes"):
            raise CliError(f"manifest case needs a name and kind: {case!r}")
        eff = _benchmark_params(args, kind, case)
        if kind == "homography":
            path = _require_file(base / case["correspondences"], f"case {name}")
            cs, gt, _ = ingest.load_correspondences(path)
            task = HomographyTask(
                correspondences=cs,
                lam=eff["lam"], beta=eff["beta"], gamma=eff["gamma"], s=eff["s"],
                seed=args.seed, n_inner=args.inner_iters, max_outer=args.max_outer,
            )
            result = run_homography_segmentation(task, method=args.method)
            me = float(misclassification_error(result.labels, gt))
        else:
            depth = _require_file(base / case["depth"], f"case {name} depth")
            image = _require_file(base / case["intensity"], f"case {name} intensity")
            gt_path = _require_file(base / case["gt_labels"], f"case {name} labels")
            frame = ingest.load_rgbd(depth, image)
            gt = ingest.load_label_grid(gt_path)
            task = PlaneTask(
                xi=frame.xi, intensity=frame.intensity,
                lam=eff["lam"], beta=eff["beta"], gamma=eff["gamma"], s=eff["s"],
                seed=args.seed, n_inner=args.inner_iters, max_outer=args.max_outer,
            )
            _result, label_img = run_plane_segmentation(task, method=args.method)
            me = float(misclassification_error(label_img.ravel(), gt.ravel()))
        per_case.append({"name": name, "kind": kind, "me": me})
        print(f"case {name}: ME = {me:.6f}")

    mes = np.array([c["me"] for c in per_case])
    report = {
        "schema_version": SCHEMA_VERSION,
        "method": args.method,
        "seed": args.seed,
        "per_case": per_case,
        "mean_me": float(mes.mean()),
        "median_me": float(np.median(mes)),
    }
    out.write_json("report.json", report, _validate_report)
    print(f"mean ME = {report['mean_me']:.6f}, median ME = {report['median_me']:.6f}")
    return 0


def cmd_gen_fixtures(args, out: _Outputs):
    """Write synthetic inputs: a single-homography CSV, a two-plane wedge
    frame, and a 3-case benchmark manifest with engineered MEs 0 / 0.1 / 0.2."""
    cs, _h = make_single_homography_matches(200, seed=args.seed)
    ingest.save_correspondences(
        out.track("single_h.csv"), cs, np.zeros(len(cs), dtype=np.int64), (640, 480)
    )

    xi, intensity, gt, _planes = render_wedge_scene(width=48, height=36)
    depth = np.where(xi > 0, 1.0 / np.where(xi > 0, xi, 1.0), 0.0)
    ingest.save_depth_grid(out.track("wedge_depth.pgm"), depth, scale=0.0005)
    ingest.save_intensity(out.track("wedge_intensity.pgm"), intensity)
    ingest.save_label_grid(out.track("wedge_gt.grid"), gt)

    cases = []
    for frac in (0.0, 0.1, 0.2):
        cs_b, _ = make_single_homography_matches(200, seed=args.seed + 1)
        labels = np.zeros(len(cs_b), dtype=np.int64)
        n_flip = int(round(frac * len(cs_b)))
        labels[:n_flip] = 1  # corrupted GT rows: engineered mismatch fraction
        name = f"bench_{int(frac * 100):02d}"
        ingest.save_correspondences(out.track(f"{name}.csv"), cs_b, labels, (640, 480))
        cases.append(
            {"name": name, "kind": "homography", "correspondences": f"{name}.csv"}
        )
    manifest = {"schema_version": SCHEMA_VERSION, "cases": cases}
    out.track("manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    print(f"fixtures written to {out.dir}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and bad flags (2)
        return int(exc.code or 0)
    out = _Outputs(args.out)
    try:
        return args.func(args, out)
    except (CliError, MmfitError, FileNotFoundError, OSError, ValueError) as exc:
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        out.cleanup()
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
