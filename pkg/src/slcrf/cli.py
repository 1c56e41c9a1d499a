"""Command-line entry point: ``slcrf <command> [options]``.

Commands: ``synth``, ``train``, ``classify``, ``eval``, ``gradcheck``,
``ablate`` and ``sweep``.  Every run writes into its own directory
(``<timestamp>_seed<seed>`` under ``--runs``) together with a
``metadata.json`` holding the fully resolved configuration; passing that
file back through ``--config`` repeats the run.

``SLCRF_THREADS`` caps the BLAS thread count.
"""

import os

if os.environ.get("SLCRF_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["SLCRF_THREADS"])

import argparse
import csv
import datetime
import itertools
import json
import logging
import sys

import numpy as np

from . import __version__, data, evaluation, gradcheck, optimizer
from .autoencoder import load_checkpoint, save_checkpoint
from .crf import CrfWeights, MODES
from .errors import ConfigError, DivergenceError, FormatError, SlcrfError

log = logging.getLogger("slcrf")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED, EXIT_FORMAT = 0, 1, 2, 3, 4

# flag -> Hyperparams field
HP_FLAGS = {
    "labeled_frac": ("--labeled-frac", float), "patch": ("--patch", int),
    "latent": ("--latent", int), "k": ("--knn", int), "omega": ("--omega", float),
    "epsilon": ("--epsilon", float), "alpha": ("--alpha", float), "beta": ("--beta", float),
    "gamma": ("--gamma", float), "eta": ("--eta", float), "lambda1": ("--lambda1", float),
    "lambda2": ("--lambda2", float), "delta1": ("--delta1", float),
    "delta2": ("--delta2", float), "tau": ("--tau", float), "batch": ("--batch", int),
    "max_outer_iters": ("--iters", int), "seed": ("--seed", int),
}

SWEEP_GRIDS = {
    "k": list(range(3, 11)),
    "lambda1": [10.0 ** e for e in range(-9, 10, 3)],
    "lambda2": [10.0 ** e for e in range(-9, 10, 3)],
    "beta": [10.0 ** e for e in range(-4, 5, 2)],
    "gamma": [10.0 ** e for e in range(-2, 3)],
    "eta": [10.0 ** e for e in range(-2, 5)],
}


class UsageError(SlcrfError):
    pass


def _hp_args(p):
    g = p.add_argument_group("hyperparameters")
    for field, (flag, typ) in HP_FLAGS.items():
        g.add_argument(flag, dest=field, type=typ, default=None)
    g.add_argument("--pairwise-mode", dest="pairwise_mode", choices=MODES, default=None)
    g.add_argument("--f64", dest="f64", action=argparse.BooleanOptionalAction, default=None,
                   help="64-bit arithmetic (default on)")
    g.add_argument("--preset", choices=sorted(optimizer.PRESETS), default=None)
    g.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any hyperparameter by name")
    g.add_argument("--config", default=None, help="metadata.json of an earlier run")


def _run_args(p):
    p.add_argument("--runs", default="runs", help="parent directory for run directories")
    p.add_argument("--run-dir", default=None, help="exact run directory (overrides --runs)")
    p.add_argument("--no-timing", dest="timing", action="store_false",
                   help="write 0 in the trace seconds column (reproducible files)")


def build_parser():
    p = argparse.ArgumentParser(prog="slcrf", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic scene")
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--size", type=int, default=24)
    s.add_argument("--bands", type=int, default=12)
    s.add_argument("--noise", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="header path, e.g. scene.json")

    for name, helptext in (("train", "train SLCRF and evaluate it"),
                           ("ablate", "SLCRF, RE-CRF, SL-only and PCA-SC on one split")):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("--scene", default=None, help="scene header (JSON)")
        t.add_argument("--labels", default=None, help="label file overriding the header's")
        _hp_args(t)
        _run_args(t)

    c = sub.add_parser("classify", help="label every pixel with a trained checkpoint")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--scene", required=True)
    c.add_argument("--out", required=True, help="output PPM map")

    e = sub.add_parser("eval", help="metrics of a run directory or a saved prediction")
    e.add_argument("--run", default=None, help="run directory written by train")
    e.add_argument("--prediction", default=None, help="u16 prediction grid")
    e.add_argument("--scene", default=None)
    e.add_argument("--out", default=None, help="metrics CSV (default: alongside the input)")

    g = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    g.add_argument("--seeds", type=int, default=5)
    g.add_argument("--tol", type=float, default=1e-4)

    w = sub.add_parser("sweep", help="grid search one hyperparameter")
    w.add_argument("--scene", default=None)
    w.add_argument("--labels", default=None)
    w.add_argument("--param", required=True, choices=sorted(SWEEP_GRIDS))
    w.add_argument("--values", default=None, help="comma-separated grid (default: built-in)")
    w.add_argument("--budget", type=int, default=None, help="evaluate at most this many points")
    _hp_args(w)
    _run_args(w)
    return p


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _parse_override(text):
    if "=" not in text:
        raise UsageError(f"--set expects KEY=VALUE, got {text!r}")
    key, val = text.split("=", 1)
    try:
        val = json.loads(val)
    except json.JSONDecodeError:
        pass
    return key.strip().replace("-", "_"), val


def resolve(args):
    """Hyperparameters and scene paths: config file, then preset, then flags."""
    meta = {}
    if getattr(args, "config", None):
        meta = _read_json(args.config)
    hp = optimizer.Hyperparams.from_dict(meta.get("hyperparams", {}))
    # a stored config already has its preset folded in
    if args.preset:
        hp = hp.updated(**optimizer.PRESETS[args.preset])
    preset = args.preset or meta.get("preset")
    changes = {f: getattr(args, f) for f in list(HP_FLAGS) + ["pairwise_mode", "f64"]
               if getattr(args, f, None) is not None}
    changes.update(dict(_parse_override(o) for o in args.overrides))
    try:
        hp = hp.updated(**changes)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    scene = args.scene or meta.get("scene")
    labels = getattr(args, "labels", None) or meta.get("labels")
    if scene is None:
        raise UsageError("--scene (or --config) is required")
    return hp, preset, scene, labels


def _read_json(path):
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    with open(path) as fh:
        return json.load(fh)


def _load(scene_path, labels_path=None):
    for path in (scene_path, labels_path):
        if path is not None and not os.path.exists(path):
            raise UsageError(f"no such file: {path}")
    return data.normalize(data.load_scene(scene_path, labels_path))


def make_run_dir(args, seed):
    if args.run_dir:
        path = args.run_dir
    else:
        stamp = datetime.datetime.now().strftime("%Y%m%dT%H%M%S")
        path = os.path.join(args.runs, f"{stamp}_seed{seed}")
        k = 1
        while os.path.exists(path):
            k += 1
            path = os.path.join(args.runs, f"{stamp}_seed{seed}_{k}")
    os.makedirs(path, exist_ok=True)
    return path


def write_metadata(run_dir, command, hp, preset, scene, labels, extra=None):
    meta = {"command": command, "version": __version__, "preset": preset,
            "scene": os.path.abspath(scene), "labels": labels and os.path.abspath(labels),
            "hyperparams": hp.to_dict()}
    meta.update(extra or {})
    with open(os.path.join(run_dir, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    return meta


def write_split(path, labeled, unlabeled):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "role"])
        for role, coords in (("labeled", labeled), ("unlabeled", unlabeled)):
            for y, x in np.asarray(coords).tolist():
                w.writerow([y, x, role])


def read_split(path):
    lab, unl = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            (lab if row["role"] == "labeled" else unl).append((int(row["row"]), int(row["col"])))
    return np.array(lab, dtype=np.int64).reshape(-1, 2), np.array(unl, dtype=np.int64).reshape(-1, 2)


def save_prediction(path, grid):
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(grid, dtype="<u2").tobytes())


def head_extras(weights):
    return {"crf.W_hl": weights.W_hl, "crf.b_hl": weights.b_hl,
            "crf.h2": np.array([weights.h2, weights.h2_max])}


def head_from_extras(extras):
    h2, h2_max = extras["crf.h2"].tolist()
    return CrfWeights(extras["crf.W_hl"], extras["crf.b_hl"], h2, h2_max)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args):
    scene = data.synthesize(args.classes, args.size, args.size, args.bands, args.noise, args.seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    data.save_scene(scene, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _split(scene, hp):
    return data.split_labels(scene, data.SplitSpec(hp.labeled_frac, hp.seed))


def cmd_train(args):
    hp, preset, scene_path, labels_path = resolve(args)
    scene = _load(scene_path, labels_path)
    labeled, unlabeled = _split(scene, hp)
    run_dir = make_run_dir(args, hp.seed)
    write_metadata(run_dir, "train", hp, preset, scene_path, labels_path)
    write_split(os.path.join(run_dir, "split.csv"), labeled, unlabeled)
    tdata = optimizer.prepare_data(scene, labeled, hp)
    try:
        result = optimizer.run(tdata, hp)
    except DivergenceError as exc:
        if exc.trace is not None:
            exc.trace.to_csv(os.path.join(run_dir, "trace.csv"), timing=args.timing)
        raise
    result.trace.to_csv(os.path.join(run_dir, "trace.csv"), timing=args.timing)
    extras = head_extras(result.weights)
    extras.update({"state.Z": result.state.Z, "state.M": result.state.M, "state.T": result.state.T})
    save_checkpoint(os.path.join(run_dir, "checkpoint.slcrf"), result.network, extras)
    pred = optimizer.predict(result.network, result.weights, scene, hp)
    save_prediction(os.path.join(run_dir, "prediction.u16"), pred)
    evaluation.render_map(pred, os.path.join(run_dir, "map.ppm"), classes=scene.classes)
    report = evaluation.evaluate_map(pred, scene.labels, unlabeled, scene.classes)
    evaluation.write_metrics_csv(os.path.join(run_dir, "metrics.csv"), {"SLCRF": report},
                                 scene.classes)
    print(f"{run_dir}: OA {report.oa:.4f} AA {report.aa:.4f} kappa {report.kappa:.4f} "
          f"({result.trace.stopped} after {len(result.trace)} iterations)")
    return EXIT_OK


def cmd_classify(args):
    for path in (args.checkpoint, args.scene):
        if not os.path.exists(path):
            raise UsageError(f"no such file: {path}")
    network, extras = load_checkpoint(args.checkpoint)
    if "crf.W_hl" not in extras:
        raise FormatError(f"{args.checkpoint}: no classifier head stored")
    weights = head_from_extras(extras)
    scene = _load(args.scene)
    patch = network.arch.input_shape[0]
    hp = optimizer.Hyperparams(patch=patch, f64=np.dtype(network.dtype) == np.float64)
    pred = optimizer.predict(network, weights, scene, hp)
    evaluation.render_map(pred, args.out, classes=scene.classes)
    save_prediction(os.path.splitext(args.out)[0] + ".u16", pred)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args):
    if args.run:
        meta = _read_json(os.path.join(args.run, "metadata.json"))
        scene = _load(meta["scene"], meta.get("labels"))
        _, unlabeled = read_split(os.path.join(args.run, "split.csv"))
        pred_path = os.path.join(args.run, "prediction.u16")
        out = args.out or os.path.join(args.run, "eval_metrics.csv")
    elif args.prediction and args.scene:
        scene = _load(args.scene)
        coords = np.argwhere(scene.labels > 0)
        unlabeled = coords
        pred_path = args.prediction
        out = args.out or os.path.splitext(args.prediction)[0] + "_metrics.csv"
    else:
        raise UsageError("eval needs --run, or --prediction with --scene")
    if not os.path.exists(pred_path):
        raise UsageError(f"no such file: {pred_path}")
    raw = np.fromfile(pred_path, dtype="<u2")
    if raw.size != scene.labels.size:
        raise FormatError(f"{pred_path}: {raw.size} labels for a {scene.labels.shape} scene")
    pred = raw.reshape(scene.labels.shape).astype(np.int64)
    report = evaluation.evaluate_map(pred, scene.labels, unlabeled, scene.classes)
    evaluation.write_metrics_csv(out, {"SLCRF": report}, scene.classes)
    print(f"OA {report.oa:.4f} AA {report.aa:.4f} kappa {report.kappa:.4f} -> {out}")
    return EXIT_OK


def cmd_gradcheck(args):
    results = gradcheck.run_suites(seeds=range(args.seeds), tol=args.tol)
    ok = True
    for name, err in results:
        passed = err <= args.tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: max relative error {err:.3e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_ablate(args):
    hp, preset, scene_path, labels_path = resolve(args)
    scene = _load(scene_path, labels_path)
    labeled, unlabeled = _split(scene, hp)
    run_dir = make_run_dir(args, hp.seed)
    write_metadata(run_dir, "ablate", hp, preset, scene_path, labels_path)
    write_split(os.path.join(run_dir, "split.csv"), labeled, unlabeled)
    reports = evaluation.compare_methods(scene, labeled, unlabeled, hp)
    evaluation.write_metrics_csv(os.path.join(run_dir, "metrics.csv"), reports, scene.classes)
    for name, rep in reports.items():
        print(f"{name:8s} OA {rep.oa:.4f} AA {rep.aa:.4f} kappa {rep.kappa:.4f}")
    return EXIT_OK


def cmd_sweep(args):
    hp, preset, scene_path, labels_path = resolve(args)
    scene = _load(scene_path, labels_path)
    labeled, unlabeled = _split(scene, hp)
    if args.values:
        typ = int if args.param == "k" else float
        grid = [typ(v) for v in args.values.split(",")]
    else:
        grid = SWEEP_GRIDS[args.param]
    if args.budget is not None:
        grid = list(itertools.islice(grid, args.budget))
    run_dir = make_run_dir(args, hp.seed)
    write_metadata(run_dir, "sweep", hp, preset, scene_path, labels_path,
                   {"sweep": {"param": args.param, "values": grid}})
    reports = {}
    for value in grid:
        point = hp.updated(**{args.param: value})
        try:
            _, rep, _ = evaluation.run_slcrf(scene, labeled, unlabeled, point)
        except DivergenceError as exc:
            log.warning("%s=%g diverged: %s", args.param, value, exc)
            continue
        reports[f"{args.param}={value!r}"] = rep
        print(f"{args.param}={value!r}: OA {rep.oa:.4f}")
    evaluation.write_metrics_csv(os.path.join(run_dir, "metrics.csv"), reports, scene.classes)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "classify": cmd_classify, "eval": cmd_eval,
            "gradcheck": cmd_gradcheck, "ablate": cmd_ablate, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"slcrf {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"slcrf {args.command}: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FormatError as exc:
        print(f"slcrf {args.command}: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
