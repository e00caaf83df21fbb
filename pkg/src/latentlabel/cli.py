"""``latentlabel`` command line: synth, train, predict, cv, grid.

Every command reads an optional JSON config (``--config``); command-line
flags override it.  Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields

import numpy as np

from . import __version__
from .data_model import LabelMatrix, model_from_dict, model_to_dict
from .exceptions import NoEvaluableSamples, NumericalError, ValidationError
from .harness import (
    GridSpec,
    SyntheticSpec,
    generate_synthetic,
    grid_search,
    n_jobs_from_env,
    repeated_cv,
)
from .io import read_labels_csv, read_matrix_csv, write_matrix_csv
from .metrics import EvalReport, format_table
from .solver import SolverConfig, fit, predict
from .views import DEFAULT_KERNELS, KernelSpec, ViewAssembly, assemble_view

log = logging.getLogger("latentlabel")

DEFAULTS = {
    "seed": 0,
    "out_dir": "out",
    "motor_csv": None,
    "nonmotor_csv": None,
    "labels_csv": None,
    "model_path": None,
    "scaling": "minmax",
    "kernels": [{"kind": k.kind.value} for k in DEFAULT_KERNELS],
    "alpha": 0.3,
    "beta": 0.1,
    "k": 50,
    "folds": 10,
    "repeats": 100,
    "method": "latent",
    "holdout_fraction": 0.1,
    "solver": {},
    "grid": {},
    "synthetic": {},
}


class InputError(Exception):
    pass


def _load_config(args):
    cfg = json.loads(json.dumps(DEFAULTS))
    base = None
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(user, dict):
            raise InputError(f"config {args.config} must hold a JSON object")
        unknown = sorted(set(user) - set(DEFAULTS))
        if unknown:
            raise InputError(f"config {args.config}: unknown keys {unknown}")
        cfg.update(user)
        base = os.path.dirname(os.path.abspath(args.config))
    overrides = {
        "seed": args.seed, "out_dir": args.out_dir, "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None), "k": getattr(args, "k", None),
        "folds": getattr(args, "folds", None), "repeats": getattr(args, "repeats", None),
        "motor_csv": getattr(args, "motor", None),
        "nonmotor_csv": getattr(args, "nonmotor", None),
        "labels_csv": getattr(args, "labels", None),
        "model_path": getattr(args, "model", None),
        "method": getattr(args, "method", None),
    }
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    if base is not None:
        for key in ("motor_csv", "nonmotor_csv", "labels_csv", "model_path"):
            if cfg[key] and key not in {k for k, v in overrides.items() if v is not None}:
                if not os.path.isabs(cfg[key]):
                    cfg[key] = os.path.join(base, cfg[key])
    return cfg


def _solver_config(cfg):
    known = {f.name for f in fields(SolverConfig)}
    extra = sorted(set(cfg["solver"]) - known)
    if extra:
        raise InputError(f"unknown solver settings {extra}")
    try:
        return SolverConfig(**{**cfg["solver"], "seed": cfg["seed"]})
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad solver settings: {exc}") from None


def _kernels(cfg):
    try:
        return tuple(KernelSpec(**k) for k in cfg["kernels"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad kernel settings: {exc}") from None


def _require(cfg, *keys):
    for key in keys:
        if not cfg.get(key):
            raise InputError(f"missing required setting {key!r}")


def _read_features(cfg):
    _require(cfg, "motor_csv", "nonmotor_csv")
    m_ids, m_names, motor = read_matrix_csv(cfg["motor_csv"])
    n_ids, n_names, nonmotor = read_matrix_csv(cfg["nonmotor_csv"])
    if m_ids != n_ids:
        raise InputError(f"{cfg['motor_csv']} and {cfg['nonmotor_csv']} list different "
                         f"sample ids (or a different order)")
    return m_ids, (m_names, n_names), motor, nonmotor


def _read_dataset(cfg, require_all_labels=False):
    """Features and labels ordered labeled samples first."""
    ids, names, motor, nonmotor = _read_features(cfg)
    _require(cfg, "labels_csv")
    l_ids, label_names, Y = read_labels_csv(cfg["labels_csv"])
    pos = {sid: i for i, sid in enumerate(ids)}
    missing = [sid for sid in l_ids if sid not in pos]
    if missing:
        raise InputError(f"{cfg['labels_csv']}: sample id {missing[0]!r} has no features")
    labeled = set(l_ids)
    lab_rows = {sid: i for i, sid in enumerate(l_ids)}
    train = [sid for sid in ids if sid in labeled]
    test = [sid for sid in ids if sid not in labeled]
    if require_all_labels and test:
        raise InputError(f"{cfg['labels_csv']}: sample {test[0]!r} is unlabeled; this "
                         "command needs labels for every sample")
    if not train:
        raise InputError(f"{cfg['labels_csv']}: no labeled samples")
    order = [pos[s] for s in train + test]
    Y_train = Y[[lab_rows[s] for s in train]]
    return (train + test, names, motor[order], nonmotor[order],
            LabelMatrix.from_training(Y_train, len(test)), label_names)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg):
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_train(cfg):
    ids, names, motor, nonmotor, labels, label_names = _read_dataset(cfg)
    view, assembly = assemble_view(motor, nonmotor, cfg["scaling"], _kernels(cfg),
                                   sample_ids=ids, return_assembly=True)
    model, trace = fit(view, labels, float(cfg["alpha"]), float(cfg["beta"]), int(cfg["k"]),
                       _solver_config(cfg))
    out = _out_dir(cfg)
    doc = model_to_dict(model)
    doc.update({
        "views": assembly.to_dict(),
        "feature_names": [list(names[0]), list(names[1])],
        "label_names": list(label_names),
        "sample_ids": list(ids),
        "n_train": labels.n_train,
        "seed": cfg["seed"],
    })
    _write_json(os.path.join(out, "model.json"), doc)
    trace_doc = trace.to_dict()
    trace_doc["seed"] = cfg["seed"]
    _write_json(os.path.join(out, "trace.json"), trace_doc)
    log.info("fit %d outer iterations in %.2fs", len(trace.objective_per_outer_iter),
             trace.wall_time)
    return 0


def _load_model_doc(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        model = model_from_dict(doc)
        assembly = ViewAssembly.from_dict(doc["views"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot load model {path}: {exc}") from None
    return doc, model, assembly


def cmd_predict(cfg):
    _require(cfg, "model_path")
    doc, model, assembly = _load_model_doc(cfg["model_path"])
    if model.n_modalities != assembly.n_modalities:
        raise InputError(f"model has {model.n_modalities} modalities but its view "
                         f"description has {assembly.n_modalities}")
    n_anchor = assembly.anchors.shape[0]
    for i, d in enumerate(model.modality_dims[2:], start=3):
        if d != n_anchor:
            raise InputError(f"model modality {i} expects {d} anchors, view description "
                             f"has {n_anchor}")
    ids, _, motor, nonmotor = _read_features(cfg)
    feat = doc.get("feature_names")
    if feat and (motor.shape[1] != len(feat[0]) or nonmotor.shape[1] != len(feat[1])):
        raise InputError(f"input has {motor.shape[1]}+{nonmotor.shape[1]} features, model "
                         f"expects {len(feat[0])}+{len(feat[1])}")
    blocks = assembly.transform(motor, nonmotor)
    scores, labels = predict(model, blocks)
    c = model.V.shape[1]
    label_names = doc.get("label_names") or [f"label{j}" for j in range(c)]
    out = _out_dir(cfg)
    write_matrix_csv(os.path.join(out, "scores.csv"), ids, label_names, scores.reshape(-1, c))
    write_matrix_csv(os.path.join(out, "labels.csv"), ids, label_names, labels.reshape(-1, c))
    return 0


def _cv_summary_csv(path, report, seed):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "mean", "sd", "seed"])
        for name in EvalReport.METRICS:
            s = report["summary"][name]
            w.writerow([name, repr(s["mean"]), repr(s["sd"]), seed])


def cmd_cv(cfg):
    ids, names, motor, nonmotor, labels, _ = _read_dataset(cfg, require_all_labels=True)
    view = assemble_view(motor, nonmotor, cfg["scaling"], _kernels(cfg), sample_ids=ids)
    hyper = (float(cfg["alpha"]), float(cfg["beta"]), int(cfg["k"]))
    report = repeated_cv(view, labels, hyper, int(cfg["repeats"]), int(cfg["folds"]),
                         int(cfg["seed"]), _solver_config(cfg), method=cfg["method"],
                         n_jobs=n_jobs_from_env())
    out = _out_dir(cfg)
    _write_json(os.path.join(out, "cv.json"), report)
    _cv_summary_csv(os.path.join(out, "cv_summary.csv"), report, cfg["seed"])
    print(format_table(report["summary"]))
    return 0


def cmd_grid(cfg):
    ids, names, motor, nonmotor, labels, _ = _read_dataset(cfg, require_all_labels=True)
    view = assemble_view(motor, nonmotor, cfg["scaling"], _kernels(cfg), sample_ids=ids)
    try:
        grid = GridSpec(**cfg["grid"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad grid settings: {exc}") from None
    best, table, meta = grid_search(view, labels, grid, float(cfg["holdout_fraction"]),
                                    int(cfg["seed"]), _solver_config(cfg),
                                    n_jobs=n_jobs_from_env())
    out = _out_dir(cfg)
    doc = {"best": None if best is None else
           {"alpha": best[0], "beta": best[1], "k": best[2]},
           "table": table, "meta": meta, "seed": cfg["seed"]}
    _write_json(os.path.join(out, "grid.json"), doc)
    with open(os.path.join(out, "grid_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "beta", "k", "hamming_loss", "error", "seed"])
        for row in table:
            hl = "" if row["hamming_loss"] is None else repr(row["hamming_loss"])
            w.writerow([repr(row["alpha"]), repr(row["beta"]), row["k"], hl,
                        row["error"] or "", cfg["seed"]])
    if best is None:
        log.error("every grid cell failed")
        return 3
    return 0


def cmd_synth(cfg):
    try:
        spec = SyntheticSpec(**{**cfg["synthetic"], "seed": int(cfg["seed"])})
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad synthetic settings: {exc}") from None
    if len(spec.modality_dims) != 2:
        raise InputError("synth writes exactly two feature blocks")
    _, labels, planted, blocks = generate_synthetic(spec)
    out = _out_dir(cfg)
    ids = [f"s{i:04d}" for i in range(spec.n_samples)]
    write_matrix_csv(os.path.join(out, "motor.csv"), ids,
                     [f"m{j}" for j in range(blocks[0].shape[1])], blocks[0])
    write_matrix_csv(os.path.join(out, "nonmotor.csv"), ids,
                     [f"n{j}" for j in range(blocks[1].shape[1])], blocks[1])
    write_matrix_csv(os.path.join(out, "labels.csv"), ids,
                     [f"drug{j}" for j in range(spec.c)],
                     labels.values.astype(np.int64))
    _write_json(os.path.join(out, "planted.json"), {
        "spec": asdict(spec), "seed": spec.seed,
        "latent": planted.P.tolist(), "V": planted.V.tolist()})
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "cv": cmd_cv, "grid": cmd_grid,
            "synth": cmd_synth}


def build_parser():
    parser = argparse.ArgumentParser(prog="latentlabel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("train", "predict", "cv", "grid"):
            p.add_argument("--motor", help="motor-symptom feature CSV")
            p.add_argument("--nonmotor", help="non-motor-symptom feature CSV")
        if name in ("train", "cv", "grid"):
            p.add_argument("--labels", help="label CSV (unlisted samples are unlabeled)")
        if name in ("train", "cv"):
            p.add_argument("--alpha", type=float)
            p.add_argument("--beta", type=float)
            p.add_argument("--k", type=int)
        if name == "cv":
            p.add_argument("--folds", type=int)
            p.add_argument("--repeats", type=int)
            p.add_argument("--method", choices=["latent", "binary_relevance"])
        if name == "predict":
            p.add_argument("--model", help="model JSON written by train")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (InputError, ValidationError, NoEvaluableSamples, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
