"""Command-line entry point: ``detect``, ``train-ieis``, ``eval`` and ``dump-debug``.

Dataset layout (one group per directory)::

    <root>/<group>/images/*.png|jpg
    <root>/<group>/gt/*.png          optional binary masks
    <root>/<group>/iris/*.png|csgt   IrIS maps (unless --iris-source fallback)
    <root>/<group>/feat/*.csgt       optional feature tensors

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate group.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cosal, evaluation, features, graph, ieis, imagio, iris, kernels, superpixel
from .config import Config, parse_overrides, read_config_file
from .errors import (CosalError, DegenerateSeeds, DimMismatch, EmptyGroundTruth, FormatError, InvalidArg,
                     InvalidData, IoError)

log = logging.getLogger("cosaliency")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4
IMAGE_EXTS = (".png", ".jpg", ".jpeg")
MAP_EXTS = (".png", ".jpg", ".jpeg", ".csgt")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class GroupData:
    name: str
    stems: list
    rgbs: list
    iris: list | None
    gts: list | None
    tensors: list | None


def _find(directory: Path, stem: str, exts):
    for ext in exts:
        p = directory / f"{stem}{ext}"
        if p.is_file():
            return p
    return None


def _stems(directory: Path, exts) -> list[str]:
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.iterdir() if p.suffix.lower() in exts)


def resolve_group(root: Path, group: str | None) -> Path:
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    if group:
        base = root / group
        if not base.is_dir():
            raise DataError(f"group directory {base} does not exist")
        return base
    if (root / "images").is_dir():
        return root
    groups = sorted(p for p in root.iterdir() if (p / "images").is_dir())
    if len(groups) != 1:
        raise ConfigError(f"{root} holds {len(groups)} groups; pick one with --group")
    return groups[0]


def load_group(base: Path, iris_source: str = "files", features_dir: Path | None = None,
               require_gt: bool = False, n_fallback: int = 200) -> GroupData:
    stems = _stems(base / "images", IMAGE_EXTS)
    if not stems:
        raise DataError(f"no images under {base / 'images'}")
    try:
        rgbs = [imagio.load_image(_find(base / "images", s, IMAGE_EXTS)) for s in stems]
    except (IoError, FormatError) as exc:
        raise DataError(str(exc)) from exc

    iris_maps = None
    if iris_source == "files":
        iris_maps = []
        for s, rgb in zip(stems, rgbs):
            p = _find(base / "iris", s, MAP_EXTS)
            if p is None:
                raise DataError(f"missing IrIS map {base / 'iris' / (s + '.png')}")
            try:
                iris_maps.append(imagio.load_scalar_map(p, rgb.shape[1], rgb.shape[0]))
            except (IoError, FormatError) as exc:
                raise DataError(str(exc)) from exc
    elif iris_source == "fallback":
        iris_maps = [iris.contrast_saliency(rgb, n_fallback) for rgb in rgbs]
    else:
        raise ConfigError(f"unknown iris source {iris_source!r}")

    gts = None
    if (base / "gt").is_dir() or require_gt:
        gts = []
        for s, rgb in zip(stems, rgbs):
            p = _find(base / "gt", s, MAP_EXTS)
            if p is None:
                raise DataError(f"missing ground truth {base / 'gt' / (s + '.png')}")
            try:
                gts.append(imagio.load_mask(p, rgb.shape[1], rgb.shape[0]))
            except (IoError, FormatError) as exc:
                raise DataError(str(exc)) from exc

    fdir = features_dir or (base / "feat")
    tensors = None
    if features_dir is not None or fdir.is_dir():
        tensors = []
        for s, rgb in zip(stems, rgbs):
            p = fdir / f"{s}.csgt"
            if not p.is_file():
                raise DataError(f"missing feature tensor {p}")
            try:
                tensors.append(imagio.load_feature_tensor(p, rgb.shape[1], rgb.shape[0]))
            except (IoError, FormatError) as exc:
                raise DataError(str(exc)) from exc
    return GroupData(base.name, stems, rgbs, iris_maps, gts, tensors)


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, files: list[Path]) -> Path:
    entries = [{"path": p.relative_to(out).as_posix(), "sha256": sha256(p)} for p in sorted(files)]
    path = out / "manifest.json"
    path.write_text(json.dumps({"files": entries}, indent=2, sort_keys=True))
    return path


def _write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return path


def write_report(out: Path, report: evaluation.MetricReport, prefix: str = "") -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    rp = out / f"{prefix}report.json"
    report.to_json(rp)
    cp = out / f"{prefix}curves.csv"
    report.curves_csv(cp)
    return [rp, cp]


def build_config(args) -> Config:
    pairs = read_config_file(args.config) if getattr(args, "config", None) else {}
    cfg, rest = parse_overrides(pairs)
    flags = {
        "alpha": args.alpha, "eta": args.eta, "sigma": args.sigma, "tau": args.tau,
        "clusters": args.clusters, "knn": args.knn, "rho": args.rho, "gamma": args.gamma,
        "seed": args.seed, "workers": args.workers,
        "scales": tuple(args.scales) if args.scales else None,
        "coseg_mode": True if getattr(args, "coseg_mode", False) else None,
        "epochs": getattr(args, "epochs", None),
    }
    cfg = cfg.updated(**flags)
    args.file_settings = rest
    return cfg


def cmd_detect(args) -> int:
    cfg = build_config(args)
    settings = args.file_settings
    root = Path(args.root or settings.get("dataset_root", ""))
    out = Path(args.out or settings.get("output_dir", "out"))
    iris_source = args.iris_source or settings.get("iris_source", "files")
    model_path = args.model or settings.get("model_weights")
    feat = args.features or settings.get("feature_tensors")
    base = resolve_group(root, args.group or settings.get("group_name"))
    data = load_group(base, iris_source, Path(feat) if feat else None)
    model = None
    if model_path:
        try:
            model = ieis.load_model(model_path)
        except (IoError, FormatError) as exc:
            raise ConfigError(f"cannot load model: {exc}") from exc

    res = cosal.detect_group(data.rgbs, data.iris, data.tensors, model, cfg)
    written = []
    cs_maps = res.cs_maps()
    for stem, m in zip(data.stems, cs_maps):
        p = out / "cs" / f"{stem}.png"
        imagio.save_scalar_png(p, m)
        written.append(p)
    masks = res.masks(cfg.mask_threshold)
    if args.masks or cfg.coseg_mode:
        for stem, mk in zip(data.stems, masks):
            p = out / "masks" / f"{stem}.png"
            imagio.save_png(p, (mk * 255).astype(np.uint8))
            written.append(p)
    if args.debug:
        for name in ("rs", "es", "ic", "ac"):
            for stem, m in zip(data.stems, res.field_maps(name)):
                p = out / "debug" / name / f"{stem}.png"
                imagio.save_scalar_png(p, m)
                written.append(p)
    if data.gts is not None:
        report = evaluation.evaluate(cs_maps, data.gts, masks)
        written += write_report(out, report)
    written.append(_write_json(out / "run.json", {
        "group": data.name,
        "images": data.stems,
        "config": cfg.as_dict(),
        "scorer": "mlp" if model else "heuristic",
        "iris_source": iris_source,
        "kernel_backend": kernels.BACKEND,
        "descriptor_layout": res.descriptors.layout.as_dict(),
        "segments": [int(s.n) for s in res.segs],
        "clusters": int(res.layer.k),
        "empty_foreground_images": [data.stems[m] for m in res.descriptors.empty_pools],
    }))
    write_manifest(out, written)
    log.info("wrote %d files to %s", len(written) + 1, out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = build_config(args)
    root = Path(args.train_root)
    if not root.is_dir():
        raise DataError(f"training root {root} does not exist")
    groups = sorted(p for p in root.iterdir() if (p / "images").is_dir())
    if not groups:
        raise DataError(f"no training groups under {root}")
    xs, ys, rss, gts = [], [], [], []
    layout = None
    for g in groups:
        data = load_group(g, args.iris_source or "files", None, require_gt=True)
        x, y, rs, gt, lay = cosal.training_samples(data.rgbs, data.iris, data.gts, data.tensors, cfg)
        if layout is not None and lay.total != layout.total:
            raise DataError(f"group {g.name} yields {lay.total}-dim descriptors, expected {layout.total}")
        layout = lay
        xs.append(x), ys.append(y), rss.append(rs), gts.append(gt)
    tc = ieis.TrainConfig(rho=cfg.rho, gamma=cfg.gamma, lr=cfg.lr, momentum=cfg.momentum,
                          weight_decay=cfg.weight_decay, epochs=cfg.epochs, batch_size=cfg.batch_size,
                          hidden=cfg.hidden, seed=cfg.seed)
    try:
        result = ieis.train(np.concatenate(xs), np.concatenate(ys), np.concatenate(rss), np.concatenate(gts), tc)
    except InvalidData as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = ieis.save_model(result.model, out, {"descriptor_layout": layout.as_dict(), "train_config": cfg.as_dict()})
    loss_path = out.with_suffix(out.suffix + ".loss.csv")
    with open(loss_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["epoch", "loss"])
        for k, v in enumerate(result.loss_trace):
            wr.writerow([k + 1, repr(float(v))])
    write_manifest(out.parent, [out, sidecar, loss_path])
    log.info("trained on %d samples, final loss %.6f", sum(len(y) for y in ys), result.loss_trace[-1])
    return EXIT_OK


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    pred_stems = _stems(pred_dir, MAP_EXTS)
    gt_stems = _stems(gt_dir, MAP_EXTS)
    if not pred_stems or not gt_stems:
        raise DataError("prediction and ground-truth directories must be nonempty")
    if pred_stems != gt_stems:
        missing = sorted(set(pred_stems) ^ set(gt_stems))
        raise DataError(f"filename mismatch between {pred_dir} and {gt_dir}: {missing[:5]}")
    preds, gts = [], []
    for s in pred_stems:
        try:
            gt = imagio.read_gray(_find(gt_dir, s, MAP_EXTS)) >= 0.5
            h, w = gt.shape
            gts.append(gt)
            preds.append(imagio.load_scalar_map(_find(pred_dir, s, MAP_EXTS), w, h))
        except (IoError, FormatError) as exc:
            raise DataError(str(exc)) from exc
    masks = [p >= 0.5 for p in preds]
    try:
        report = evaluation.evaluate(preds, gts, masks)
    except (EmptyGroundTruth, DimMismatch) as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    files = write_report(out, report)
    write_manifest(out, files)
    print(json.dumps(report.summary(), sort_keys=True))
    return EXIT_OK


def cmd_dump_debug(args) -> int:
    cfg = build_config(args)
    base = resolve_group(Path(args.root), args.group)
    data = load_group(base, args.iris_source or "files", Path(args.features) if args.features else None)
    out = Path(args.out)
    written = []
    labs = [imagio.rgb_to_lab(r) for r in data.rgbs]
    segs = [superpixel.slic(lab, cfg.scales[0], cfg.compactness) for lab in labs]
    rs = [superpixel.pool_median(s, m) for s, m in zip(segs, data.iris)]
    desc = features.build_descriptors(segs, rs, data.tensors, cfg.max_components)
    for stem, rgb, seg, x in zip(data.stems, data.rgbs, segs, desc.descriptors):
        p = out / "labels" / f"{stem}.png"
        imagio.save_label_png(p, seg.labels)
        q = out / "overlay" / f"{stem}.png"
        imagio.save_png(q, superpixel.boundary_overlay(rgb, seg.labels))
        g = out / "graphs" / f"{stem}.txt"
        g.parent.mkdir(parents=True, exist_ok=True)
        g.write_text(graph.intra_graph(seg).to_coo_text())
        d = out / "descriptors" / f"{stem}.csgt"
        imagio.save_tensor(x[:, :, None], d)
        written += [p, q, g, d]
    written.append(_write_json(out / "descriptors" / "layout.json", desc.layout.as_dict()))
    write_manifest(out, written)
    return EXIT_OK


def _add_params(p):
    p.add_argument("--config", help="key = value configuration file (flags win)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--clusters", "-K", type=int, help="cluster-layer size K")
    p.add_argument("--knn", type=int, help="cluster-layer k-NN")
    p.add_argument("--rho", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--scales", type=int, nargs="+", help="superpixel counts, descending")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--iris-source", choices=("files", "fallback"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cosaliency", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="co-saliency maps for one image group")
    d.add_argument("--root", help="dataset root or group directory")
    d.add_argument("--group")
    d.add_argument("--out")
    d.add_argument("--model", help="IeIS weight file (.csgt with .json sidecar)")
    d.add_argument("--features", help="directory of per-image .csgt feature tensors")
    d.add_argument("--masks", action="store_true", help="also write co-segmentation masks")
    d.add_argument("--coseg-mode", action="store_true", help="(x+1)/2 normalization of auxiliary maps")
    d.add_argument("--debug", action="store_true", help="write intermediate rs/es/ic/ac maps")
    _add_params(d)
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("train-ieis", help="train the inter-image saliency network")
    t.add_argument("--train-root", required=True)
    t.add_argument("--out", required=True, help="weight file path (.csgt)")
    t.add_argument("--epochs", type=int)
    _add_params(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="metrics for a directory of maps against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("dump-debug", help="segmentations, graphs and descriptors for inspection")
    g.add_argument("--root", required=True)
    g.add_argument("--group")
    g.add_argument("--out", required=True)
    g.add_argument("--features")
    _add_params(g)
    g.set_defaults(func=cmd_dump_debug)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidArg) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateSeeds as exc:
        print(f"degenerate group: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DimMismatch, EmptyGroundTruth, IoError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CosalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
