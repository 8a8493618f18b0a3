"""Command-line entry point.

Exit codes: 0 on success, 1 on invalid input, 2 on numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import compositing as comp
from . import dataio, inference, metrics
from .dataio import ValidationError
from .networks import DivergenceError, label_index
from .trainer import TrainConfig, TrainingData, train

log = logging.getLogger("exprgan")


def _read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def _read_mask(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def _write_png(path, image) -> None:
    from PIL import Image

    arr = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def cmd_gen_data(args) -> None:
    spec = dataio.make_domain_spec(args.seed, noise=args.noise)
    m = dataio.generate_dataset(args.out, spec, args.clips_per_domain, args.length,
                                args.seed, args.window)
    print(f"wrote {len(m.clips)} clips to {args.out}")


def cmd_train(args) -> None:
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config.seed = args.seed
    manifest = dataio.read_manifest(args.data)
    if manifest.n_window != config.n_window:
        raise ValidationError(
            f"manifest window {manifest.n_window} != config window {config.n_window}")
    data = TrainingData.from_manifest(manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_json(), indent=1) + "\n")
    train(config, data, out, init=args.init, finetune=args.finetune)
    print(f"checkpoint written to {out / 'model.nedm'}")


def _style_for(model, args) -> np.ndarray:
    if args.ref:
        return inference.extract_style(model, dataio.read_track(args.ref))
    if args.label is None:
        raise ValidationError("either --label or --ref is required")
    rng = np.random.default_rng(args.seed)
    return model.map_latent(rng.standard_normal(4), label_index(args.label))


def cmd_translate(args) -> None:
    model = inference.Manipulator.load(args.model)
    track = dataio.read_track(args.input)
    out = inference.translate_track(model, track, _style_for(model, args))
    dataio.write_track(args.out, out)


def cmd_extract_style(args) -> None:
    model = inference.Manipulator.load(args.model)
    style = inference.extract_style(model, dataio.read_track(args.ref))
    Path(args.out).write_text(json.dumps({"style": [float(v) for v in style]}) + "\n")


def _frames(path) -> list:
    p = Path(path)
    if p.is_dir():
        return sorted(f for f in p.iterdir() if f.suffix.lower() == ".png")
    return [p]


def cmd_eval(args) -> None:
    report = metrics.MetricReport()
    gen, gt = Path(args.gen), Path(args.gt)
    if gen.suffix.lower() == ".csv":
        a, b = dataio.read_track(gt), dataio.read_track(gen)
        report.add("jaw_pcc", metrics.track_jaw_pcc(a, b))
    else:
        gen_frames, gt_frames = _frames(gen), _frames(gt)
        if len(gen_frames) != len(gt_frames) or not gen_frames:
            raise ValidationError(
                f"frame count mismatch: {len(gen_frames)} generated vs {len(gt_frames)} ground truth")
        masks = _frames(args.masks) if args.masks else None
        if masks is not None and len(masks) != len(gen_frames):
            raise ValidationError("mask count does not match frame count")
        for k, (fg, ft) in enumerate(zip(gen_frames, gt_frames)):
            a, b = _read_png(fg), _read_png(ft)
            report.add("apd", metrics.apd(a, b))
            if masks is not None:
                report.add("fapd", metrics.fapd(a, b, _read_mask(masks[k])))
            if args.mouth is not None:
                report.add("mapd", metrics.mapd(a, b, args.mouth))
    Path(args.out).write_text(json.dumps(report.to_json(), indent=1) + "\n")


def cmd_align(args) -> None:
    image = _read_png(args.image)
    template = comp.load_landmarks(args.template) if args.template else None
    out, _ = comp.align_face(image, comp.load_landmarks(args.landmarks), template)
    _write_png(args.out, out)


def cmd_blend(args) -> None:
    fg, bg, mask = _read_png(args.fg), _read_png(args.bg), _read_mask(args.mask)
    if args.erode:
        mask = comp.erode_soft(mask, args.erode)
    _write_png(args.out, comp.multiband_blend(fg, bg, mask, args.levels))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exprgan", description=__doc__.splitlines()[0])
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic multi-domain dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--clips-per-domain", type=int, default=40)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the manipulator")
    p.add_argument("--config", help="JSON file mirroring TrainConfig")
    p.add_argument("--data", required=True, help="dataset manifest.json")
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="checkpoint to resume or finetune from")
    p.add_argument("--finetune", action="store_true",
                   help="with --init: keep weights only, restart optimizer and counters")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="translate a whole expression track")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--label", help="target emotion name or index")
    p.add_argument("--ref", help="reference track to take the style from")
    p.add_argument("--seed", type=int, default=0, help="latent code seed for --label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("extract-style", help="style vector of a reference track")
    p.add_argument("--model", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_extract_style)

    p = sub.add_parser("eval", help="image or track metrics")
    p.add_argument("--gen", required=True, help="generated frame dir/png or track csv")
    p.add_argument("--gt", required=True, help="ground-truth frame dir/png or track csv")
    p.add_argument("--masks", help="face mask dir/png for FAPD")
    p.add_argument("--mouth", type=float, nargs=2, metavar=("X", "Y"),
                   help="mouth centre for MAPD")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("align", help="warp a face image onto the landmark template")
    p.add_argument("--landmarks", required=True, help="JSON list of 68 [x, y] pairs")
    p.add_argument("--template", help="template landmarks JSON (default: bundled mean face)")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("blend", help="multi-band blend a face onto a background")
    p.add_argument("--fg", required=True)
    p.add_argument("--bg", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--levels", type=int)
    p.add_argument("--erode", type=float, default=0.0, help="soft erosion radius in px")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_blend)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except DivergenceError as exc:
        print(f"error: numeric divergence: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
