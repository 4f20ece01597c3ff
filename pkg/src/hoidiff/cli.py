"""Command-line entry point: ``hoidiff {gen-data, train, sample, eval}``.

Exit codes: 0 success, 2 usage or invalid arguments, 3 I/O or file format
problems, 4 numeric failure during training.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys

import numpy as np

from .body import load_skeleton
from .config import RunConfig
from .dataset import _Prepared, read_sequence, sample_batch, write_sequence
from .errors import FormatError, HoiError, InvalidConfig, NonFiniteLoss, SequenceTooShort
from .losses import TERMS
from .metrics import evaluate
from .network import Denoiser, object_descriptor
from .pipeline import MODES, sample_like
from .scenarios import SCENARIOS, ScenarioConfig, gen_scenario
from .schedule import make_schedule
from .training import AdamW, load_checkpoint, lr_at, save_checkpoint, train_step

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
log = logging.getLogger("hoidiff")


class UsageError(Exception):
    pass


def _derived_seed(seed, i):
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def cmd_gen_data(args):
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    os.makedirs(args.out, exist_ok=True)
    skel = load_skeleton()
    for i in range(args.count):
        cfg = ScenarioConfig(scenario=args.scenario, frames=args.frames, seed=_derived_seed(args.seed, i),
                             object_class=args.object_class, jitter=args.jitter, min_frames=args.window)
        seq = gen_scenario(cfg, skel)
        path = os.path.join(args.out, f"{args.scenario}_{i:04d}.jsonl")
        write_sequence(seq, path)
        log.info("wrote %s", path)
    return EXIT_OK


def _load_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    doc = cfg.to_dict()
    for flag in ("no_guidance", "no_contact_modality", "no_canonicalization", "no_aux_loss"):
        if getattr(args, flag, False):
            doc[flag] = True
    return RunConfig.from_dict(doc)


def _data_files(spec):
    if os.path.isdir(spec):
        files = sorted(glob.glob(os.path.join(spec, "*.jsonl")))
    else:
        files = sorted(glob.glob(spec))
    if not files:
        raise FileNotFoundError(f"no sequence files found at {spec}")
    return files


def cmd_train(args):
    cfg = _load_config(args)
    if args.steps is not None:
        if args.steps < 0:
            raise UsageError("--steps must be nonnegative")
        doc = cfg.to_dict()
        doc["steps"] = args.steps
        cfg = RunConfig.from_dict(doc)
    seed = cfg.effective_seed()
    skel = load_skeleton()
    seqs = [read_sequence(f) for f in _data_files(args.data)]
    prepared = [_Prepared(skel, s, lambda t: object_descriptor(t, cfg.class_count)) for s in seqs]
    for s in seqs:
        if len(s) < cfg.W:
            raise SequenceTooShort(f"training sequence of {len(s)} frames is shorter than W={cfg.W}")
    n_vertices = max([len(s.template.vertices) for s in seqs if not s.motion_only] or [1])
    schedule = make_schedule(cfg.schedule, cfg.T)
    tcfg = cfg.train_config()
    weights = cfg.loss_weights()
    opt_kwargs = dict(lr=tcfg.lr, betas=(tcfg.beta1, tcfg.beta2), eps=tcfg.eps, weight_decay=tcfg.weight_decay)
    if args.resume:
        model, opt, rng, start, _ = load_checkpoint(args.resume, opt_kwargs)
    else:
        rng = np.random.default_rng(seed)
        model = Denoiser.create(cfg.denoiser(), rng)
        opt = AdamW(model.params, **opt_kwargs)
        start = 0
    log_path = args.log or os.path.splitext(args.out_checkpoint)[0] + ".csv"
    extra = {"config": cfg.to_dict(), "seed": seed}
    fresh = not (args.resume and os.path.exists(log_path))
    with open(log_path, "w" if fresh else "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            fh.write("# " + json.dumps({"weights": weights.to_dict(), "seed": seed, "config": cfg.to_dict()},
                                       sort_keys=True) + "\n")
            writer.writerow(["step", "total", *TERMS])
        for step in range(start, tcfg.steps):
            batch = sample_batch(prepared, cfg.W, tcfg.batch_size, rng, cfg.canonical, n_vertices)
            loss, terms, _ = train_step(model, opt, batch, schedule, weights, skel, rng, tcfg, lr_at(tcfg, step))
            writer.writerow([step + 1, repr(loss), *(repr(terms[k]) for k in TERMS)])
            fh.flush()
            if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0 and step + 1 < tcfg.steps:
                save_checkpoint(args.out_checkpoint, model, opt, rng, step + 1, extra)
            if (step + 1) % 50 == 0:
                log.info("step %d loss %.4f", step + 1, loss)
    save_checkpoint(args.out_checkpoint, model, opt, rng, max(tcfg.steps, start), extra)
    log.info("wrote %s", args.out_checkpoint)
    return EXIT_OK


def cmd_sample(args):
    if args.mode not in MODES:
        raise UsageError(f"--mode must be one of {MODES}")
    if not 0 <= args.sparse_pct <= 100:
        raise UsageError("--sparse-pct must lie in [0, 100]")
    model, _, _, _, extra = load_checkpoint(args.checkpoint)
    doc = extra.get("config") or RunConfig().to_dict()
    if args.context_frames is not None:
        doc["K"] = args.context_frames
    if args.no_guidance:
        doc["no_guidance"] = True
    cfg = RunConfig.from_dict(doc)
    seed = cfg.effective_seed(args.seed)
    ref = read_sequence(args.ego_from)
    if args.mode in ("sparse-o", "contact-cond") and ref.motion_only:
        raise UsageError(f"--mode {args.mode} needs a reference with an object")
    out = sample_like(model, ref, cfg, load_skeleton(), seed, args.mode, args.sparse_pct)
    out.meta["checkpoint"] = os.path.basename(args.checkpoint)
    write_sequence(out, args.out)
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_eval(args):
    pred = read_sequence(args.pred)
    gt = read_sequence(args.gt)
    if len(pred) != len(gt):
        raise UsageError(f"prediction has {len(pred)} frames, ground truth {len(gt)}")
    config = pred.meta.get("config", {})
    seed = pred.meta.get("seed")
    report = evaluate(pred, gt, load_skeleton(), seed=seed, config=config)
    text = report.to_json()
    if args.out_report:
        with open(args.out_report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hoidiff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write synthetic seq/1 files")
    g.add_argument("--scenario", choices=SCENARIOS, required=True)
    g.add_argument("--frames", type=int, default=120)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--object-class", type=int, default=None)
    g.add_argument("--jitter", type=float, default=0.0)
    g.add_argument("--window", type=int, default=60, help="minimum length (the model window)")
    g.set_defaults(func=cmd_gen_data)

    ablations = argparse.ArgumentParser(add_help=False)
    for flag in ("no-guidance", "no-contact-modality", "no-canonicalization", "no-aux-loss"):
        ablations.add_argument(f"--{flag}", action="store_true")

    t = sub.add_parser("train", parents=[ablations], help="train the denoiser")
    t.add_argument("--config", default=None, help="RunConfig JSON")
    t.add_argument("--data", required=True, help="directory or glob of seq/1 files")
    t.add_argument("--steps", type=int, default=None)
    t.add_argument("--out-checkpoint", required=True)
    t.add_argument("--resume", default=None, help="checkpoint to continue from")
    t.add_argument("--log", default=None, help="loss CSV (default: next to the checkpoint)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="stream a reference ego track through the conveyor")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--ego-from", required=True)
    s.add_argument("--mode", default="full")
    s.add_argument("--sparse-pct", type=float, default=25.0)
    s.add_argument("--context-frames", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--no-guidance", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="compute the metrics report")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--out-report", default=None)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NonFiniteLoss, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SequenceTooShort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
