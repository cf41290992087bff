"""``photostyle`` command line: one subcommand per pipeline stage.

Every stage reads and writes plain files in the output directory, so stages
can be run (and re-run) independently.  Exit status is 0 on success, 1 for
operational failures and 2 for usage errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, analytics, corpus, facedetect, fixtures, neuralnet, pipeline, plotting
from .config import RunConfig, load_config
from .exceptions import ConfigError, PhotostyleError, PlotError

log = logging.getLogger("photostyle")

# artifact name -> subcommand that writes it
ARTIFACTS = {
    "roster.csv": "ingest",
    "photos.csv": "ingest",
    "sample.csv": "detect",
    "base_model.phsn": "train",
    "model.phsn": "finetune",
    "classifications.csv": "classify",
    "demographics.csv": "aggregate",
    "joined.csv": "compare",
    "regressions.csv": "compare",
    "experiment.csv": "experiment",
}


class UsageError(Exception):
    pass


class MissingArtifact(PhotostyleError):
    def __init__(self, path: Path, producer: str):
        super().__init__(f"{path} not found; run `photostyle {producer}` first")
        self.path = path
        self.producer = producer


class Run:
    """Per-invocation context: effective config, output directory and report."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.output_dir)
        self.lines: list = []

    def artifact(self, name: str, override=None) -> Path:
        path = Path(override) if override else self.out / name
        if not path.exists():
            raise MissingArtifact(path, ARTIFACTS.get(name, "the producing stage"))
        return path

    def note(self, text: str):
        self.lines.append(text)
        log.info(text)

    def target(self, name: str) -> Path:
        return self.out / name

    def write(self, name: str, writer):
        """Call ``writer(path)`` unless this is a dry run."""
        path = self.target(name)
        if self.cfg.dry_run:
            self.note(f"dry run: would write {path}")
            return path
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(path)
        return path

    def report(self):
        body = [f"photostyle {__version__} {self.command}", f"seed: {self.cfg.seed}", ""] + self.lines
        body += ["", "effective configuration:", self.cfg.echo()]
        self.write(f"{self.command}_report.txt", lambda p: p.write_text("\n".join(body), encoding="utf-8"))


def _roster(run: Run):
    return corpus.load_roster(run.artifact("roster.csv"))


def _detect_params(cfg: RunConfig) -> pipeline.DetectParams:
    d = cfg["detect"]
    return pipeline.DetectParams(d["scale_factor"], d["step_fraction"], d["min_size"], d["overlap_threshold"],
                                 d["min_neighbors"])


def _cascade(cfg: RunConfig):
    path = cfg["detect"]["cascade"]
    return facedetect.load_cascade(path) if path else facedetect.demo_cascade()


def _train_config(cfg: RunConfig, iterations: int, seed_offset: int = 0) -> neuralnet.TrainConfig:
    t = cfg["train"]
    return neuralnet.TrainConfig(learning_rate=t["learning_rate"], momentum=t["momentum"],
                                 batch_size=t["batch_size"], iterations=iterations,
                                 seed=cfg.seed + seed_offset, weight_decay=t["weight_decay"])


def _finetune_config(cfg: RunConfig, base_model_path=None) -> pipeline.FineTuneConfig:
    t = cfg["train"]
    return pipeline.FineTuneConfig(freeze_prefix=t["freeze_prefix"], initial_iterations=t["initial_iterations"],
                                   bootstrap_iterations=t["bootstrap_iterations"],
                                   confidence_threshold=t["confidence_threshold"],
                                   train_config=_train_config(cfg, t["initial_iterations"]),
                                   base_model_path=base_model_path)


def _labeled(run: Run, directory):
    if not directory:
        raise UsageError("--labeled DIR is required")
    if not Path(directory).is_dir():
        raise FileNotFoundError(f"labelled image directory {directory} does not exist")
    data, missed = pipeline.load_labeled_directory(directory, _cascade(run.cfg), run.cfg["train"]["input_size"],
                                                   _detect_params(run.cfg))
    run.note(f"labelled images: {len(data)} usable, {missed} without a detectable face")
    if len(data) == 0:
        raise PhotostyleError(f"no usable labelled faces under {directory}")
    return data


def _split(run: Run, data):
    spec = pipeline.SplitSpec(run.cfg["train"]["train_fraction"], run.cfg.seed)
    train, validation = pipeline.split_dataset(data, spec)
    run.note(f"split: {len(train)} train / {len(validation)} validation (fraction {spec.train_fraction:.6g})")
    return train, validation


def _write_rows(run: Run, name: str, rows, columns):
    run.write(name, lambda p: corpus.persist_table(rows, p, columns))


# --- subcommands ---------------------------------------------------------------------


def cmd_fixture(args, run: Run) -> int:
    root = Path(args.directory)
    if run.cfg.dry_run:
        run.note(f"dry run: would write fixture under {root}")
        return 0
    paths = fixtures.write_fixture(root, run.cfg.seed)
    print(f"fixture written to {paths['root']}")
    return 0


def cmd_ingest(args, run: Run) -> int:
    roster = corpus.load_roster(args.roster)
    if args.legislators:
        parsed = corpus.parse_legislator_manifest(Path(args.legislators).read_text(encoding="utf-8"))
        roster = corpus.attach_usernames(roster, parsed)
    run.note(f"roster: {len(roster)} legislators")
    if args.photos_dir:
        manifest = corpus.scan_local_corpus(args.photos_dir, roster)
    else:
        source = args.source or run.cfg["fetch"]["source"]
        if not source:
            raise UsageError("give --photos-dir or a fetch source (--source / [fetch] source)")
        f = run.cfg["fetch"]
        photo_root = run.target("photos")
        photos, failures = [], 0
        if run.cfg.dry_run:
            run.note(f"dry run: would fetch from {source}")
            return 0
        limiter = corpus.RateLimiter(f["rate"])
        for record in roster:
            result = corpus.fetch_photos(record, source, photo_root, f["max_photos"], f["rate"],
                                         retries=f["retries"], timeout=f["timeout"], limiter=limiter)
            photos.extend(result.photos)
            failures += len(result.failures)
            for w in result.warnings:
                run.note(f"warning: {w}")
        manifest = corpus.CorpusManifest(tuple(roster), tuple(photos))
        run.note(f"fetch failures: {failures}")
    for member_id, n in manifest.counts.items():
        run.note(f"  {member_id}: {n} photos")
    if manifest.orphans:
        run.note(f"orphan directories (not in roster): {', '.join(manifest.orphans)}")
    run.write("roster.csv", lambda p: corpus.save_roster(roster, p))
    run.write("photos.csv", lambda p: corpus.save_manifest(manifest, p))
    run.report()
    return 0


def cmd_detect(args, run: Run) -> int:
    roster = _roster(run)
    manifest = corpus.load_manifest(run.artifact("photos.csv"), roster)
    detections, skipped = pipeline.detect_corpus_faces(manifest, _cascade(run.cfg), _detect_params(run.cfg),
                                                      run.cfg.jobs)
    with_faces = manifest.with_photos(p for p in manifest.photos if detections.get(p.photo_id))
    fraction = run.cfg["detect"]["sample_fraction"]
    sample = pipeline.sample_per_member(with_faces, fraction, run.cfg.seed)
    run.note(f"photos: {len(manifest.photos)}; with faces: {len(with_faces.photos)}; "
             f"sampled at {fraction:.6g}: {len(sample.photos)}")
    for s in skipped:
        run.note(f"skipped: {s}")
    rows = [{"photo_id": pid, "box_x": b.rect.x, "box_y": b.rect.y, "box_w": b.rect.w, "box_h": b.rect.h,
             "score": b.score} for pid, boxes in sorted(detections.items()) for b in boxes]
    _write_rows(run, "detections.csv", rows, ["photo_id", "box_x", "box_y", "box_w", "box_h", "score"])
    run.write("sample.csv", lambda p: corpus.save_manifest(sample, p))
    run.report()
    return 0


def cmd_train(args, run: Run) -> int:
    data = _labeled(run, args.labeled)
    t = run.cfg["train"]
    size = t["input_size"]
    layers = neuralnet.compact_architecture((1, size, size), len(neuralnet.RACE_LABELS), tuple(t["channels"]))
    model = neuralnet.init_model(layers, (1, size, size), neuralnet.RACE_LABELS, run.cfg.seed)
    model, history = neuralnet.train(model, data.inputs, data.labels, _train_config(run.cfg, t["base_iterations"]))
    run.note(f"trained {t['base_iterations']} iterations; final loss {history[-1] if history else float('nan'):.6g}")
    run.note(f"training accuracy: {neuralnet.accuracy(model, data.inputs, data.labels):.4f}")
    run.write("base_model.phsn", lambda p: neuralnet.save_model(model, p))
    run.write("base_loss.csv", lambda p: neuralnet.save_loss_history(history, p))
    run.report()
    return 0


def _base_model(run: Run, path):
    if path:
        return neuralnet.load_model(run.artifact("base_model.phsn", path))
    t = run.cfg["train"]
    size = t["input_size"]
    layers = neuralnet.compact_architecture((1, size, size), len(neuralnet.RACE_LABELS), tuple(t["channels"]))
    run.note("no base model given; starting from a freshly initialised compact network")
    return neuralnet.init_model(layers, (1, size, size), neuralnet.RACE_LABELS, run.cfg.seed)


def _evaluation_rows(per_class: dict) -> list:
    return [{"label": k, "accuracy": "n/a" if v is None else v} for k, v in per_class.items()]


def cmd_finetune(args, run: Run) -> int:
    base = _base_model(run, args.base_model)
    train, validation = _split(run, _labeled(run, args.labeled))
    cfg = _finetune_config(run.cfg, args.base_model)
    model, history = pipeline.finetune(base, train, cfg)
    per_class = pipeline.evaluate_per_class(model, validation, run.cfg["train"]["folds"], run.cfg.seed)
    run.note(f"fine-tuned {cfg.initial_iterations} iterations with {cfg.freeze_prefix} frozen layer(s)")
    for label, acc in per_class.items():
        run.note(f"  {label}: {'n/a' if acc is None else f'{acc:.4f}'}")
    run.write("model.phsn", lambda p: neuralnet.save_model(model, p))
    run.write("finetune_loss.csv", lambda p: neuralnet.save_loss_history(history, p))
    _write_rows(run, "evaluation.csv", _evaluation_rows(per_class), ["label", "accuracy"])
    run.report()
    return 0


def _unlabeled_faces(run: Run, manifest):
    """(photo_id, tensor, box) for every detected face, in corpus order."""
    from .imagecore import read_image

    cascade, params = _cascade(run.cfg), _detect_params(run.cfg)
    size = run.cfg["train"]["input_size"]
    items = []
    for p in sorted(manifest.photos, key=lambda p: (p.member_id, p.photo_id)):
        try:
            img = read_image(p.file_path)
        except (OSError, PhotostyleError) as exc:
            run.note(f"skipped: {p.file_path}: {exc}")
            continue
        for b in params.detect(img, cascade):
            items.append((p.photo_id, pipeline.face_tensor(img, b.rect, size), b.rect))
    return items


def cmd_bootstrap(args, run: Run) -> int:
    model = neuralnet.load_model(run.artifact("model.phsn", args.model))
    roster = _roster(run)
    manifest = corpus.load_manifest(run.artifact("sample.csv"), roster)
    cfg = _finetune_config(run.cfg)
    queue = pipeline.select_high_confidence(model, _unlabeled_faces(run, manifest), cfg.confidence_threshold)
    run.note(f"review queue: {len(queue)} face(s) at confidence >= {cfg.confidence_threshold:.6g}")
    if not args.review:
        run.write("review_queue.csv", lambda p: pipeline.write_review_file(queue, p))
        run.note("fill in the verdict column, then rerun with --review")
        run.report()
        return 0
    reviewed = pipeline.apply_review(queue, args.review)
    run.note(f"reviewed examples kept: {len(reviewed)}")
    if len(reviewed) == 0:
        raise PhotostyleError("every queued face was rejected; nothing to add")
    train, validation = _split(run, _labeled(run, args.labeled))
    result = pipeline.bootstrap_round(model, train, reviewed, cfg)
    run.note(f"augmented training set: {len(result.dataset)} examples; {cfg.bootstrap_iterations} iterations")
    per_class = pipeline.evaluate_per_class(result.model, validation, run.cfg["train"]["folds"], run.cfg.seed)
    run.write("bootstrap_model.phsn", lambda p: neuralnet.save_model(result.model, p))
    run.write("bootstrap_loss.csv", lambda p: neuralnet.save_loss_history(result.loss_history, p))
    _write_rows(run, "bootstrap_evaluation.csv", _evaluation_rows(per_class), ["label", "accuracy"])
    run.report()
    return 0


def cmd_classify(args, run: Run) -> int:
    model = neuralnet.load_model(run.artifact("model.phsn", args.model))
    roster = _roster(run)
    manifest = corpus.load_manifest(run.artifact("sample.csv"), roster)
    faces, report = pipeline.classify_corpus(model, _cascade(run.cfg), manifest, _detect_params(run.cfg),
                                             run.cfg.jobs)
    run.note(f"photos: {report.photos_seen}; with faces: {report.photos_with_faces}; faces: {report.faces}; "
             f"skipped files: {report.warnings}")
    for s in report.skipped:
        run.note(f"skipped: {s}")
    _write_rows(run, "classifications.csv", pipeline.classification_rows(faces), pipeline.CLASSIFICATION_COLUMNS)
    run.report()
    return 0


def cmd_aggregate(args, run: Run) -> int:
    roster = _roster(run)
    rows = corpus.load_table(run.artifact("classifications.csv"), pipeline.CLASSIFICATION_COLUMNS)
    exclude = run.cfg["analyze"]["exclude_self"]
    demo = analytics.aggregate_demographics(pipeline.faces_from_rows(rows), roster, exclude)
    run.note(f"members: {len(demo)}; faces: {sum(d.n_faces for d in demo)}; exclude_self: {exclude}")
    for d in demo:
        if d.insufficient:
            run.note(f"  {d.member_id}: no classified faces")
    _write_rows(run, "demographics.csv", [d.row() for d in demo], analytics.DEMOGRAPHIC_COLUMNS)
    run.report()
    return 0


def cmd_compare(args, run: Run) -> int:
    if not args.acs:
        raise UsageError("--acs FILE is required")
    roster = _roster(run)
    demo = [analytics.MemberPhotoDemographics.from_row(r)
            for r in corpus.load_table(run.artifact("demographics.csv"), analytics.DEMOGRAPHIC_COLUMNS)]
    joined = analytics.join_acs(demo, analytics.load_acs(args.acs), roster)
    level = run.cfg["analyze"]["level"]
    regressions, skipped = analytics.compare_demographics(joined, level=level)
    boxes = analytics.box_rows(analytics.party_box_groups(joined))
    run.note(f"joined members: {len(joined)}; regression rows: {len(regressions)}")
    for s in skipped:
        run.note(f"not estimated: {s}")
    _write_rows(run, "joined.csv", joined, analytics.JOINED_COLUMNS)
    _write_rows(run, "regressions.csv", regressions, analytics.REGRESSION_COLUMNS)
    _write_rows(run, "boxplots.csv", boxes, analytics.BOX_COLUMNS)
    run.report()
    return 0


def cmd_experiment(args, run: Run) -> int:
    if not args.responses:
        raise UsageError("--responses FILE is required")
    responses = corpus.load_table(args.responses)
    table = analytics.experiment_table(responses, level=run.cfg["analyze"]["level"],
                                       exclude_respondent_race=args.exclude_respondent_race or ())
    run.note(f"responses: {len(responses)}; summary rows: {len(table)}")
    _write_rows(run, "experiment.csv", analytics.experiment_rows(table), analytics.EXPERIMENT_COLUMNS)
    run.report()
    return 0


DEFAULT_FIGURES = (
    ("scatter_black.svg", "joined.csv",
     plotting.PlotSpec("scatter_with_fit", x="acs_pct_black", y=("fb_prop_black",), by="party",
                       x_label="% African-American in district", y_label="% African-American in photos")),
    ("scatter_white.svg", "joined.csv",
     plotting.PlotSpec("scatter_with_fit", x="acs_pct_white", y=("fb_prop_white",), by="party",
                       x_label="% White in district", y_label="% White in photos")),
    ("boxplot_minority.svg", "joined.csv",
     plotting.PlotSpec("boxplot_grid", y=("fb_prop_black", "fb_prop_hispanic", "fb_prop_asian"), by="party",
                       y_label="proportion of faces in photos")),
    ("fixed_effects.svg", "regressions.csv",
     plotting.PlotSpec("coefficient_dotplot", x="outcome", y=("estimate",), by="party",
                       x_label="district share regressed on photo share (state fixed effects)",
                       y_label="coefficient")),
)


def _plot_rows(run: Run, source: str, spec):
    rows = corpus.load_table(run.artifact(source))
    if source == "regressions.csv":
        rows = [r for r in rows if r["model"] == "fixed_effects" and r["term"] != "intercept"]
    return rows


def cmd_plot(args, run: Run) -> int:
    if args.kind:
        if not args.y:
            raise UsageError("--y is required with --kind")
        try:
            spec = plotting.PlotSpec(args.kind, x=args.x, y=tuple(args.y.split(",")), by=args.by,
                                     x_label=args.x_label or "", y_label=args.y_label or "",
                                     title=args.title or "")
        except PlotError as exc:
            raise UsageError(str(exc)) from None
        source = args.input or "joined.csv"
        rows = corpus.load_table(source) if args.input else corpus.load_table(run.artifact(source))
        name = args.output or f"{spec.kind}_{spec.y[0]}.svg"
        figures = [(name, rows, spec)]
    else:
        figures = [(name, _plot_rows(run, source, spec), spec) for name, source, spec in DEFAULT_FIGURES]
        exp = run.target("experiment.csv")
        if exp.exists():
            rows = [r for r in corpus.load_table(exp) if r["outcome"] == "party_guess"]
            figures.append(("experiment_party_guess.svg", rows,
                            plotting.PlotSpec("bar_with_ci", x="group", y=("mean",),
                                              x_label="treatment arm", y_label="share guessing Democrat")))
    for name, rows, spec in figures:
        svg = plotting.render_svg(spec, rows)
        run.write(name, lambda p, svg=svg: p.write_text(svg, encoding="utf-8"))
        run.note(f"wrote {name} ({spec.kind}, {len(rows)} rows)")
    run.report()
    return 0


# --- argument parsing ----------------------------------------------------------------

COMMANDS = {
    "fixture": cmd_fixture, "ingest": cmd_ingest, "detect": cmd_detect, "train": cmd_train,
    "finetune": cmd_finetune, "bootstrap": cmd_bootstrap, "classify": cmd_classify,
    "aggregate": cmd_aggregate, "compare": cmd_compare, "experiment": cmd_experiment, "plot": cmd_plot,
}

# flag dest -> (config section, key)
CONFIG_FLAGS = {
    "source": ("fetch", "source"), "max_photos": ("fetch", "max_photos"), "rate": ("fetch", "rate"),
    "cascade": ("detect", "cascade"), "scale_factor": ("detect", "scale_factor"),
    "min_size": ("detect", "min_size"), "min_neighbors": ("detect", "min_neighbors"),
    "sample_fraction": ("detect", "sample_fraction"),
    "input_size": ("train", "input_size"), "learning_rate": ("train", "learning_rate"),
    "batch_size": ("train", "batch_size"), "base_iterations": ("train", "base_iterations"),
    "initial_iterations": ("train", "initial_iterations"),
    "bootstrap_iterations": ("train", "bootstrap_iterations"), "freeze_prefix": ("train", "freeze_prefix"),
    "confidence_threshold": ("train", "confidence_threshold"), "train_fraction": ("train", "train_fraction"),
    "folds": ("train", "folds"),
    "exclude_self": ("analyze", "exclude_self"), "level": ("analyze", "level"),
}


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", default=default, help="TOML config file (default: $PHOTOSTYLE_CONFIG)")
    g.add_argument("--seed", type=int, default=default)
    g.add_argument("--jobs", type=int, default=default, help="worker threads for per-photo work")
    g.add_argument("--output-dir", default=default)
    g.add_argument("--dry-run", action="store_true", default=argparse.SUPPRESS if suppress else False)
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def _detect_flags(p):
    p.add_argument("--cascade", help="cascade file (default: bundled demo cascade)")
    p.add_argument("--scale-factor", type=float)
    p.add_argument("--min-size", type=int)
    p.add_argument("--min-neighbors", type=int)


def _train_flags(p):
    p.add_argument("--labeled", help="directory of <Label>/*.png training portraits")
    p.add_argument("--input-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--freeze-prefix", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photostyle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"photostyle {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], description=help_)

    p = add("fixture", "write the synthetic demonstration fixture")
    p.add_argument("directory")

    p = add("ingest", "build the roster and photo manifest")
    p.add_argument("--roster", required=True, help="legislator CSV")
    p.add_argument("--legislators", help="legislator manifest with social accounts")
    p.add_argument("--photos-dir", help="existing <member_id>/<photo> corpus")
    p.add_argument("--source", help="paginated photo listing URL template")
    p.add_argument("--max-photos", type=int)
    p.add_argument("--rate", type=float)

    p = add("detect", "find faces, keep photos with faces, sample per member")
    _detect_flags(p)
    p.add_argument("--sample-fraction", type=float)

    p = add("train", "train a base network on labelled portraits")
    _detect_flags(p)
    _train_flags(p)
    p.add_argument("--base-iterations", type=int)

    p = add("finetune", "fit a new 4-class head and evaluate per class")
    _detect_flags(p)
    _train_flags(p)
    p.add_argument("--base-model", help="network to start from (default: fresh compact network)")
    p.add_argument("--initial-iterations", type=int)

    p = add("bootstrap", "queue confident predictions for review, or train on a reviewed queue")
    _detect_flags(p)
    _train_flags(p)
    p.add_argument("--model", help="network to bootstrap (default: <output-dir>/model.phsn)")
    p.add_argument("--review", help="completed review file; omit to write the queue")
    p.add_argument("--confidence-threshold", type=float)
    p.add_argument("--bootstrap-iterations", type=int)

    p = add("classify", "label every detected face in the sample")
    _detect_flags(p)
    p.add_argument("--model", help="network to use (default: <output-dir>/model.phsn)")

    p = add("aggregate", "per-member label proportions")
    p.add_argument("--exclude-self", action="store_true", default=None,
                   help="drop one White face per photo of members flagged is_white")

    p = add("compare", "join census data and run the regressions")
    p.add_argument("--acs", help="census CSV: geo_id,pct_white,pct_black,pct_hispanic,pct_asian")
    p.add_argument("--level", type=float)

    p = add("experiment", "summarise survey responses by treatment arm")
    p.add_argument("--responses", help="response CSV")
    p.add_argument("--exclude-respondent-race", action="append")
    p.add_argument("--level", type=float)

    p = add("plot", "render SVG figures (all standard figures when --kind is omitted)")
    p.add_argument("--kind", help=", ".join(plotting.KINDS) + " (or scatter, boxplot, dotplot, bar)")
    p.add_argument("--x")
    p.add_argument("--y", help="column, or comma-separated columns for boxplot grids")
    p.add_argument("--by")
    p.add_argument("--input", help="CSV to plot (default: <output-dir>/joined.csv)")
    p.add_argument("--output", help="SVG file name inside the output directory")
    p.add_argument("--x-label")
    p.add_argument("--y-label")
    p.add_argument("--title")
    return parser


def make_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        cfg.jobs = args.jobs
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    cfg.dry_run = bool(args.dry_run)
    overrides: dict = {}
    for dest, (section, key) in CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    for section, values in overrides.items():
        cfg.update(section, values)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        run = Run(cfg, args.command)
        return COMMANDS[args.command](args, run)
    except (UsageError, ConfigError) as exc:
        print(f"photostyle {args.command}: {exc}", file=sys.stderr)
        return 2
    except (PhotostyleError, OSError, ValueError) as exc:
        print(f"photostyle {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
