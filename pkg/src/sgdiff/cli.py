"""Command-line interface.

Exit codes: 0 success, 2 validation failure, 64 usage error, 70 internal error.
Failures print one JSON line ``{"error": kind, "message": ...}`` on stderr.
Every subcommand writes a run manifest (config echo, versions, timings, seed).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import TemplateSpec, cow_omega, gen_cow_like, load_corpus, save_corpus, tree_corpus, tree_omega
from .edges import TransitionModel
from .evalkit import compare_corpora
from .graph import GraphError, check_omega, load_graph, load_omega, save_graph, save_omega
from .model import GraphDiffusionModel
from .pipeline import TrainSettings, complete_graphs, generate, run_report, train_model
from .projector import ProjectorConfig
from .rng import substream

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_INTERNAL = 0, 2, 64, 70
OUT_ENV = "SGDIFF_OUT_DIR"

log = logging.getLogger("sgdiff")


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_path(path: str) -> Path:
    """Honour the output-directory override for any output location."""
    p = Path(path)
    override = os.environ.get(OUT_ENV)
    return Path(override) / p.name if override else p


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=1, sort_keys=True), encoding="utf-8")
    tmp.replace(path)


def _manifest(args, started: float, where: Path, extra: dict | None = None) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    man = {
        "subcommand": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "versions": {"sgdiff": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "timings": {"total_seconds": round(time.perf_counter() - started, 3)},
    }
    man.update(extra or {})
    _write_json(where, man)


def _projector_config(args) -> ProjectorConfig:
    omega = load_omega(_existing(args.omega, "omega file")) if args.omega else None
    structural = None if args.structural in (None, "none") else args.structural
    return ProjectorConfig(omega, structural, args.k)


# --- subcommands -----------------------------------------------------------------

def cmd_datagen(args, started):
    out = _out_path(args.out)
    rng = substream(args.seed, "datagen")
    if args.kind == "trees":
        if args.min_nodes < 2 or args.max_nodes < args.min_nodes:
            raise UsageError("need 2 <= --min-nodes <= --max-nodes")
        graphs = tree_corpus(args.count, args.min_nodes, args.max_nodes, rng)
        omega = tree_omega()
    else:
        spec = TemplateSpec(jitter=args.jitter, dropout=args.dropout)
        graphs = [gen_cow_like(spec, rng) for _ in range(args.count)]
        omega = cow_omega()
    save_corpus(graphs, out, omega.labels)
    save_omega(omega, out / "omega.json")
    _manifest(args, started, out / "manifest.json", {"graphs": len(graphs)})
    print(f"wrote {len(graphs)} graphs to {out}")


def cmd_train(args, started):
    data = _existing(args.data, "data directory")
    corpus = load_corpus(data)
    if not corpus.graphs:
        raise UsageError(f"no graphs in {data}")
    names = {f.name for f in fields(TrainSettings)}
    settings = TrainSettings(**{k: v for k, v in vars(args).items() if k in names and v is not None})
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    def progress(stage, epoch, loss):
        log.info("%s epoch %d loss %.5f", stage, epoch, loss)

    model = train_model(corpus.graphs, settings, corpus.labels, progress)
    model.save(out)
    hist = model.history
    _manifest(args, started, out.with_name(out.name + ".manifest.json"),
              {"final_edge_loss": (hist.get("edge_loss") or [None])[-1],
               "final_coord_loss": (hist.get("coord_loss") or [None])[-1]})
    print(f"saved checkpoint {out}")


def cmd_generate(args, started):
    model = GraphDiffusionModel.load(_existing(args.model, "checkpoint"))
    cfg = _projector_config(args)
    if args.noising:
        model.transition = TransitionModel(args.noising, model.transition.class_count, model.transition.target) \
            if args.noising == "marginal" else TransitionModel(args.noising, model.transition.class_count)
    coords_from = load_corpus(_existing(args.coords_from, "coordinate corpus")).graphs if args.coords_from else None
    out = _out_path(args.out)
    t0 = time.perf_counter()
    graphs, results = generate(model, args.count, cfg, args.seed, coords_from, workers=args.workers)
    elapsed = time.perf_counter() - t0
    save_corpus(graphs, out, model.labels)
    report = run_report(graphs, results, cfg, model.transition.kind, elapsed, args.omega)
    _write_json(out / "run_report.json", report)
    _manifest(args, started, out / "manifest.json")
    print(f"wrote {len(graphs)} graphs to {out} (intervention rate {report['intervention_rate']:.4f})")


def cmd_evaluate(args, started):
    ref = load_corpus(_existing(args.reference, "reference directory")).graphs
    gen = load_corpus(_existing(args.generated, "generated directory")).graphs
    if not ref or not gen:
        raise UsageError("both corpora must contain graphs")
    omega = load_omega(_existing(args.omega, "omega file")) if args.omega else None
    structural = None if args.structural in (None, "none") else args.structural
    report = compare_corpora(ref, gen, omega, structural, args.bins)
    out = _out_path(args.out)
    _write_json(out, report)
    _manifest(args, started, out.with_name(out.name + ".manifest.json"))
    print(json.dumps(report, sort_keys=True))


def cmd_linkpredict(args, started):
    model = GraphDiffusionModel.load(_existing(args.model, "checkpoint"))
    partial = load_graph(_existing(args.input, "input graph"))
    cfg = _projector_config(args)
    report = check_omega(partial, cfg.omega, cfg.structural)
    if report:
        raise ValidationFailure("input graph violates the constraints: " + "; ".join(report.lines()[:5]))
    if not 1 <= args.steps <= model.steps:
        raise UsageError(f"--steps must lie in 1..{model.steps}")
    done = complete_graphs(model, [partial], cfg, args.steps, args.seed)[0]
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(done, out)
    _manifest(args, started, out.with_name(out.name + ".manifest.json"),
              {"input_edges": partial.edge_count, "output_edges": done.edge_count})
    print(f"added {done.edge_count - partial.edge_count} edges; wrote {out}")


def cmd_validate(args, started):
    g = load_graph(_existing(args.input, "input graph"))
    omega = load_omega(_existing(args.omega, "omega file")) if args.omega else None
    structural = None if args.structural in (None, "none") else args.structural
    report = check_omega(g, omega, structural)
    where = Path(args.manifest) if args.manifest else _out_path(str(Path(args.input).with_suffix(".validate.json")))
    _manifest(args, started, where, {"valid": not report, "violations": len(report.lines())})
    if report:
        for line in report.lines():
            print(line)
        raise ValidationFailure(f"{len(report.lines())} violation(s)")
    print("valid")


# --- parser ------------------------------------------------------------------------

def _add_projector_flags(p):
    p.add_argument("--omega", help="label-adjacency constraint file (JSON)")
    p.add_argument("--structural", choices=["none", "forest"], default=None, help="structural constraint")
    p.add_argument("--k", type=int, default=4, help="label resample budget per conflicting edge (default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sgdiff", description="Constrained two-stage diffusion for labeled 3D spatial graphs.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("datagen", help="write a synthetic corpus and its omega file")
    p.add_argument("kind", choices=["trees", "cow"])
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--min-nodes", type=int, default=40)
    p.add_argument("--max-nodes", type=int, default=120)
    p.add_argument("--jitter", type=float, default=0.08, help="cow: coordinate noise")
    p.add_argument("--dropout", type=float, default=0.1, help="cow: edge drop-out probability")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="train coordinate and edge denoisers")
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="JSON file of defaults for the flags below")
    p.add_argument("--stage", choices=["both", "edges", "coords"], default="both")
    p.add_argument("--schedule", choices=["linear", "cosine"], default="linear")
    p.add_argument("--steps", type=int, default=500, help="diffusion steps T")
    p.add_argument("--noising", choices=["absorbing", "uniform", "marginal"], default="absorbing")
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--coord-epochs", type=int, default=None)
    p.add_argument("--batch-size", "--batch", type=int, default=4)
    p.add_argument("--weight-decay", type=float, default=1e-2)
    p.add_argument("--blocks", type=int, default=3, help="edge message-passing blocks")
    p.add_argument("--hidden", type=int, default=32, help="edge network width")
    p.add_argument("--coord-hidden", type=int, default=64)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample graphs from a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_projector_flags(p)
    p.add_argument("--noising", choices=["absorbing", "uniform", "marginal"], default=None,
                   help="override the checkpoint's transition kind")
    p.add_argument("--coords-from", help="take node positions from this corpus instead of the coordinate model")
    p.add_argument("--workers", type=int, default=1, help="processes for independent chains")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="compare a generated corpus with a reference corpus")
    p.add_argument("--reference", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--omega")
    p.add_argument("--structural", choices=["none", "forest"], default=None)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("linkpredict", help="add missing edges to a partial graph")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_projector_flags(p)
    p.set_defaults(func=cmd_linkpredict)

    p = sub.add_parser("validate", help="check a graph against omega and structure")
    p.add_argument("--input", required=True)
    p.add_argument("--omega")
    p.add_argument("--structural", choices=["none", "forest"], default=None)
    p.add_argument("--manifest", help="where to write the run manifest (default: next to the input)")
    p.set_defaults(func=cmd_validate)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = json.loads(_existing(args.config, "config file").read_text(encoding="utf-8"))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = _parse(argv)
    except UsageError as err:
        return _fail("usage", str(err), EXIT_USAGE)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (OSError, ValueError) as err:
        return _fail("usage", str(err), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args, started)
    except UsageError as err:
        return _fail("usage", str(err), EXIT_USAGE)
    except ValidationFailure as err:
        return _fail("invalid", str(err), EXIT_INVALID)
    except GraphError as err:
        return _fail("invalid-input", str(err), EXIT_INVALID)
    except Exception as err:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        return _fail("internal", f"{type(err).__name__}: {err}", EXIT_INTERNAL)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
