"""One binary for the whole pipeline: corpus generation, extraction, pair
building, training, evaluation, suggestion, classification, retrieval and
serving.

Config precedence: flags > config file (env LAYOUTGRAPH_CONFIG, JSON keyed by
subcommand mirroring flag names) > defaults. Validation failures exit 1, I/O
failures exit 2, with machine-readable JSON on stderr.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .autocomplete import Autocompleter, RefineConfig
from .embeddings import EmbeddingConfig
from .extraction import ExtractionConfig, extract_all
from .metrics import (
    center_baseline_predictor,
    evaluate,
    make_pairs,
    model_predictor,
    pairs_from_json,
    pairs_to_json,
    truth_constraint_predictor,
    truth_oracle_predictor,
)
from .model import (
    ParseError,
    ValidationError,
    constraints_to_json,
    gui_from_json,
    gui_to_json,
)
from .objective import LossWeights
from .params import ModelConfig, ModelParams
from .synthetic import SynthConfig, TOPICS, gen_synthetic
from .tasks import build_index, classify, load_index, retrieve, save_index
from .training import train_autocomplete, train_classifier


def _fail(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"kind": kind, "error": message}) + "\n")
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ParseError, ValueError) as exc:
            _fail("validation", str(exc), 1)
        except OSError as exc:
            _fail("io", str(exc), 2)

    return wrapper


def _load_default_map() -> dict:
    path = os.environ.get("LAYOUTGRAPH_CONFIG")
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        _fail("io", f"bad config file {path!r}: {exc}", 2)


@click.group(context_settings={"default_map": None})
@click.option("--json", "json_out", is_flag=True, default=False,
              help="Emit machine-readable JSON on stdout.")
@click.option("--threads", type=int, default=0,
              help="Worker threads for evaluation (0 = machine cores).")
@click.pass_context
def main(ctx: click.Context, json_out: bool, threads: int) -> None:
    """Layout-graph engine: GUI autocompletion, classification, retrieval."""
    ctx.default_map = _load_default_map()
    ctx.obj = {"json": json_out, "threads": threads}


def _echo(ctx_obj: dict, doc: dict, human: str) -> None:
    if ctx_obj.get("json"):
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(human)


def _read_guis(data_dir: str) -> list:
    paths = sorted(Path(data_dir).glob("*.json"))
    paths = [p for p in paths if p.name != "manifest.json"]
    if not paths:
        raise ValidationError(f"no GUI json files under {data_dir!r}")
    return [gui_from_json(p.read_bytes()) for p in paths]


def _model_config(node_dim: int, coord_dim: int, coord_max: int, layers: int,
                  topics: tuple[str, ...] = ()) -> ModelConfig:
    emb = EmbeddingConfig(coord_dim=coord_dim, node_dim=node_dim, coord_max=coord_max)
    return ModelConfig(embedding=emb, gnn_layers=layers, topics=topics)


@main.command("gen-synthetic")
@click.option("--seed", type=int, default=0)
@click.option("--count", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--canvas-w", type=int, default=360)
@click.option("--canvas-h", type=int, default=640)
@click.pass_obj
@guarded
def gen_synthetic_cmd(obj, seed, count, out_dir, canvas_w, canvas_h):
    """Write a seeded synthetic GUI corpus into a directory."""
    guis = gen_synthetic(seed, count, SynthConfig(canvas_w, canvas_h))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i, gui in enumerate(guis):
        name = f"gui_{i:05d}.json"
        (out / name).write_bytes(gui_to_json(gui))
        names.append(name)
    manifest = {"seed": seed, "count": count, "topics": list(TOPICS), "files": names}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    _echo(obj, {"written": len(names), "dir": str(out)},
          f"wrote {len(names)} GUIs to {out}")


@main.command("extract-constraints")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--tol", type=int, default=2)
@click.option("--group-gap", type=int, default=32)
@click.pass_obj
@guarded
def extract_cmd(obj, in_path, out_path, tol, group_gap):
    """Infer alignment/size/group constraints from a placed layout."""
    gui = gui_from_json(Path(in_path).read_bytes())
    cons = extract_all(gui, ExtractionConfig(tol=tol, group_gap=group_gap))
    Path(out_path).write_bytes(constraints_to_json(cons))
    _echo(obj, {"constraints": len(cons), "out": out_path},
          f"extracted {len(cons)} constraints -> {out_path}")


@main.command("pairs")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--chunks", type=int, default=30)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--uniform-subset", is_flag=True, default=False)
@click.pass_obj
@guarded
def pairs_cmd(obj, data_dir, seed, chunks, out_path, uniform_subset):
    """Build (partial GUI, target) samples from a corpus directory."""
    guis = _read_guis(data_dir)
    pairs = []
    for i, gui in enumerate(guis):
        pairs.extend(make_pairs(gui, seed=(seed * 1_000_003 + i) % (2 ** 63),
                                chunks_per_gui=chunks, uniform_subset=uniform_subset))
    Path(out_path).write_bytes(pairs_to_json(pairs))
    _echo(obj, {"pairs": len(pairs), "out": out_path},
          f"wrote {len(pairs)} pairs -> {out_path}")


@main.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--task", type=click.Choice(["autocomplete", "classify"]), default="autocomplete")
@click.option("--epochs", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--lambda", "lam", type=float, default=1.0)
@click.option("--eta", type=float, default=1.0)
@click.option("--lr", type=float, default=1e-3)
@click.option("--chunks", type=int, default=2, help="Pair draws per GUI (autocomplete).")
@click.option("--node-dim", type=int, default=64)
@click.option("--coord-dim", type=int, default=8)
@click.option("--layers", type=int, default=2)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_obj
@guarded
def train_cmd(obj, data_dir, task, epochs, seed, lam, eta, lr, chunks,
              node_dim, coord_dim, layers, out_path):
    """Train a checkpoint; writes the model plus a CSV loss log alongside."""
    guis = _read_guis(data_dir)
    coord_max = max(max(g.canvas_w, g.canvas_h) for g in guis)
    if task == "autocomplete":
        config = _model_config(node_dim, coord_dim, coord_max, layers)
        params, rows, final = train_autocomplete(
            guis, config, seed=seed, epochs=epochs,
            weights=LossWeights(lam=lam, eta=eta), lr=lr, chunks_per_gui=chunks)
        doc = {"total": final.total, "mse": final.element_mse,
               "boundary": final.boundary, "bce": final.constraint_bce}
        human = (f"final loss: total={final.total:.6f} mse={final.element_mse:.6f} "
                 f"boundary={final.boundary:.6f} bce={final.constraint_bce:.6f}")
    else:
        labeled = [(g, g.topic) for g in guis if g.topic]
        if not labeled:
            raise ValidationError("classification training needs topic labels")
        topics = tuple(sorted({t for _, t in labeled}))
        config = _model_config(node_dim, coord_dim, coord_max, layers, topics)
        params, rows = train_classifier(labeled, config, seed=seed, epochs=epochs, lr=lr)
        doc = {"final_loss": float(rows[-1].split(",")[1]), "topics": list(topics)}
        human = f"final loss: {doc['final_loss']:.6f} over {len(topics)} topics"
    params.save(out_path)
    Path(str(out_path) + ".loss.csv").write_text("\n".join(rows) + "\n")
    _echo(obj, {**doc, "checkpoint": str(out_path)}, human + f"\ncheckpoint -> {out_path}")


@main.command("eval")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), required=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--sigma", type=float, default=20.0)
@click.option("--baselines/--no-baselines", default=True)
@click.pass_obj
@guarded
def eval_cmd(obj, model_path, pairs_path, report_path, sigma, baselines):
    """Evaluate a checkpoint (and reference predictors) on a pair file."""
    params = ModelParams.load(model_path)
    pairs = pairs_from_json(Path(pairs_path).read_bytes())
    ac = Autocompleter(params, refine_config=RefineConfig(sigma=sigma))
    result = evaluate(model_predictor(ac), pairs)
    doc = {"model": result.report.to_dict()}
    if baselines:
        doc["center_baseline"] = evaluate(center_baseline_predictor(), pairs).report.to_dict()
        doc["truth_oracle"] = evaluate(truth_oracle_predictor(), pairs).report.to_dict()
        doc["truth_constraints"] = evaluate(truth_constraint_predictor(ac), pairs).report.to_dict()
    Path(report_path).write_text(json.dumps(doc, indent=2, sort_keys=True))
    o = result.report.overall
    _echo(obj, doc, (f"model: pos={o.pos_error:.4f} area={o.area_error:.4f} "
                     f"align={o.align_error:.4f} over {o.count} pairs -> {report_path}"))


@main.command("suggest")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--gui", "gui_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["single", "group", "all"]), default="single")
@click.option("--target", type=str, default=None)
@click.option("--sigma", type=float, default=20.0)
@click.pass_obj
@guarded
def suggest_cmd(obj, model_path, gui_path, mode, target, sigma):
    """Print suggestion JSON for a GUI with unplaced elements."""
    params = ModelParams.load(model_path)
    gui = gui_from_json(Path(gui_path).read_bytes())
    ac = Autocompleter(params, refine_config=RefineConfig(sigma=sigma))
    if mode == "single":
        s = ac.suggest(gui, target) if target else ac.suggest_one(gui)
        out = [s.to_dict()]
    elif mode == "group":
        out = [s.to_dict() for s in ac.suggest_group(gui)]
    else:
        out = [s.to_dict() for s in ac.suggest_all(gui)]
    click.echo(json.dumps(out if mode != "single" else out[0], sort_keys=True))


@main.command("classify")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--gui", "gui_path", type=click.Path(exists=True), required=True)
@click.pass_obj
@guarded
def classify_cmd(obj, model_path, gui_path):
    """Predict the GUI's topic from its graph embedding."""
    params = ModelParams.load(model_path)
    gui = gui_from_json(Path(gui_path).read_bytes())
    label, probs = classify(gui, params)
    doc = {"topic": label,
           "probabilities": {t: float(p) for t, p in zip(params.config.topics, probs)}}
    click.echo(json.dumps(doc, sort_keys=True))


@main.command("build-index")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--metric", type=click.Choice(["euclidean", "cosine"]), default="euclidean")
@click.pass_obj
@guarded
def build_index_cmd(obj, model_path, data_dir, out_path, metric):
    """Embed a corpus directory into a retrieval index file."""
    params = ModelParams.load(model_path)
    paths = sorted(p for p in Path(data_dir).glob("*.json") if p.name != "manifest.json")
    guis = [gui_from_json(p.read_bytes()) for p in paths]
    index = build_index(guis, params, ids=[p.stem for p in paths], metric=metric)
    save_index(out_path, index)
    _echo(obj, {"entries": len(index.ids), "out": str(out_path)},
          f"indexed {len(index.ids)} GUIs -> {out_path}")


@main.command("retrieve")
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--gui", "gui_path", type=click.Path(exists=True), required=True)
@click.option("-k", "top_k", type=int, default=5)
@click.pass_obj
@guarded
def retrieve_cmd(obj, index_path, gui_path, top_k):
    """Nearest neighbors of a query GUI in an index."""
    index = load_index(index_path)
    gui = gui_from_json(Path(gui_path).read_bytes())
    ids = retrieve(gui, index, top_k)
    click.echo(json.dumps({"neighbors": ids}, sort_keys=True))


@main.command("serve")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=8787)
@click.option("--host", type=str, default="127.0.0.1")
@click.option("--sigma", type=float, default=20.0)
@click.pass_obj
@guarded
def serve_cmd(obj, model_path, port, host, sigma):
    """Run the HTTP session service (random-init model if none given)."""
    import uvicorn

    from .service import create_app

    if model_path:
        params = ModelParams.load(model_path)
    else:
        params = ModelParams.initialize(_model_config(64, 8, 2560, 2), seed=0)
    ac = Autocompleter(params, refine_config=RefineConfig(sigma=sigma))
    uvicorn.run(create_app(ac), host=host, port=port)


if __name__ == "__main__":
    main()
