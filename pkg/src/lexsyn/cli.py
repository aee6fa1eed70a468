"""Command-line entry point: ``lexsyn <command> [options]``.

Every command writes ``manifest.json`` (resolved configuration, seed and
library versions) into its ``--out`` directory.  Configuration can come
from a JSON file given with ``--config``; command-line flags override
file values.  The file schema::

    {
      "seed": 0,
      "corpus":     {"langs": ["en", "fr", "tr"], "train": 2000, "dev": 0, "test": 500,
                     "task": "pair", "lexicon_noise": 0.0, "source": null},
      "codeswitch": {"alpha": 0.5, "mode": "random", "candidates": [],
                     "protect_entities": false, "excluded_upos": ["PUNCT"]},
      "gat":        {"num_layers": 4, "heads_per_layer": 4, "model_dim": 32, "mask_delta": 4},
      "encoder":    {"num_layers": 2, "num_heads": 4, "model_dim": 32, "ffn_dim": 64,
                     "max_seq_len": 128, "bias_enabled": true, "bias_layers": null},
      "training":   {"learning_rate": 2e-5, "batch_size": 64, "epochs": 20, "weight_decay": 0.01,
                     "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "clip_norm": 1.0, "reaugment": true}
    }

Unknown keys are rejected.  Exit status is 0 on success, 2 on usage or
configuration errors and 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_model, model_manifest, save_model
from .codeswitch import MODES, ExampleAugmenter, CodeSwitchPolicy, augment_corpus, write_report
from .conllu_io import ConlluError, TreeError, read_conllu, validate_tree, write_conllu
from .eval_analysis import centroid_similarities, evaluate, transfer_matrix
from .experiments import gradcheck_fixture
from .lexicon import read_lexicon
from .model import PAIR, TAGGING, build_model
from .synth_corpus import default_languages, gen_corpus, gen_lexicons, read_corpus, write_corpus
from .training import TrainingConfig, grad_check, train

log = logging.getLogger("lexsyn")

TASKS = {"pair": PAIR, "tagging": TAGGING, PAIR: PAIR, TAGGING: TAGGING}

DEFAULTS = {
    "seed": 0,
    "corpus": {"langs": ["en", "fr", "tr"], "train": 2000, "dev": 0, "test": 500, "task": "pair",
               "lexicon_noise": 0.0, "source": None},
    "codeswitch": {"alpha": 0.5, "mode": "random", "candidates": [], "protect_entities": False,
                   "excluded_upos": ["PUNCT"]},
    "gat": {"num_layers": 4, "heads_per_layer": 4, "model_dim": 32, "mask_delta": 4},
    "encoder": {"num_layers": 2, "num_heads": 4, "model_dim": 32, "ffn_dim": 64, "max_seq_len": 128,
                "bias_enabled": True, "bias_layers": None},
    "training": {"learning_rate": 2e-5, "batch_size": 64, "epochs": 20, "weight_decay": 0.01,
                 "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "clip_norm": 1.0, "reaugment": True},
}


class UsageError(Exception):
    pass


def merge_config(base: dict, override: dict, path: str = "") -> dict:
    """Recursive merge that rejects keys absent from ``base``."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise UsageError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"configuration key {where!r} must be an object")
            out[key] = merge_config(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _delta(text) -> float:
    if isinstance(text, str) and text.lower() in ("inf", "full"):
        return float("inf")
    return float(text)


def _alpha_grid(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop``, or a comma list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(round((stop - start) / step))
            return [round(start + i * step, 10) for i in range(n + 1)]
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha grid {text!r}; expected start:stop:step") from None


def _csv_list(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lexsyn", description="Syntax-biased, code-switched cross-lingual encoders at toy scale.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def common(sp, out_required=False):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=out_required, default=None if out_required else "lexsyn-out",
                        help="output directory (manifest and artifacts)")

    sp = sub.add_parser("gen-corpus", help="write a synthetic parallel corpus and its lexicons")
    common(sp, out_required=True)
    sp.add_argument("--langs", type=_csv_list)
    sp.add_argument("--task", choices=sorted(TASKS))
    sp.add_argument("--train", type=int)
    sp.add_argument("--dev", type=int)
    sp.add_argument("--test", type=int)
    sp.add_argument("--lexicon-noise", type=float)

    sp = sub.add_parser("augment", help="code-switch a CoNLL-U file")
    common(sp, out_required=True)
    sp.add_argument("--input", required=True, help="CoNLL-U file")
    sp.add_argument("--lang", required=True, help="language of the input sentences")
    sp.add_argument("--lexicon", action="append", default=[], metavar="LANG=PATH", required=True,
                    help="MUSE lexicon from --lang into LANG (repeatable)")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--cs-mode", choices=MODES)
    sp.add_argument("--candidates", type=_csv_list)
    sp.add_argument("--target")
    sp.add_argument("--protect-entities", action="store_true", default=None)
    sp.add_argument("--epoch", type=int, default=0)

    sp = sub.add_parser("train", help="train on the source language of a corpus directory")
    common(sp, out_required=True)
    sp.add_argument("--corpus", required=True, help="directory written by gen-corpus")
    sp.add_argument("--source")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--alpha-grid", type=_alpha_grid, help="e.g. 0:0.9:0.1; one run per value")
    sp.add_argument("--cs-mode", choices=MODES)
    sp.add_argument("--mask-delta", type=_delta)
    sp.add_argument("--no-bias", action="store_true")
    sp.add_argument("--no-codeswitch", action="store_true")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", type=int)

    sp = sub.add_parser("eval", help="score a model on every language of a corpus")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--metric", choices=["accuracy", "span_f1", "token_accuracy"])

    sp = sub.add_parser("gradcheck", help="finite-difference gradient check of the full model")
    common(sp)
    sp.add_argument("--task", choices=sorted(TASKS), default="pair")
    sp.add_argument("--h", type=float, default=1e-5)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--threshold", type=float, default=1e-4)
    sp.add_argument("--at-init", action="store_true",
                    help="check at the raw initialization instead of rescaled embeddings")

    sp = sub.add_parser("similarity", help="cosine between language centroids of [CLS] vectors")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--source")
    sp.add_argument("--split", default="test")

    sp = sub.add_parser("transfer-matrix", help="generalized cross-lingual transfer matrix as CSV")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--langs", type=_csv_list)
    sp.add_argument("--metric", choices=["accuracy", "span_f1", "token_accuracy"])

    sp = sub.add_parser("validate", help="check that every sentence of a CoNLL-U file is a tree")
    common(sp)
    sp.add_argument("--input", required=True)
    return p


def resolve_config(args) -> dict:
    cfg = DEFAULTS
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise UsageError("configuration file must hold a JSON object")
        cfg = merge_config(cfg, loaded)
    flags: dict = {}

    def put(section, key, value):
        if value is not None:
            if section is None:
                flags[key] = value
            else:
                flags.setdefault(section, {})[key] = value

    a = vars(args)
    put(None, "seed", a.get("seed"))
    if args.command == "gen-corpus":
        put("corpus", "langs", a.get("langs"))
        put("corpus", "task", a.get("task"))
        for k in ("train", "dev", "test"):
            put("corpus", k, a.get(k))
        put("corpus", "lexicon_noise", a.get("lexicon_noise"))
    put("corpus", "source", a.get("source"))
    put("codeswitch", "alpha", a.get("alpha"))
    put("codeswitch", "mode", a.get("cs_mode"))
    put("codeswitch", "candidates", a.get("candidates"))
    put("codeswitch", "protect_entities", a.get("protect_entities"))
    put("gat", "mask_delta", a.get("mask_delta"))
    if a.get("no_bias"):
        put("encoder", "bias_enabled", False)
    put("training", "epochs", a.get("epochs"))
    put("training", "learning_rate", a.get("lr"))
    put("training", "batch_size", a.get("batch_size"))
    return merge_config(cfg, flags)


def _versions() -> dict:
    return {"lexsyn": __version__, "numpy": np.__version__, "python": platform.python_version()}


def write_manifest(out: Path, command: str, cfg: dict, extra: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "seed": cfg["seed"], "config": _jsonable(cfg), "versions": _versions()}
    if extra:
        manifest.update(_jsonable(extra))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and obj == float("inf"):
        return "inf"
    return obj


def _lexicons_from_dir(d: Path, langs) -> dict:
    out = {}
    for a in langs:
        for b in langs:
            path = d / f"lexicon.{a}-{b}.txt"
            if a != b and path.exists():
                out[(a, b)] = read_lexicon(path, a, b)
    return out


def _emit(obj) -> None:
    print(json.dumps(_jsonable(obj), sort_keys=True))


# -- commands -----------------------------------------------------------------

def cmd_gen_corpus(args, cfg) -> int:
    c = cfg["corpus"]
    out = Path(args.out)
    task = TASKS.get(c["task"])
    if task is None:
        raise UsageError(f"unknown task {c['task']!r}")
    specs = default_languages(c["langs"], seed=cfg["seed"])
    sizes = {k: c[k] for k in ("train", "dev", "test") if c[k]}
    corpus = gen_corpus(specs, sizes, task=task, seed=cfg["seed"])
    lex = gen_lexicons(specs, noise=c["lexicon_noise"], seed=cfg["seed"])
    files = write_corpus(corpus, lex, out)
    write_manifest(out, args.command, cfg, {"files": files})
    log.info("wrote %d files to %s", len(files), out)
    return 0


def cmd_augment(args, cfg) -> int:
    cs = cfg["codeswitch"]
    out = Path(args.out)
    lexicons = {}
    for item in args.lexicon:
        lang, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--lexicon expects LANG=PATH, got {item!r}")
        lexicons[lang] = read_lexicon(path, args.lang, lang)
    candidates = tuple(cs["candidates"]) or tuple(lexicons)
    policy = CodeSwitchPolicy(alpha=cs["alpha"], mode=cs["mode"], candidate_langs=candidates,
                              protect_entities=cs["protect_entities"], seed=cfg["seed"],
                              excluded_upos=frozenset(cs["excluded_upos"]))
    sents = read_conllu(args.input, lang=args.lang)
    new, reports = augment_corpus(sents, lexicons, policy, target_lang=args.target or candidates[0],
                                  epoch=args.epoch)
    out.mkdir(parents=True, exist_ok=True)
    write_conllu(out / "augmented.conllu", new)
    write_report(out / "report.jsonl", reports)
    write_manifest(out, args.command, cfg, {"input": args.input, "epoch": args.epoch})
    attempted = sum(len(r.selected) for r in reports)
    replaced = sum(len(r.replaced) for r in reports)
    _emit({"sentences": len(new), "selected": attempted, "replaced": replaced})
    return 0


def _train_one(corpus, lexicons, cfg, out: Path, alpha: float, use_cs: bool) -> dict:
    source = cfg["corpus"]["source"] or corpus.languages[0]
    if source not in corpus.languages:
        raise UsageError(f"source language {source!r} not in corpus {corpus.languages}")
    targets = [l for l in corpus.languages if l != source]
    words = sorted({t.form for l in corpus.languages for split in corpus.splits[l].values()
                    for e in split for s in e.sentences for t in s.tokens})
    gat_kw = {k: v for k, v in cfg["gat"].items()}
    gat_kw["mask_delta"] = _delta(gat_kw["mask_delta"])
    enc_kw = dict(cfg["encoder"])
    if enc_kw["bias_layers"] is not None:
        enc_kw["bias_layers"] = tuple(enc_kw["bias_layers"])
    model = build_model(corpus.task, corpus.label_names, words, gat_config=gat_kw, enc_config=enc_kw,
                        seed=cfg["seed"])
    augment = None
    cs = cfg["codeswitch"]
    if use_cs and alpha > 0:
        candidates = tuple(cs["candidates"]) or tuple(targets)
        missing = [t for t in candidates if (source, t) not in lexicons]
        if missing:
            raise UsageError(f"no lexicon from {source} into {', '.join(missing)}")
        policy = CodeSwitchPolicy(alpha=alpha, mode=cs["mode"], candidate_langs=candidates,
                                  protect_entities=cs["protect_entities"], seed=cfg["seed"],
                                  excluded_upos=frozenset(cs["excluded_upos"]))
        augment = ExampleAugmenter({t: lexicons[(source, t)] for t in candidates}, policy,
                                   families=corpus.families, target_lang=candidates[0])
    tc = TrainingConfig(seed=cfg["seed"], task=corpus.task, **cfg["training"])
    out.mkdir(parents=True, exist_ok=True)
    result = train(model, corpus.examples(source, "train"), tc, augment=augment, log_path=out / "log.jsonl")
    save_model(model, out / "model.json")
    scores = {}
    if all("test" in corpus.splits[l] for l in corpus.languages):
        scores = {l: evaluate(model, corpus.examples(l, "test")) for l in corpus.languages}
        with open(out / "metrics.jsonl", "w", encoding="utf-8") as f:
            for l, v in scores.items():
                f.write(json.dumps({"lang": l, "split": "test", "score": v, "alpha": alpha}) + "\n")
    run_cfg = copy.deepcopy(cfg)
    run_cfg["codeswitch"]["alpha"] = alpha if use_cs else 0.0
    write_manifest(out, "train", run_cfg, {"model": model_manifest(model), "source": source,
                                           "steps": result.steps, "refused_steps": result.refused_steps,
                                           "update_norms": result.update_norms})
    log.info("alpha=%g steps=%d final loss %.4f scores %s", alpha, result.steps,
             result.losses[-1] if result.losses else float("nan"), scores)
    return {"alpha": alpha if use_cs else 0.0, "scores": scores}


def cmd_train(args, cfg) -> int:
    corpus = read_corpus(args.corpus)
    lexicons = _lexicons_from_dir(Path(args.corpus), corpus.languages)
    out = Path(args.out)
    use_cs = not args.no_codeswitch
    if args.alpha_grid:
        rows = []
        for alpha in args.alpha_grid:
            res = _train_one(corpus, lexicons, cfg, out / f"alpha-{alpha:g}", alpha, use_cs)
            rows.append(res)
            _emit(res)
        with open(out / "sweep.csv", "w", encoding="utf-8") as f:
            f.write("alpha," + ",".join(corpus.languages) + "\n")
            for r in rows:
                f.write(f"{r['alpha']:g}," + ",".join(f"{r['scores'].get(l, float('nan')):.6f}"
                                                      for l in corpus.languages) + "\n")
        write_manifest(out, "train", cfg, {"alpha_grid": args.alpha_grid})
    else:
        _emit(_train_one(corpus, lexicons, cfg, out, cfg["codeswitch"]["alpha"], use_cs))
    return 0


def _load_eval_inputs(args):
    model = load_model(args.model)
    corpus = read_corpus(args.corpus)
    if corpus.task != model.task:
        raise UsageError(f"model task {model.task} does not match corpus task {corpus.task}")
    return model, corpus


def cmd_eval(args, cfg) -> int:
    model, corpus = _load_eval_inputs(args)
    out = Path(args.out)
    rows = []
    for lang in corpus.languages:
        exs = corpus.splits[lang].get(args.split)
        if exs is None:
            raise UsageError(f"no split {args.split!r} for {lang}")
        rows.append({"lang": lang, "split": args.split, "metric": args.metric or "default",
                     "score": evaluate(model, exs, args.metric)})
    write_manifest(out, args.command, cfg, {"model": args.model, "corpus": args.corpus})
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")
            _emit(r)
    return 0


def cmd_gradcheck(args, cfg) -> int:
    task = TASKS[args.task]
    model, example = gradcheck_fixture(task, seed=cfg["seed"], embed_scale=None if args.at_init else 0.5)
    errs = grad_check(model, example, h=args.h, samples=args.samples, seed=cfg["seed"])
    worst = max(errs.values())
    write_manifest(Path(args.out), args.command, cfg, {"task": task, "h": args.h, "errors": errs})
    _emit({"groups": errs, "max_rel_error": worst, "threshold": args.threshold})
    if worst > args.threshold:
        log.error("max relative error %.3g exceeds %.3g", worst, args.threshold)
        return 1
    return 0


def cmd_similarity(args, cfg) -> int:
    model, corpus = _load_eval_inputs(args)
    source = args.source or cfg["corpus"]["source"] or corpus.languages[0]
    tests = {l: corpus.splits[l][args.split] for l in corpus.languages}
    sims = centroid_similarities(model, tests, source)
    out = Path(args.out)
    write_manifest(out, args.command, cfg, {"model": args.model, "source": source, "similarity": sims})
    _emit({"source": source, "similarity": sims, "mean": float(np.mean(list(sims.values())))})
    return 0


def cmd_transfer_matrix(args, cfg) -> int:
    model, corpus = _load_eval_inputs(args)
    tests = {l: corpus.splits[l][args.split] for l in corpus.languages}
    tm = transfer_matrix(model, tests, args.langs, args.metric)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transfer.csv").write_text(tm.to_csv(), encoding="utf-8")
    write_manifest(out, args.command, cfg, {"model": args.model, "metric": tm.metric})
    sys.stdout.write(tm.to_csv())
    return 0


def cmd_validate(args, cfg) -> int:
    sents = read_conllu(args.input)
    bad = []
    for s in sents:
        try:
            validate_tree(s)
        except TreeError as e:
            bad.append({"sentence_id": s.id, "error": str(e)})
    write_manifest(Path(args.out), args.command, cfg, {"input": args.input, "invalid": bad})
    _emit({"sentences": len(sents), "invalid": len(bad)})
    for b in bad:
        log.error("%s: %s", b["sentence_id"], b["error"])
    return 1 if bad else 0


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "augment": cmd_augment,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "similarity": cmd_similarity,
    "transfer-matrix": cmd_transfer_matrix,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"lexsyn: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"lexsyn: error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, ConlluError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
