"""Command-line entry point: ``gmmlda {preprocess,train,eval,synth,inspect}``.

Flags can also come from a flat ``key = value`` file given with
``--config``; command-line flags win over the file, the file over defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import corpus as cp
from .evaluation import clustering_report, mean_report
from .model import (
    Hyperparameters,
    ModelState,
    SyntheticSizes,
    Variant,
    assignment_records,
    forward_generate,
    init_state,
    model_dump,
    read_assignments,
    read_model,
    rebuild_counts,
    write_assignments,
    write_model,
)
from .sampler import GibbsConfig, run_gibbs
from .supervised import apply_supervision, load_split, write_split

log = logging.getLogger("gmmlda")


class CLIError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("need at least one seed")
    return seeds


def parse_prediction(text: str) -> tuple[str, int]:
    if text in ("last", "last_sample"):
        return "last_sample", 100
    if text.startswith("mode:"):
        try:
            return "mode_over_tail", int(text[5:])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"prediction must be 'last' or 'mode:N', got {text!r}")


def read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CLIError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


# -- corpus helpers ---------------------------------------------------------

def _add_corpus_args(p):
    p.add_argument("--corpus", help="corpus JSONL")
    p.add_argument("--vocab", help="vocabulary sidecar; load the corpus as a preprocessed dump")
    p.add_argument("--stopwords", help="stopword file, one word per line")
    p.add_argument("--min-count", type=int, default=3)
    p.add_argument("--min-sentence-tokens", type=int, default=5)
    p.add_argument("--no-filter", action="store_true", help="index tokens without any filtering")


def _load(args) -> cp.Corpus:
    if not args.corpus:
        raise CLIError("--corpus is required")
    if not Path(args.corpus).exists():
        raise CLIError(f"corpus file not found: {args.corpus}")
    if args.vocab:
        return cp.load_preprocessed(args.corpus, args.vocab)
    raw = cp.load_corpus(args.corpus)
    if args.no_filter:
        cfg = cp.PreprocessConfig.unfiltered()
    else:
        stop = cp.load_stopwords(args.stopwords) if args.stopwords else frozenset()
        cfg = cp.PreprocessConfig(stop, args.min_count, args.min_sentence_tokens)
    return cp.preprocess(raw, cfg)


def _hyper(args) -> Hyperparameters:
    return Hyperparameters(
        K=args.k, T=args.t, theta0=args.theta0, lambda0=args.lambda0, alpha0=args.alpha0,
        beta0=args.beta0, gamma0=args.gamma0, rho0=args.rho0, nu0_scale=args.nu0_scale,
        c=args.c, variant=args.variant,
    )


# -- commands ---------------------------------------------------------------

def cmd_preprocess(args) -> int:
    corpus = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cp.save_corpus(corpus, out / "corpus.jsonl", out / "vocab.json")
    stats = cp.corpus_stats(corpus)
    print(json.dumps(stats.__dict__))
    return 0


def _train_one(corpus, hyper, gibbs_kw, seed, labeled):
    rng = np.random.default_rng(seed)
    state = init_state(corpus, hyper, rng)
    if labeled:
        apply_supervision(state, labeled, rng)
    cfg = GibbsConfig(seed=seed, **gibbs_kw)
    state, diag, pred = run_gibbs(state, cfg, rng)
    return seed, model_dump(state, {"seed": seed}), assignment_records(state, pred), diag


def cmd_train(args) -> int:
    corpus = _load(args)
    if not len(corpus):
        raise CLIError("corpus is empty after preprocessing")
    hyper = _hyper(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    labeled = []
    if args.labeled_split:
        if not corpus.has_labels:
            raise CLIError("supervised mode needs sentence labels in the corpus")
        if len(corpus.label_set) > hyper.K:
            raise CLIError(f"corpus has {len(corpus.label_set)} labels but --k is {hyper.K}")
        ids = set(load_split(args.labeled_split))
        labeled = [d for d, doc in enumerate(corpus.documents)
                   if doc.doc_id in ids and doc.labels is not None]
        if not labeled:
            raise CLIError("no labeled documents from the split survive preprocessing")
        shutil.copyfile(args.labeled_split, out / "split.json")

    cp.save_corpus(corpus, out / "corpus.jsonl", out / "vocab.json")
    mode, tail = args.prediction
    gibbs_kw = dict(iterations=args.iters, report_every=args.report_every,
                    prediction=mode, tail_n=min(tail, args.iters))

    jobs = [(corpus, hyper, gibbs_kw, seed, labeled) for seed in args.seed]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_train_one, *zip(*jobs)))
    else:
        results = [_train_one(*job) for job in jobs]

    for seed, dump, records, diag in results:
        run_dir = out / f"seed_{seed}"
        run_dir.mkdir(exist_ok=True)
        write_model(dump, run_dir / "model.json")
        write_assignments(records, run_dir / "assignments.jsonl")
        diag.write_csv(run_dir / "diagnostics.csv")
        log.info("seed %d done: final score %.3f", seed, diag.joint_log_score[-1])
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    if args.corpus:
        corpus = _load(args)
    else:
        corpus_path = out / "corpus.jsonl"
        if not corpus_path.exists():
            raise CLIError(f"no corpus given and {corpus_path} not found")
        corpus = cp.load_preprocessed(corpus_path, out / "vocab.json")
    if not corpus.has_labels:
        raise CLIError("evaluation needs sentence labels in the corpus")
    split_path = args.labeled_split or (out / "split.json" if (out / "split.json").exists() else None)
    labeled_ids = set(load_split(split_path)) if split_path else set()
    supervised = split_path is not None

    truth_by_doc = {doc.doc_id: [corpus.label_set[lab] for lab in doc.labels]
                    for doc in corpus.documents if doc.labels is not None}
    run_dirs = sorted(out.glob("seed_*"), key=lambda p: int(p.name.split("_")[1]))
    if not run_dirs:
        raise CLIError(f"no seed_* run directories under {out}")
    runs = []
    for run_dir in run_dirs:
        dump = read_model(run_dir / "model.json")
        names = dump.get("labels")
        pred, truth = [], []
        for rec in read_assignments(run_dir / "assignments.jsonl"):
            doc_id = rec["id"]
            if doc_id not in truth_by_doc or doc_id in labeled_ids:
                continue
            if len(rec["z"]) != len(truth_by_doc[doc_id]):
                raise CLIError(f"sentence count mismatch for document {doc_id!r}")
            if supervised and names:
                pred.extend(names[z - 1] if z - 1 < len(names) else f"#{z}" for z in rec["z"])
            else:
                pred.extend(rec["z"])
            truth.extend(truth_by_doc[doc_id])
        if len(truth) < 2:
            raise CLIError("fewer than two sentences to evaluate")
        report = clustering_report(pred, truth, with_accuracy=supervised)
        report["seed"] = dump.get("seed")
        runs.append(report)
    metrics = {k: v for k, v in mean_report(runs).items() if k != "seed"}
    result = dict(metrics)
    result["runs"] = runs
    result["mean"] = metrics
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2)
    print(json.dumps(metrics))
    return 0


def cmd_synth(args) -> int:
    hyper = _hyper(args)
    rng = np.random.default_rng(args.seed[0])
    sizes = SyntheticSizes(args.docs, args.vocab_size, args.sentences, args.tokens)
    corpus, truth, params = forward_generate(hyper, sizes, rng, gamma=args.gamma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cp.save_corpus(corpus, out / "corpus.jsonl", out / "vocab.json")

    state = ModelState(corpus, hyper, truth, rebuild_counts(corpus, truth, hyper.K, hyper.T),
                       np.asarray(params["rho"], dtype=float))
    write_assignments(assignment_records(state), out / "truth.jsonl")
    if args.labeled_fraction > 0:
        n = int(round(args.labeled_fraction * len(corpus)))
        picked = sorted(rng.choice(len(corpus), size=n, replace=False))
        write_split([corpus.documents[d].doc_id for d in picked], out / "split.json")
    print(json.dumps(cp.corpus_stats(corpus).__dict__))
    return 0


def top_words(dist: Sequence[float], vocab: Sequence[str], n: int) -> list[str]:
    order = np.argsort(-np.asarray(dist), kind="stable")[:n]
    return [vocab[i] for i in order]


def inspect_model(dump: dict, n: int) -> dict:
    """Top words per intent and topic plus the word-type listing."""
    if n < 1:
        raise ValueError("n must be >= 1")
    vocab = dump["vocab"]
    n = min(n, len(vocab))
    labels = dump.get("labels")
    intents = []
    order = dump["pi0"] if dump.get("supervised") else list(range(1, dump["K"] + 1))
    for rank, k in enumerate(order):
        name = labels[k - 1] if labels and dump.get("supervised") and k - 1 < len(labels) else None
        intents.append({"no": rank, "intent": k, "label": name,
                        "words": top_words(dump["intent_word_dist"][k - 1], vocab, n)})
    topics = [{"topic": t + 1, "words": top_words(row, vocab, n)}
              for t, row in enumerate(dump["topic_word_dist"])]
    nv = np.asarray(dump["word_type_counts"], dtype=np.int64)
    is_intent = nv[:, 0] > nv[:, 1]
    freq = nv.sum(axis=1)
    by_freq = np.argsort(-freq, kind="stable")
    intent_words = [vocab[i] for i in by_freq if is_intent[i] and freq[i] > 0][:n]
    topic_words = [vocab[i] for i in by_freq if not is_intent[i] and freq[i] > 0][:n]
    return {"pi0": dump["pi0"], "intents": intents, "topics": topics,
            "word_types": {"intent": intent_words, "topic": topic_words}}


def format_inspection(info: dict) -> str:
    lines = ["canonical order: " + " ".join(str(x) for x in info["pi0"]), "", "intents:"]
    for row in info["intents"]:
        tag = f"{row['no']} {row['label']}" if row["label"] else f"{row['no']} (intent {row['intent']})"
        lines.append(f"  {tag}: " + ", ".join(row["words"]))
    lines += ["", "topics:"]
    for row in info["topics"]:
        lines.append(f"  topic {row['topic']}: " + ", ".join(row["words"]))
    lines += ["", f"{'intent words':<20}{'topic words':<20}"]
    iw, tw = info["word_types"]["intent"], info["word_types"]["topic"]
    for i in range(max(len(iw), len(tw))):
        a = iw[i] if i < len(iw) else ""
        b = tw[i] if i < len(tw) else ""
        lines.append(f"{a:<20}{b:<20}")
    return "\n".join(lines)


def cmd_inspect(args) -> int:
    if not args.model or not Path(args.model).exists():
        raise CLIError(f"model dump not found: {args.model}")
    if args.n < 1:
        raise CLIError("--n must be >= 1")
    info = inspect_model(read_model(args.model), args.n)
    print(json.dumps(info, indent=2) if args.json else format_inspection(info))
    return 0


# -- parser -----------------------------------------------------------------

def _add_model_args(p):
    p.add_argument("--k", type=int, default=5, help="number of intents")
    p.add_argument("--t", type=int, default=10, help="number of topics")
    p.add_argument("--theta0", type=float, default=0.1)
    p.add_argument("--lambda0", type=float, default=0.1)
    p.add_argument("--alpha0", type=float, default=0.1)
    p.add_argument("--beta0", type=float, default=0.1)
    p.add_argument("--gamma0", type=float, default=1.0)
    p.add_argument("--rho0", type=float, default=2.0)
    p.add_argument("--nu0-scale", type=float, default=0.1, help="nu0 as a multiple of the document count")
    p.add_argument("--c", type=float, default=0.0, help="entropic regularization weight (0 disables)")
    p.add_argument("--variant", choices=[v.value for v in Variant], default="full")
    p.add_argument("--seed", type=parse_seeds, default="1,2,3,4,5")


def build_parser(defaults: Optional[dict] = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmmlda", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file of flag defaults (any position)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="filter and index a corpus")
    _add_corpus_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="run Gibbs chains, one per seed")
    _add_corpus_args(p)
    _add_model_args(p)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--report-every", type=int, default=100)
    p.add_argument("--prediction", type=parse_prediction, default="last")
    p.add_argument("--labeled-split", help="JSON file {\"labeled_ids\": [...]}")
    p.add_argument("--jobs", type=int, default=1, help="chains to run in parallel")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score trained runs against corpus labels")
    _add_corpus_args(p)
    p.add_argument("--labeled-split", help="exclude these documents and report accuracy")
    p.add_argument("--out", required=True, help="training output directory")

    p = sub.add_parser("synth", help="sample a synthetic corpus from the model")
    _add_model_args(p)
    p.add_argument("--docs", type=int, default=100)
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--sentences", type=float, default=8.0, help="mean sentences per document")
    p.add_argument("--tokens", type=float, default=10.0, help="mean tokens per sentence")
    p.add_argument("--gamma", type=float, default=None, help="fix the topic-word probability")
    p.add_argument("--labeled-fraction", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("inspect", help="print top words of a model dump")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=18)
    p.add_argument("--json", action="store_true")

    if defaults:
        for action in sub.choices.values():
            flags = {a.dest: a for a in action._actions}
            action.set_defaults(**{k: _config_value(flags[k], v)
                                   for k, v in defaults.items() if k in flags})
    return parser


def _config_value(action, value):
    if isinstance(action, argparse._StoreTrueAction):
        if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise CLIError(f"config value for {action.dest} must be a boolean, got {value!r}")
        return value.lower() in ("true", "1", "yes")
    return value


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    try:
        defaults = read_config(known.config) if known.config else None
        args = build_parser(defaults).parse_args(rest)
    except (CLIError, OSError) as exc:
        print(f"gmmlda: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    handlers = {"preprocess": cmd_preprocess, "train": cmd_train, "eval": cmd_eval,
                "synth": cmd_synth, "inspect": cmd_inspect}
    try:
        return handlers[args.command](args)
    except (CLIError, cp.CorpusFormatError, ValueError, OSError) as exc:
        print(f"gmmlda: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
