"""Command-line entry point: ``typelink <subcommand> ...``.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import annotations as ann
from .corpus_builder import (
    distant_supervise,
    load_crosswalk,
    map_links,
    quality_report,
    read_headed_documents,
    read_linked_documents,
)
from .errors import ConfigError, InputError
from .filter import LinkedMention, link_corpus, model_scores, parse_mode, parse_policy
from .lexicon import load_lexicon
from .matcher import (
    DEFAULT_MAX_CANDIDATES,
    DEFAULT_MAX_NGRAM,
    DEFAULT_MIN_SCORE,
    CandidateSet,
    annotate_corpus,
    import_external_candidates,
)
from .metrics import evaluate, paired_bootstrap, per_doc_counts
from .type_system import load_type_map
from .typer import (
    DEFAULT_HASH_DIM,
    DEFAULT_WINDOW_K,
    Thresholds,
    TrainConfig,
    TyperModel,
    build_examples,
    import_scores,
    train,
    tune_thresholds,
)

log = logging.getLogger("typelink")

DATA_ENV = "LINKER_DATA_DIR"


class UsageError(Exception):
    pass


def resolve(path: str | None) -> Path | None:
    """Find ``path`` as given, under $LINKER_DATA_DIR, or among the bundled data files."""
    if path is None:
        return None
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(DATA_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    bundled = resources.files("typelink.data").joinpath(str(p))
    if bundled.is_file():
        return Path(str(bundled))
    return p


def read_config(path: str) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment. Keys use flag spelling without dashes."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


# ---------------------------------------------------------------- helpers


def _type_map(args):
    return load_type_map(resolve(args.typemap))


def _lexicon(args, type_map=None):
    return load_lexicon(resolve(args.lexicon), type_map)


def _docs(path):
    return ann.read_documents(resolve(path))


def _write(out: str | None, records) -> None:
    if out is None or out == "-":
        for r in records:
            sys.stdout.write(ann.dumps(r) + "\n")
    else:
        ann.write_jsonl(out, records)


def _read_sets(path) -> list[CandidateSet]:
    return [CandidateSet.from_json(obj) for _, obj in ann.iter_jsonl(resolve(path))]


def _read_linked(path) -> list[LinkedMention]:
    return [LinkedMention.from_json(obj) for _, obj in ann.iter_jsonl(resolve(path))]


def _spans(path) -> list[tuple[str, int, int]]:
    return [(o["doc_id"], int(o["start"]), int(o["end"])) for _, o in ann.iter_jsonl(resolve(path))]


def _grid(text: str | None):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --grid {text!r}") from None


def _train_config(args) -> TrainConfig:
    return TrainConfig(hash_dim=args.hash_dim, window_k=args.k, epochs=args.epochs,
                       learning_rate=args.lr, l2=args.l2, seed=args.seed, batch_size=args.batch_size)


def _examples(args, type_map, lexicon, window_k):
    docs = _docs(args.docs)
    gold = ann.read_gold(resolve(args.corpus), {d.id: d for d in docs})
    return build_examples(docs, gold, lexicon, type_map, window_k)


# ---------------------------------------------------------------- commands


def cmd_annotate(args) -> None:
    lexicon = _lexicon(args)
    docs = _docs(args.docs)
    if args.external:
        sets = import_external_candidates(resolve(args.external), docs)
    else:
        sets = annotate_corpus(lexicon, docs, threads=args.threads, max_ngram=args.max_ngram,
                               max_candidates=args.max_candidates, min_score=args.min_score)
    _write(args.out, (cs.to_json() for cs in sets))


def cmd_train(args) -> None:
    type_map = _type_map(args)
    lexicon = _lexicon(args, type_map)
    cfg = _train_config(args)
    init = TyperModel.load(resolve(args.model_in)) if args.model_in else None
    if init is not None and (init.hash_dim != cfg.hash_dim or init.window_k != cfg.window_k):
        raise UsageError("--model-in hash_dim/window size differ from --hash-dim/--k")
    examples = _examples(args, type_map, lexicon, cfg.window_k)
    model, history = train(examples, cfg, type_map.groups, init=init)
    log.info("trained on %d examples; final loss %.6f", len(examples), history[-1])
    model.save(args.model_out)


def cmd_tune(args) -> None:
    type_map = _type_map(args)
    lexicon = _lexicon(args, type_map)
    model = TyperModel.load(resolve(args.model_in))
    examples = _examples(args, type_map, lexicon, model.window_k)
    thresholds = tune_thresholds(model, examples, _grid(args.grid))
    thresholds.save(args.out)


def cmd_predict_types(args) -> None:
    model = TyperModel.load(resolve(args.model_in))
    docs = _docs(args.docs)
    spans = _spans(args.mentions)
    sets = [CandidateSet.from_json({"doc_id": d, "start": s, "end": e, "candidates": []}) for d, s, e in spans]
    scores = model_scores(sets, model, docs)
    _write(args.out, ({"doc_id": k[0], "start": k[1], "end": k[2], "scores": v} for k, v in sorted(scores.items())))


def cmd_link(args) -> None:
    mode = parse_mode(args.mode)
    policy = parse_policy(args.empty_policy)
    type_map = _type_map(args)
    lexicon = _lexicon(args, type_map)
    sets = _read_sets(args.candidates)
    kw = {}
    if mode == "predicted":
        if args.scores:
            kw["scores"] = dict(import_scores(resolve(args.scores), type_map.groups))
        elif args.model and args.docs:
            kw["model"] = TyperModel.load(resolve(args.model))
            kw["docs"] = _docs(args.docs)
        else:
            raise UsageError("--mode predicted needs --scores, or --model with --docs")
        if args.thresholds:
            kw["thresholds"] = Thresholds.load(resolve(args.thresholds))
    elif mode.startswith("oracle"):
        if not args.gold:
            raise UsageError(f"--mode {args.mode} needs --gold")
        kw["gold"] = ann.read_gold(resolve(args.gold))
    result = link_corpus(sets, mode, lexicon, type_map, policy, **kw)
    _write(args.out, (lm.to_json() for lm in result.mentions))


def cmd_evaluate(args) -> None:
    type_map = _type_map(args)
    lexicon = _lexicon(args, type_map)
    preds = _read_linked(args.pred)
    gold = ann.read_gold(resolve(args.gold))
    sets = _read_sets(args.candidates) if args.candidates else [lm.surviving for lm in preds]
    report = evaluate(preds, gold, lexicon, type_map, sets)
    if args.compare:
        other = _read_linked(args.compare)
        if args.docs:
            doc_ids = [d.id for d in _docs(args.docs)]
        else:
            doc_ids = sorted({g.doc_id for g in gold} | {p.key[0] for p in preds} | {p.key[0] for p in other})
        a = per_doc_counts(preds, gold, doc_ids)
        b = per_doc_counts(other, gold, doc_ids)
        boot = paired_bootstrap(a, b, args.bootstrap, args.seed)
        report.bootstrap_p = boot.p_value
        report.bootstrap_winner = {"A": "pred", "B": "compare", None: None}[boot.winner]
        report.compare_exact_f1 = boot.observed_b
    print(report.to_text())
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report.to_json(), fh, indent=2)
            fh.write("\n")


def cmd_build_corpus(args) -> None:
    lexicon = _lexicon(args)
    if args.mode == "distant":
        docs = read_headed_documents(resolve(args.docs))
        silver = distant_supervise(docs, lexicon, exact=args.exact, max_ngram=args.max_ngram,
                                   max_candidates=args.max_candidates, min_score=args.min_score)
    else:
        if not args.crosswalk:
            raise UsageError("--mode crosswalk needs --crosswalk")
        docs = read_linked_documents(resolve(args.docs))
        silver = map_links(docs, load_crosswalk(resolve(args.crosswalk)), lexicon)
    _write(args.out, (a.to_json() for a in silver.annotations))
    if args.audit_gold:
        gold = ann.read_gold(resolve(args.audit_gold))
        precision, recall = quality_report(silver, gold, [d.id for d in docs])
        audit = {"precision": precision, "recall": recall, "silver": len(silver.annotations),
                 "dropped": silver.dropped}
        print(f"audit precision={precision:.4f} recall={recall:.4f}")
        if args.audit_out:
            with open(args.audit_out, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(audit, fh, indent=2)
                fh.write("\n")


# ---------------------------------------------------------------- parser


def _matcher_flags(p):
    p.add_argument("--max-ngram", type=int, default=DEFAULT_MAX_NGRAM)
    p.add_argument("--max-candidates", type=int, default=DEFAULT_MAX_CANDIDATES)
    p.add_argument("--min-score", type=float, default=DEFAULT_MIN_SCORE)


def _resource_flags(p, lexicon=True):
    if lexicon:
        p.add_argument("--lexicon", default="toy_lexicon.tsv", help="lexicon TSV (default: bundled toy lexicon)")
    p.add_argument("--typemap", default="type_groups.tsv", help="type-group TSV (default: bundled map)")


def _train_flags(p):
    p.add_argument("--k", type=int, default=DEFAULT_WINDOW_K, help="context window per side, in tokens")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-6)
    p.add_argument("--hash-dim", type=int, default=DEFAULT_HASH_DIM)
    p.add_argument("--batch-size", type=int, default=32)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="typelink", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--config", help="key=value defaults, overridden by flags")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["annotate"] = sub.add_parser("annotate", help="detect mentions and generate candidates")
    p.add_argument("--docs", required=True)
    p.add_argument("--out")
    p.add_argument("--external", help="import candidates from an external linker's JSONL instead")
    _resource_flags(p)
    _matcher_flags(p)
    p.set_defaults(func=cmd_annotate)

    p = subs["train"] = sub.add_parser("train", help="train the semantic-group typer")
    p.add_argument("--corpus", required=True, help="annotation JSONL {doc_id,start,end,cui}")
    p.add_argument("--docs", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--model-in", help="initialize from this model (fine-tuning)")
    _resource_flags(p)
    _train_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs["tune"] = sub.add_parser("tune", help="tune per-group thresholds on a validation corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--model-in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="comma-separated thresholds in (0.001, 1)")
    _resource_flags(p)
    p.set_defaults(func=cmd_tune)

    p = subs["predict-types"] = sub.add_parser("predict-types", help="score mentions with a typer model")
    p.add_argument("--mentions", required=True, help="any JSONL with doc_id/start/end")
    p.add_argument("--docs", required=True)
    p.add_argument("--model-in", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict_types)

    p = subs["link"] = sub.add_parser("link", help="filter candidates by type and pick the top survivor")
    p.add_argument("--candidates", required=True)
    p.add_argument("--mode", default="none", choices=["none", "predicted", "oracle-fine", "oracle-coarse"])
    p.add_argument("--empty-policy", default="drop", choices=["drop", "passthrough"])
    p.add_argument("--model")
    p.add_argument("--docs")
    p.add_argument("--thresholds")
    p.add_argument("--scores")
    p.add_argument("--gold")
    p.add_argument("--out")
    _resource_flags(p)
    p.set_defaults(func=cmd_link)

    p = subs["evaluate"] = sub.add_parser("evaluate", help="score linked output against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--candidates", help="pre-filter candidates for the error breakdown")
    p.add_argument("--compare", help="second linked output for a paired bootstrap test")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--docs", help="document list fixing the bootstrap sample units")
    p.add_argument("--json-out")
    _resource_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = subs["build-corpus"] = sub.add_parser("build-corpus", help="build a silver corpus")
    p.add_argument("--mode", required=True, choices=["distant", "crosswalk"])
    p.add_argument("--docs", required=True)
    p.add_argument("--crosswalk")
    p.add_argument("--exact", default="normalized", choices=["normalized", "raw"])
    p.add_argument("--out")
    p.add_argument("--audit-gold")
    p.add_argument("--audit-out")
    _resource_flags(p)
    _matcher_flags(p)
    p.set_defaults(func=cmd_build_corpus)
    return parser, subs


def _apply_config(parser, subs, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    for p in [parser, *subs.values()]:
        dests = {a.dest: a for a in p._actions}
        values = {}
        for k, v in cfg.items():
            action = dests.get(k)
            if action is not None:
                values[k] = action.type(v) if action.type else v
        p.set_defaults(**values)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config(parser, subs, argv)
    except (OSError, UsageError, ValueError) as exc:
        print(f"typelink: error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("typelink: error: --threads must be >= 1", file=sys.stderr)
        return 2
    np.seterr(over="ignore")
    try:
        args.func(args)
    except (UsageError, ConfigError, InputError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"typelink: error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
