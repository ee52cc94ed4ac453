"""Command-line entry point: ``dualgraph <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .amr import UsageError, corpus_stats, dfs_order, levi_transform, read_amr_corpus
from .checkpoint import CheckpointError
from .evaluation import DEFAULT_BUCKETS, bleu, bucket_eval, bucket_table_tsv, corpus_adequacy
from .model import Graph2Seq
from .train import TrainConfig, TrainingDiverged, ablation_table_tsv, run_ablation, train
from .vocab import build_vocab

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def cmd_stats(args):
    sys.stdout.write(corpus_stats(read_amr_corpus(args.corpus)).to_tsv())


def cmd_preprocess(args):
    corpus = read_amr_corpus(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    src, tgt = build_vocab(corpus, args.max_vocab)
    (out / "src_vocab.txt").write_text("\n".join(src.to_lines()) + "\n", encoding="utf-8")
    (out / "tgt_vocab.txt").write_text("\n".join(tgt.to_lines()) + "\n", encoding="utf-8")
    with open(out / "views.jsonl", "w", encoding="utf-8") as fh:
        for ex in corpus:
            v = levi_transform(ex.graph)
            record = {"id": ex.id, "labels": list(v.node_labels),
                      "edges": [list(e) for e in v.edge_list()],
                      "root": v.root, "dfs": dfs_order(v), "tokens": ex.tokens}
            fh.write(json.dumps(record) + "\n")
    print(f"wrote {len(corpus)} views and vocabularies ({len(src)} source, {len(tgt)} target) to {out}")


def _load_config(path):
    try:
        cfg = TrainConfig.from_file(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not cfg.train_path or not cfg.dev_path:
        raise UsageError("config must set train_path and dev_path")
    return cfg


def cmd_train(args):
    cfg = _load_config(args.config)
    out = args.out or cfg.output_dir or "run"
    result = train(cfg, read_amr_corpus(cfg.train_path), read_amr_corpus(cfg.dev_path), out)
    print(f"best dev BLEU {result.best_bleu:.2f} at epoch {result.best_epoch}; checkpoint {result.checkpoint}")


def cmd_generate(args):
    model = Graph2Seq.load(args.ckpt)
    corpus = read_amr_corpus(args.input)
    outputs = model.generate(corpus, beam_size=args.beam, max_len=args.max_len)
    text = "".join(" ".join(toks) + "\n" for toks in outputs)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_eval(args):
    refs = _read_lines(args.refs)
    hyps = _read_lines(args.hyps)
    if len(refs) != len(hyps):
        raise UsageError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    lowercase = not args.cased
    print(f"BLEU\t{bleu(refs, hyps, lowercase):.2f}")
    if args.buckets or args.adequacy:
        if not args.corpus:
            raise UsageError("--buckets and --adequacy need --corpus with the input graphs")
        corpus = read_amr_corpus(args.corpus)
        if len(corpus) != len(hyps):
            raise UsageError(f"corpus has {len(corpus)} graphs but {len(hyps)} hypotheses")
        dataset = [type(ex)(ex.graph, r.split(), ex.id, ex.penman) for ex, r in zip(corpus, refs)]
        if args.buckets:
            baseline = _read_lines(args.baseline) if args.baseline else None
            if baseline is not None and len(baseline) != len(hyps):
                raise UsageError("baseline must align with hypotheses")
            rows = bucket_eval(dataset, [h.split() for h in hyps], DEFAULT_BUCKETS[args.buckets],
                               baseline=[b.split() for b in baseline] if baseline else None,
                               lowercase=lowercase)
            print(f"# {args.buckets} buckets (BLEU per bucket)")
            sys.stdout.write(bucket_table_tsv(rows))
        if args.adequacy:
            rep = corpus_adequacy([ex.graph for ex in corpus], hyps)
            print("# adequacy (suffix-strip stems stand in for lemmas)")
            print(f"added_pct\t{100 * rep.added_pct:.2f}")
            print(f"missing_pct\t{100 * rep.missing_pct:.2f}")


def cmd_ablate(args):
    cfg = _load_config(args.config)
    rows = run_ablation(cfg, read_amr_corpus(cfg.train_path), read_amr_corpus(cfg.dev_path),
                        out_dir=args.out, epochs=args.epochs)
    sys.stdout.write(ablation_table_tsv(rows))


def cmd_gradcheck(args):
    from .checks import run_gradcheck_suite

    ok = True
    for name, err in run_gradcheck_suite(seeds=args.seeds):
        status = "ok" if err < args.tol else "FAIL"
        ok &= err < args.tol
        print(f"{name}\t{err:.3e}\t{status}")
    return EXIT_OK if ok else EXIT_DATA


def build_parser():
    parser = _Parser(prog="dualgraph", description="Dual graph-to-sequence AMR generation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("stats", help="graph statistics of a corpus as TSV")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("preprocess", help="write Levi views and vocabularies")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--max-vocab", type=int, default=20000)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train from a key = value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode sentences for a corpus of graphs")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="BLEU, bucketed BLEU and adequacy")
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--buckets", choices=sorted(DEFAULT_BUCKETS))
    p.add_argument("--corpus", help="AMR corpus aligned with refs (for buckets/adequacy)")
    p.add_argument("--baseline", help="baseline hypotheses for bucket deltas")
    p.add_argument("--adequacy", action="store_true")
    p.add_argument("--cased", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train the four encoder configurations")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--epochs", type=int, help="override epochs; 0 only counts parameters")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"dualgraph {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, CheckpointError, TrainingDiverged, OSError) as exc:
        print(f"dualgraph {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
