"""Command-line entry point: crawl, train, verify, eval, baseline.

Output is machine-readable JSON on stdout (``--pretty`` for humans);
diagnostics go to stderr. Exit codes are part of the contract:

    0  success
    1  semantic failures found (verify/eval)
    2  usage error
    3  runtime error
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional

from . import dom, harvest, oracle
from .corpus import read_corpus, split_corpus
from .domcontext import build_hyperlink_context, discover_anchors, filter_navigational
from .embedding import EmbeddingCache, HashProvider, RemoteProvider
from .evaluation import (
    AblationConfig,
    LlmEndpoint,
    evaluate,
    llm_baseline_evaluate,
)
from .oracle import Decision, batch_verify, score_pair
from .pagecontent import build_page_content
from .siamese import TrainConfig, load_model, save_model, train

EXIT_OK = 0
EXIT_SEMANTIC_FAILURES = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def _emit(payload: dict[str, Any], pretty: bool) -> None:
    print(json.dumps(payload, indent=2 if pretty else None, ensure_ascii=False))


def _provider(args):
    if args.embed_backend == "remote":
        endpoint = args.embed_endpoint or os.environ.get("SEMLINK_EMBED_ENDPOINT")
        if not endpoint:
            raise UsageError(
                "remote backend requires --embed-endpoint or SEMLINK_EMBED_ENDPOINT"
            )
        return RemoteProvider(endpoint, normalize=args.normalize_remote)
    return HashProvider()


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--embed-backend", choices=("hash", "remote"), default="hash",
        help="embedding backend (default: hash, fully offline)",
    )
    parser.add_argument(
        "--embed-endpoint", default=None,
        help="embedding service URL (or env SEMLINK_EMBED_ENDPOINT)",
    )
    parser.add_argument(
        "--normalize-remote", action="store_true",
        help="L2-normalize vectors from the remote backend before use",
    )
    parser.add_argument("--seed", type=int, default=13, help="random seed")
    parser.add_argument(
        "--threshold", type=float, default=oracle.DEFAULT_THRESHOLD,
        help="validity threshold tau (default 0.7)",
    )
    parser.add_argument("--pretty", action="store_true", help="indent JSON output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semlink",
        description="Semantic hyperlink verification: crawl, train, verify, eval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    crawl = sub.add_parser("crawl", help="harvest positive pairs from seed pages")
    crawl.add_argument("--seeds", required=True, help="seed list file (url[,category])")
    crawl.add_argument("--out", required=True, help="corpus output path")
    crawl.add_argument("--max-links", type=int, default=200)
    crawl.add_argument("--parallelism", type=int, default=4)
    crawl.add_argument("--timeout", type=float, default=15.0)
    crawl.add_argument("--rate-limit", type=float, default=1.0,
                       help="minimum seconds between requests to one host")
    crawl.add_argument("--no-robots", action="store_true")
    crawl.add_argument("--rendered-html-dir", default=None,
                       help="directory of pre-rendered HTML dumps")
    _common_flags(crawl)

    train_p = sub.add_parser("train", help="train the comparator on a corpus")
    train_p.add_argument("--corpus", required=True)
    train_p.add_argument("--out", required=True, help="checkpoint output path")
    train_p.add_argument("--history", default=None, help="epoch history CSV path")
    train_p.add_argument("--epochs", type=int, default=200)
    train_p.add_argument("--lr", type=float, default=1e-3)
    train_p.add_argument("--decay", type=float, default=0.8)
    train_p.add_argument("--decay-every", type=int, default=50)
    train_p.add_argument("--lambda-triplet", type=float, default=0.0)
    train_p.add_argument("--lambda-bce", type=float, default=1.0)
    train_p.add_argument("--margin", type=float, default=1.0)
    train_p.add_argument("--batch-size", type=int, default=64)
    train_p.add_argument("--dropout", type=float, default=0.2)
    train_p.add_argument("--ratio", type=float, default=0.85,
                         help="train fraction of the corpus split")
    _common_flags(train_p)

    verify = sub.add_parser("verify", help="score links against their targets")
    group = verify.add_mutually_exclusive_group(required=True)
    group.add_argument("--url", help="live page whose links to verify")
    group.add_argument("--corpus", help="corpus file to verify")
    verify.add_argument("--model", required=True, help="checkpoint path")
    verify.add_argument("--report", default=None, help="verdict JSONL output path")
    verify.add_argument("--max-links", type=int, default=200)
    verify.add_argument("--timeout", type=float, default=15.0)
    verify.add_argument("--rate-limit", type=float, default=1.0)
    verify.add_argument("--no-robots", action="store_true")
    _common_flags(verify)

    eval_p = sub.add_parser("eval", help="evaluate on a labeled corpus")
    eval_p.add_argument("--corpus", required=True)
    eval_p.add_argument("--model", required=True)
    eval_p.add_argument("--report", default=None, help="per-pair JSONL output path")
    eval_p.add_argument("--anchor-only", action="store_true")
    eval_p.add_argument("--no-side-text", action="store_true")
    eval_p.add_argument("--no-image-text", action="store_true")
    _common_flags(eval_p)

    baseline = sub.add_parser(
        "baseline", help="rate a labeled corpus through a chat-completion endpoint"
    )
    baseline.add_argument("--corpus", required=True)
    baseline.add_argument("--llm-endpoint", default=None,
                          help="chat endpoint (or env SEMLINK_LLM_ENDPOINT)")
    baseline.add_argument("--llm-model", default=None,
                          help="model name (or env SEMLINK_LLM_MODEL)")
    baseline.add_argument("--rating-threshold", type=int, default=4,
                          help="ratings >= this count as relevant")
    baseline.add_argument("--concurrency", type=int, default=1,
                          help="parallel requests to the chat endpoint")
    baseline.add_argument("--report", default=None)
    _common_flags(baseline)

    return parser


def cmd_crawl(args) -> int:
    seeds = harvest.load_seed_list(_require_file(args.seeds, "seeds file"))
    policy = harvest.FetchPolicy(
        timeout=args.timeout,
        max_links_per_seed=args.max_links,
        parallelism=args.parallelism,
        respect_robots=not args.no_robots,
        per_host_interval=args.rate_limit,
    )
    stats = harvest.harvest_all(
        seeds, policy, args.out, rendered_html_dir=args.rendered_html_dir
    )
    payload = {"out": args.out, "stats": stats.to_json()}
    if stats.pairs_emitted == 0:
        payload["warning"] = "crawl completed but no pairs were emitted"
    _emit(payload, args.pretty)
    return EXIT_OK


def cmd_train(args) -> int:
    corpus_path = _require_file(args.corpus, "corpus file")
    pairs = read_corpus(corpus_path)
    if not pairs:
        raise RuntimeError("corpus is empty; nothing to train on")
    split = split_corpus(pairs, ratio=args.ratio, seed=args.seed)
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        lr_decay_factor=args.decay,
        lr_decay_every=args.decay_every,
        lambda_triplet=args.lambda_triplet,
        lambda_bce=args.lambda_bce,
        triplet_margin=args.margin,
        batch_size=args.batch_size,
        seed=args.seed,
        dropout_rate=args.dropout,
    )
    model, history = train(split, _provider(args), config, tau=args.threshold)
    save_model(model, args.out)
    history_path = args.history or (args.out + ".history.csv")
    with open(history_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss", "val_f1", "lr"])
        for row in history:
            writer.writerow([
                row.epoch, repr(row.mean_loss),
                "" if row.val_f1 is None else repr(row.val_f1), repr(row.lr),
            ])
    last = history[-1]
    _emit(
        {
            "checkpoint": args.out,
            "history": history_path,
            "train_pairs": len(split.train),
            "validation_pairs": len(split.validation),
            "epochs": last.epoch,
            "final_mean_loss": last.mean_loss,
            "final_val_f1": last.val_f1,
            "split_warning": split.warning,
        },
        args.pretty,
    )
    return EXIT_OK


def _verify_url(args, model, provider) -> tuple[list[dict[str, Any]], int, int]:
    """Verify every navigational link on a live page. Pairs that cannot
    be scored (no extractable text on either side, or a non-200 target)
    are flagged Irrelevant with a note: the target demonstrably fails to
    fulfil the link's promise."""
    policy = harvest.FetchPolicy(
        timeout=args.timeout,
        max_links_per_seed=args.max_links,
        respect_robots=not args.no_robots,
        per_host_interval=args.rate_limit,
    )
    fetcher = harvest.Fetcher(policy)
    page_result = fetcher.fetch(args.url)
    root = dom.parse_html(page_result.body)
    anchors = [
        a for a in discover_anchors(root, base_url=page_result.final_url)
        if filter_navigational(a) is None
    ][: args.max_links]
    cache = EmbeddingCache()
    lines: list[dict[str, Any]] = []
    valid = irrelevant = 0
    for index, anchor in enumerate(anchors):
        target_url = anchor.resolved_url
        line: dict[str, Any] = {"index": index, "target_url": target_url}
        link = build_hyperlink_context(root, anchor, source_url=page_result.final_url)
        try:
            target = fetcher.fetch(target_url)
        except harvest.FetchError as exc:
            line.update(decision=Decision.IRRELEVANT.value, score=0.0,
                        note=f"fetch failed: {exc}")
            irrelevant += 1
            lines.append(line)
            continue
        if target.status != 200:
            line.update(decision=Decision.IRRELEVANT.value, score=0.0,
                        note=f"http status {target.status}")
            irrelevant += 1
            lines.append(line)
            continue
        page = build_page_content(target.body, url=target_url, status=target.status)
        try:
            verdict = score_pair(
                model, provider, link, page, tau=args.threshold, cache=cache
            )
        except (oracle.NoSourceFeatures, oracle.NoTargetFeatures) as exc:
            line.update(decision=Decision.IRRELEVANT.value, score=0.0,
                        note=type(exc).__name__)
            irrelevant += 1
            lines.append(line)
            continue
        line.update(verdict.to_json())
        if verdict.decision is Decision.VALID:
            valid += 1
        else:
            irrelevant += 1
        lines.append(line)
    return lines, valid, irrelevant


def cmd_verify(args) -> int:
    model = load_model(_require_file(args.model, "model checkpoint"))
    provider = _provider(args)
    if args.url:
        lines, valid, irrelevant = _verify_url(args, model, provider)
        summary: dict[str, Any] = {
            "url": args.url,
            "links_scored": len(lines),
            "valid": valid,
            "irrelevant": irrelevant,
        }
    else:
        pairs = read_corpus(_require_file(args.corpus, "corpus file"))
        outcomes, report = batch_verify(
            model, provider, pairs, tau=args.threshold
        )
        lines = []
        valid = irrelevant = 0
        for outcome in outcomes:
            if outcome.verdict is None:
                lines.append({"index": outcome.index, "error": outcome.error})
                continue
            line = {"index": outcome.index,
                    "target_url": pairs[outcome.index].page.target_url}
            line.update(outcome.verdict.to_json())
            lines.append(line)
            if outcome.verdict.decision is Decision.VALID:
                valid += 1
            else:
                irrelevant += 1
        summary = {
            "corpus": args.corpus,
            "pairs": len(pairs),
            "valid": valid,
            "irrelevant": irrelevant,
            "errors": report.pairs_failed,
            "throughput": report.to_json(),
        }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(json.dumps(line, ensure_ascii=False) + "\n")
        summary["report"] = args.report
    _emit(summary, args.pretty)
    return EXIT_SEMANTIC_FAILURES if irrelevant else EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(_require_file(args.model, "model checkpoint"))
    pairs = read_corpus(_require_file(args.corpus, "corpus file"))
    ablation = AblationConfig(
        use_anchor=True,
        use_side_text=not (args.no_side_text or args.anchor_only),
        use_image_text=not (args.no_image_text or args.anchor_only),
    )
    counts, metrics, report = evaluate(
        model, _provider(args), pairs, tau=args.threshold, ablation=ablation
    )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            for line in report:
                fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    _emit(
        {
            "counts": counts.to_json(),
            "metrics": metrics.to_json(),
            "config": {
                "threshold": args.threshold,
                "ablation": {
                    "use_anchor": ablation.use_anchor,
                    "use_side_text": ablation.use_side_text,
                    "use_image_text": ablation.use_image_text,
                },
                "embed_backend": args.embed_backend,
            },
        },
        args.pretty,
    )
    misclassified = counts.fp + counts.fn
    return EXIT_SEMANTIC_FAILURES if misclassified else EXIT_OK


def cmd_baseline(args) -> int:
    pairs = read_corpus(_require_file(args.corpus, "corpus file"))
    endpoint = args.llm_endpoint or os.environ.get("SEMLINK_LLM_ENDPOINT")
    model_name = args.llm_model or os.environ.get("SEMLINK_LLM_MODEL")
    if not endpoint or not model_name:
        raise UsageError(
            "baseline requires --llm-endpoint/--llm-model or the "
            "SEMLINK_LLM_ENDPOINT/SEMLINK_LLM_MODEL environment variables"
        )
    config = LlmEndpoint(
        endpoint=endpoint, model=model_name, api_key=os.environ.get("SEMLINK_LLM_KEY")
    )
    counts, metrics, latency, report = llm_baseline_evaluate(
        config, pairs, rating_threshold=args.rating_threshold,
        concurrency=args.concurrency,
    )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            for line in report:
                fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    _emit(
        {
            "counts": counts.to_json(),
            "metrics": metrics.to_json(),
            "latency": latency.to_json(),
            "rating_threshold": args.rating_threshold,
        },
        args.pretty,
    )
    return EXIT_OK


_COMMANDS = {
    "crawl": cmd_crawl,
    "train": cmd_train,
    "verify": cmd_verify,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"semlink: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_RUNTIME


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
