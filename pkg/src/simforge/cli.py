"""Batch command surface: scoring, stress tables, topic pipelines, attacks.

Verbs: score, stress, topics {build,assign,eval}, attack {sample,bag2seq,
trigger,probe,sanitize}, counts. Item streams are JSONL on stdout (or --out);
reports are single JSON documents. Every command is deterministic given its
flags, input files, and seed; SIMFORGE_SEED is the seed fallback.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from collections import Counter

import numpy as np

from .attacks import (
    GAConfig,
    SanitizePolicy,
    bag_to_sequence,
    backdoor_probe,
    ga_sample_rouge_space,
    ga_universal_trigger_run,
    pareto_front,
    rouge_attack,
    sanitize,
)
from .clustop import (
    BuildConfig,
    assign_topic,
    build_word_graph,
    extract_topics,
    louvain,
    modularity,
    save_graph_tsv,
    topic_coherence,
    topic_pmi,
    topic_prf,
    topics_from_json,
    topics_to_json,
)
from .embeddings import (
    EmbeddingTable,
    TfIdfWeights,
    doc_vector,
    hashed_embeddings,
    load_embeddings,
    tfidf_index,
)
from .lexical_metrics import (
    MeteorConfig,
    MetricResult,
    chrf,
    gtm,
    meteor_lite,
    per,
    rouge_l,
    rouge_n,
    rouge_s,
    ter_greedy,
    wer,
)
from .set_metrics import CountIndex, bag_coefficient, build_count_index, ngd
from .text_core import ngrams, tokenize
from .vector_metrics import (
    embed_f1,
    greedy_match_similarity,
    simile,
    vector_similarity,
    wmd,
)

METRIC_IDS = (
    "rouge1", "rouge2", "rougeL", "rougeS", "wer", "per", "ter", "meteor",
    "chrf", "gtm", "jaccard", "dice", "ochiai", "overlap", "tversky",
    "cosine", "embedf1", "greedy", "wmd", "simile", "ngd",
)
SET_METRIC_KINDS = {
    "jaccard": "jaccard_set",
    "dice": "dice",
    "ochiai": "ochiai",
    "overlap": "overlap",
    "tversky": "tversky",
}
EMBED_METRICS = ("cosine", "embedf1", "greedy", "wmd", "simile")
TOPIC_GRID = (5, 10, 15, 20)


def _fail(message: str, code: int = 2) -> int:
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    return code


def _emit(fh, obj) -> None:
    fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SIMFORGE_SEED", "").strip()
    if not env:
        return 0
    return int(env)


def _config_echo(args: argparse.Namespace) -> dict:
    simple = (str, int, float, bool, type(None))
    return {
        k: v
        for k, v in sorted(vars(args).items())
        if k != "func" and isinstance(v, simple)
    }


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _read_tokens(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().split()


class _OutStream:
    """stdout by default, a file when --out is given."""

    def __init__(self, path: str | None):
        self.path = path
        self.fh = open(path, "w", encoding="utf-8") if path else sys.stdout

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        return False


def _write_report(args, report: dict) -> None:
    if getattr(args, "report", None):
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, ensure_ascii=False, indent=2)
            fh.write("\n")


def _load_table(args) -> EmbeddingTable | None:
    has_file = getattr(args, "embeddings", None)
    has_dim = getattr(args, "hashed_dim", None)
    if has_file and has_dim:
        raise ValueError("--embeddings and --hashed-dim are mutually exclusive")
    if has_file:
        return load_embeddings(args.embeddings)
    if has_dim:
        return hashed_embeddings(dim=args.hashed_dim, seed=args.hashed_seed)
    return None


def _read_pairs(args) -> list[dict]:
    if getattr(args, "pairs", None):
        items = []
        with open(args.pairs, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{args.pairs} line {lineno}: malformed JSON: {exc.msg}")
                if not isinstance(rec, dict) or rec.get("hyp") is None or rec.get("ref") is None:
                    raise ValueError(
                        f"{args.pairs} line {lineno}: record needs non-null 'hyp' and 'ref'"
                    )
                items.append(
                    {
                        "id": str(rec.get("id", len(items))),
                        "category": rec.get("category"),
                        "hyp": rec["hyp"],
                        "ref": rec["ref"],
                    }
                )
        return items
    if not (getattr(args, "hyp_file", None) and getattr(args, "ref_file", None)):
        raise ValueError("provide --pairs, or both --hyp-file and --ref-file")
    hyps = _read_lines(args.hyp_file)
    refs = _read_lines(args.ref_file)
    if len(hyps) != len(refs):
        raise ValueError(
            f"line counts differ: {args.hyp_file} has {len(hyps)}, {args.ref_file} has {len(refs)}"
        )
    return [
        {"id": str(i), "category": None, "hyp": h, "ref": r}
        for i, (h, r) in enumerate(zip(hyps, refs))
    ]


class _Scorer:
    """Resolves one metric id and its shared resources once per run."""

    def __init__(self, args):
        self.args = args
        self.table = _load_table(args) if self._needs_table(args) else None
        self.counts = None
        if getattr(args, "counts", None):
            self.counts = CountIndex.load_tsv(args.counts)
        self.meteor_cfg = MeteorConfig(
            penalty_gamma=getattr(args, "meteor_gamma", 0.0)
        )

    @staticmethod
    def _needs_table(args) -> bool:
        metrics = getattr(args, "metrics", None) or [args.metric]
        return any(m in EMBED_METRICS for m in metrics)

    def _vectors(self, toks):
        if self.table is None:
            raise ValueError("metric needs --embeddings or --hashed-dim")
        return [self.table.lookup(t) for t in toks]

    def _doc_vec(self, toks, normalize: bool):
        if self.table is None:
            raise ValueError("metric needs --embeddings or --hashed-dim")
        vec = doc_vector(toks, self.table, mode=self.args.pool)
        if not normalize:
            return vec
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError("zero-magnitude document vector")
        return vec / norm

    def score(self, metric: str, hyp_toks, ref_toks, hyp_text: str, ref_text: str) -> dict:
        a = self.args
        if metric == "rouge1":
            return rouge_n(1, ref_toks, hyp_toks).to_json()
        if metric == "rouge2":
            return rouge_n(2, ref_toks, hyp_toks).to_json()
        if metric == "rougeL":
            return rouge_l(ref_toks, hyp_toks).to_json()
        if metric == "rougeS":
            return rouge_s(ref_toks, hyp_toks, max_skip=a.max_skip).to_json()
        if metric == "wer":
            return wer(hyp_toks, ref_toks).to_json()
        if metric == "per":
            return per(hyp_toks, ref_toks).to_json()
        if metric == "ter":
            return ter_greedy(hyp_toks, ref_toks).to_json()
        if metric == "meteor":
            return meteor_lite(hyp_toks, ref_toks, self.meteor_cfg).to_json()
        if metric == "chrf":
            return chrf(hyp_toks, ref_toks, n=a.chrf_n, beta=a.chrf_beta).to_json()
        if metric == "gtm":
            return gtm(ref_toks, hyp_toks, p=a.gtm_p).to_json()
        if metric in SET_METRIC_KINDS:
            value = bag_coefficient(
                SET_METRIC_KINDS[metric],
                ngrams(hyp_toks, a.ngram),
                ngrams(ref_toks, a.ngram),
                alpha=a.alpha,
                beta=a.beta,
            )
            return {"metric": metric, "value": value}
        if metric == "cosine":
            value = vector_similarity(
                "cosine", self._doc_vec(hyp_toks, False), self._doc_vec(ref_toks, False)
            )
            return {"metric": "cosine", "value": value}
        if metric == "embedf1":
            return embed_f1(self._vectors(hyp_toks), self._vectors(ref_toks)).to_json()
        if metric == "greedy":
            value = greedy_match_similarity(self._vectors(hyp_toks), self._vectors(ref_toks))
            return {"metric": "greedy", "value": value}
        if metric == "wmd":
            if self.table is None:
                raise ValueError("metric needs --embeddings or --hashed-dim")
            cost, plan = wmd(_bow(hyp_toks), _bow(ref_toks), self.table)
            return {"metric": "wmd", "value": cost, "detail": {"relaxed": plan.relaxed}}
        if metric == "simile":
            if not hyp_toks or not ref_toks:
                raise ValueError("simile needs non-empty token sequences")
            value = simile(
                self._doc_vec(hyp_toks, True),
                self._doc_vec(ref_toks, True),
                len(hyp_toks),
                len(ref_toks),
                k=a.simile_k,
            )
            return {"metric": "simile", "value": value}
        if metric == "ngd":
            if self.counts is None:
                raise ValueError("ngd needs --counts with a count index TSV")
            value = ngd(hyp_text.strip(), ref_text.strip(), self.counts)
            return {"metric": "ngd", "value": value}
        raise ValueError(f"unknown metric {metric!r}")


def _bow(toks) -> dict:
    if not toks:
        raise ValueError("wmd needs non-empty token sequences")
    counts = Counter(toks)
    total = sum(counts.values())
    return {t: c / total for t, c in counts.items()}


def _tok(args, text: str):
    return tokenize(text, args.tokenize, lowercase=args.lowercase)


def _mean(values) -> float | None:
    values = list(values)
    return sum(values) / len(values) if values else None


def cmd_score(args) -> int:
    t0 = time.perf_counter()
    try:
        items = _read_pairs(args)
        scorer = _Scorer(args)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    rows, n_errors = [], 0
    with _OutStream(args.out) as out:
        for item in items:
            try:
                payload = scorer.score(
                    args.metric,
                    _tok(args, item["hyp"]),
                    _tok(args, item["ref"]),
                    item["hyp"],
                    item["ref"],
                )
            except (ValueError, KeyError) as exc:
                n_errors += 1
                sys.stderr.write(json.dumps({"id": item["id"], "error": str(exc)}) + "\n")
                continue
            row = {"id": item["id"]}
            if item["category"] is not None:
                row["category"] = item["category"]
            row.update(payload)
            rows.append(row)
            _emit(out, row)
    by_cat: dict = {}
    for row in rows:
        by_cat.setdefault(row.get("category", "uncategorized"), []).append(row["value"])
    report = {
        "command": "score",
        "config": _config_echo(args),
        "items": rows,
        "aggregates": {
            "mean": {args.metric: _mean(r["value"] for r in rows)},
            "per_category": {
                cat: {args.metric: _mean(vals)} for cat, vals in sorted(by_cat.items())
            },
        },
        "errors": n_errors,
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 1 if n_errors else 0


def _render_table(categories, metrics, cells) -> str:
    header = ["category"] + list(metrics)
    table_rows = [header]
    for cat in categories:
        table_rows.append(
            [cat] + [f"{cells[cat][m]:.4f}" if cells[cat][m] is not None else "-" for m in metrics]
        )
    widths = [max(len(r[i]) for r in table_rows) for i in range(len(header))]
    lines = []
    for r in table_rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def cmd_stress(args) -> int:
    t0 = time.perf_counter()
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    bad = [m for m in metrics if m not in METRIC_IDS]
    if bad or not metrics:
        return _fail(f"unknown metrics: {', '.join(bad) or '(none given)'}")
    args.metric = metrics[0]
    args.metrics = metrics
    try:
        items = _read_pairs(args)
        scorer = _Scorer(args)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    rows, n_errors = [], 0
    with _OutStream(args.out) as out:
        for item in items:
            category = item["category"] if item["category"] is not None else "uncategorized"
            scores = {}
            try:
                for m in metrics:
                    payload = scorer.score(
                        m, _tok(args, item["hyp"]), _tok(args, item["ref"]),
                        item["hyp"], item["ref"],
                    )
                    scores[m] = payload["value"]
            except (ValueError, KeyError) as exc:
                n_errors += 1
                sys.stderr.write(json.dumps({"id": item["id"], "error": str(exc)}) + "\n")
                continue
            row = {"id": item["id"], "category": category, "scores": scores}
            rows.append(row)
            _emit(out, row)
    categories = sorted({r["category"] for r in rows})
    cells = {
        cat: {
            m: _mean(r["scores"][m] for r in rows if r["category"] == cat)
            for m in metrics
        }
        for cat in categories
    }
    report = {
        "command": "stress",
        "config": _config_echo(args),
        "items": rows,
        "aggregates": {
            "mean": {m: _mean(r["scores"][m] for r in rows) for m in metrics},
            "per_category": cells,
        },
        "table_text": _render_table(categories, metrics, cells),
        "errors": n_errors,
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 1 if n_errors else 0


def _read_corpus(args) -> list[tuple]:
    lines = _read_lines(args.corpus)
    return [_tok(args, line) for line in lines if line.strip()]


def cmd_topics_build(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    try:
        docs = _read_corpus(args)
        cfg = BuildConfig(
            vertex_mode=args.vertex_mode,
            edge_mode=args.edge_mode,
            table=_load_table(args),
            agg_mode=args.agg,
            window=args.window,
        )
        graph = build_word_graph(docs, cfg)
        partition, q_trace = louvain(graph, seed=seed)
        topics = extract_topics(graph, partition, args.top_k)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    if args.graph_out:
        save_graph_tsv(graph, args.graph_out)
    payload = topics_to_json(topics)
    if args.topics_out:
        with open(args.topics_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    else:
        sys.stdout.write(json.dumps(payload, ensure_ascii=False) + "\n")
    report = {
        "command": "topics build",
        "config": _config_echo(args),
        "seed": seed,
        "communities": len(topics),
        "modularity": modularity(graph, partition),
        "q_trace": q_trace,
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 0


def cmd_topics_assign(args) -> int:
    try:
        with open(args.topics, encoding="utf-8") as fh:
            topics = topics_from_json(json.load(fh))
        docs = _read_corpus(args)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    with _OutStream(args.out) as out:
        for i, doc in enumerate(docs):
            _emit(out, {"id": i, "topic": assign_topic(doc, topics)})
    return 0


def cmd_topics_eval(args) -> int:
    t0 = time.perf_counter()
    try:
        with open(args.topics, encoding="utf-8") as fh:
            topics = topics_from_json(json.load(fh))
        docs = _read_corpus(args)
        truth = None
        if args.truth:
            with open(args.truth, encoding="utf-8") as fh:
                truth = json.load(fh)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    rows = []
    with _OutStream(args.out) as out:
        for topic in topics:
            row = {"topic": topic.id, "grid": {}}
            for k in TOPIC_GRID:
                cell = {
                    "tc": topic_coherence(topic, docs, k),
                    "pmi": topic_pmi(topic, docs, k),
                }
                if truth:
                    detected = [t for t, _ in topic.keywords]
                    cell["prf"] = {
                        name: list(topic_prf(detected, keywords, k))
                        for name, keywords in sorted(truth.items())
                    }
                row["grid"][str(k)] = cell
            rows.append(row)
            _emit(out, row)
    report = {
        "command": "topics eval",
        "config": _config_echo(args),
        "items": rows,
        "aggregates": {
            str(k): {
                "tc": _mean(r["grid"][str(k)]["tc"] for r in rows),
                "pmi": _mean(r["grid"][str(k)]["pmi"] for r in rows),
            }
            for k in TOPIC_GRID
        },
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 0


def cmd_attack_sample(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    try:
        ref = tuple(_read_tokens(args.ref_file))
        vocab = tuple(_read_tokens(args.vocab_file))
        cfg = GAConfig(
            population=args.pop,
            generations=args.gens,
            seed=seed,
            mutation_rate=args.mutation_rate,
            crossover_rate=args.crossover_rate,
        )
        genome_len = args.genome_len if args.genome_len else max(1, 2 * len(ref))
        samples = ga_sample_rouge_space(ref, vocab, cfg, genome_len)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    front = pareto_front(samples)
    front_ids = [i for i, s in enumerate(samples) if s in front]
    with _OutStream(args.out) as out:
        for s in samples:
            _emit(out, {"text": " ".join(s.text), "r1": s.r1, "r2": s.r2, "rl": s.rl})
    report = {
        "command": "attack sample",
        "config": _config_echo(args),
        "seed": seed,
        "genome_len": genome_len,
        "front": front_ids,
        "r1_range": [min(s.r1 for s in samples), max(s.r1 for s in samples)],
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 0


def cmd_attack_bag2seq(args) -> int:
    t0 = time.perf_counter()
    try:
        doc = tuple(_read_tokens(args.doc_file))
        ref = tuple(_read_tokens(args.ref_file)) if args.ref_file else None
        idf = None
        if args.idf_file:
            idf = TfIdfWeights.load_tsv(args.idf_file)
        elif args.corpus:
            idf = tfidf_index(_read_corpus(args))
        text, scores = rouge_attack(
            doc, ref, idf, c=args.c, mode=args.mode, top_k=args.top_k
        )
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    with _OutStream(args.out) as out:
        _emit(
            out,
            {
                "text": " ".join(text),
                "scores": {name: mr.value for name, mr in sorted(scores.items())},
            },
        )
    report = {
        "command": "attack bag2seq",
        "config": _config_echo(args),
        "kept_tokens": len(text),
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 0


def _make_embed_scorer(table: EmbeddingTable):
    cache: dict = {}

    def vec(token):
        if token not in cache:
            cache[token] = table.lookup(token)
        return cache[token]

    def score(hyp, ref) -> float:
        return embed_f1([vec(t) for t in hyp], [vec(t) for t in ref]).value

    return score


def cmd_attack_trigger(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    try:
        refs = [_tok(args, line) for line in _read_lines(args.refs_file) if line.strip()]
        alphabet = tuple(_read_tokens(args.alphabet_file))
        table = _load_table(args)
        if table is None:
            raise ValueError("trigger search needs --embeddings or --hashed-dim")
        cfg = GAConfig(
            population=args.pop,
            generations=args.gens,
            seed=seed,
            mutation_rate=args.mutation_rate,
            crossover_rate=args.crossover_rate,
        )
        run = ga_universal_trigger_run(
            refs,
            _make_embed_scorer(table),
            alphabet,
            cfg,
            trigger_len=args.trigger_len,
            fitness_threshold=args.threshold,
            max_rounds=args.max_rounds,
        )
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    stats = {
        "min": min(run.final_scores),
        "mean": sum(run.final_scores) / len(run.final_scores),
        "max": max(run.final_scores),
        "final_scores": list(run.final_scores),
        "round_targets": list(run.round_targets),
        "generations_per_round": [len(t) for t in run.round_traces],
        "seed": seed,
    }
    with _OutStream(args.out) as out:
        out.write(" ".join(run.trigger) + "\n")
        _emit(out, stats)
    report = {
        "command": "attack trigger",
        "config": _config_echo(args),
        "trigger": " ".join(run.trigger),
        **stats,
        "wall_time": time.perf_counter() - t0,
    }
    _write_report(args, report)
    return 0


def cmd_attack_probe(args) -> int:
    try:
        refs = [_tok(args, line) for line in _read_lines(args.refs_file) if line.strip()]
        table = _load_table(args)
        if table is None:
            raise ValueError("probe needs --embeddings or --hashed-dim")
        candidate = tuple(args.candidate.split())
        mean, lo, hi = backdoor_probe(candidate, refs, _make_embed_scorer(table))
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    with _OutStream(args.out) as out:
        _emit(out, {"candidate": args.candidate, "mean": mean, "min": lo, "max": hi})
    return 0


def cmd_attack_sanitize(args) -> int:
    policy = SanitizePolicy(
        run_len=args.run_len, max_rep=args.max_rep, min_ratio=args.min_ratio
    )
    try:
        lines = _read_lines(args.in_file)
    except OSError as exc:
        return _fail(str(exc))
    with _OutStream(args.out) as out:
        for i, line in enumerate(lines):
            rep = sanitize(line, policy)
            _emit(out, {"id": i, "passed": rep.passed, "flags": [dict(f) for f in rep.flags]})
    return 0


def cmd_counts(args) -> int:
    try:
        docs = _read_corpus(args)
        vocab = set(_read_tokens(args.vocab_file)) if args.vocab_file else None
        index = build_count_index(docs, vocabulary=vocab)
        index.save_tsv(args.counts_out)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    with _OutStream(args.out) as out:
        _emit(
            out,
            {
                "docs": index.total_docs,
                "terms": len(index.doc_count),
                "pairs": len(index.pair_count),
            },
        )
    return 0


def _add_common(sub, *, seed=True) -> None:
    sub.add_argument("--tokenize", choices=("word", "char", "hashtag_aware"), default="word")
    sub.add_argument("--lowercase", action="store_true")
    sub.add_argument("--out", help="write item JSONL here instead of stdout")
    sub.add_argument("--report", help="write the run report JSON here")
    if seed:
        sub.add_argument("--seed", type=int, default=None,
                         help="fallback: SIMFORGE_SEED, then 0")


def _add_embedding_flags(sub) -> None:
    sub.add_argument("--embeddings", help="embedding table file")
    sub.add_argument("--hashed-dim", type=int, help="use hashed embeddings of this dimension")
    sub.add_argument("--hashed-seed", type=int, default=0)


def _add_metric_params(sub) -> None:
    sub.add_argument("--ngram", type=int, default=1, help="bag arity for set coefficients")
    sub.add_argument("--alpha", type=float, default=1.0)
    sub.add_argument("--beta", type=float, default=1.0)
    sub.add_argument("--max-skip", type=int, default=None)
    sub.add_argument("--gtm-p", type=float, default=1.0)
    sub.add_argument("--meteor-gamma", type=float, default=0.0,
                     help="fragmentation penalty weight; 0 disables the penalty")
    sub.add_argument("--chrf-n", type=int, default=6)
    sub.add_argument("--chrf-beta", type=float, default=2.0)
    sub.add_argument("--simile-k", type=float, default=0.25)
    sub.add_argument("--pool", choices=("mean", "extrema"), default="mean")
    sub.add_argument("--counts", help="count index TSV (needed by ngd)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simforge",
        description="Text similarity scoring, topic graphs, and evasion probes.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("score", help="score hypothesis/reference pairs with one metric")
    p.add_argument("--metric", required=True, choices=METRIC_IDS)
    p.add_argument("--pairs", help="JSONL with hyp/ref/category/id records")
    p.add_argument("--hyp-file")
    p.add_argument("--ref-file")
    _add_metric_params(p)
    _add_embedding_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = commands.add_parser("stress", help="per-category metric means over a labelled pairs file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--metrics", required=True, help="comma-separated metric ids")
    _add_metric_params(p)
    _add_embedding_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_stress)

    topics = commands.add_parser("topics", help="word-graph topic pipeline")
    tsub = topics.add_subparsers(dest="subcommand", required=True)

    p = tsub.add_parser("build", help="corpus -> word graph -> communities -> topics JSON")
    p.add_argument("--corpus", required=True, help="one document per line")
    p.add_argument("--vertex-mode", choices=("word", "bigram", "trigram", "hashtag", "biha"),
                   default="word")
    p.add_argument("--edge-mode", choices=("cooccur", "embed_cosine"), default="cooccur")
    p.add_argument("--agg", choices=("none", "by_hashtag", "by_mention"), default="none")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--graph-out")
    p.add_argument("--topics-out")
    _add_embedding_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_topics_build)

    p = tsub.add_parser("assign", help="label each document with its best topic")
    p.add_argument("--corpus", required=True)
    p.add_argument("--topics", required=True, help="topics JSON from build")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_topics_assign)

    p = tsub.add_parser("eval", help="coherence/PMI grid and optional truth P/R/F")
    p.add_argument("--corpus", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--truth", help="JSON {topic_name: [keyword, ...]}")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_topics_eval)

    attack = commands.add_parser("attack", help="evasion probes and defences")
    asub = attack.add_subparsers(dest="subcommand", required=True)

    p = asub.add_parser("sample", help="multi-objective GA over the overlap-score space")
    p.add_argument("--ref-file", required=True)
    p.add_argument("--vocab-file", required=True)
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--gens", type=int, default=200)
    p.add_argument("--genome-len", type=int, default=None,
                   help="default: twice the reference length")
    p.add_argument("--mutation-rate", type=float, default=None)
    p.add_argument("--crossover-rate", type=float, default=0.9)
    _add_common(p)
    p.set_defaults(func=cmd_attack_sample)

    p = asub.add_parser("bag2seq", help="bag cover -> salient-run sequence attack")
    p.add_argument("--doc-file", required=True)
    p.add_argument("--ref-file", help="needed by oracle mode; scored when present")
    p.add_argument("--idf-file", help="idf TSV for heuristic mode")
    p.add_argument("--corpus", help="build idf from this corpus instead")
    p.add_argument("--mode", choices=("oracle", "heuristic"), default="oracle")
    p.add_argument("--c", type=int, default=3, help="minimum kept run length")
    p.add_argument("--top-k", type=int, default=16)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_attack_bag2seq)

    p = asub.add_parser("trigger", help="universal non-alphanumeric trigger GA")
    p.add_argument("--refs-file", required=True, help="one reference per line")
    p.add_argument("--alphabet-file", required=True)
    p.add_argument("--pop", type=int, default=10)
    p.add_argument("--gens", type=int, default=200)
    p.add_argument("--trigger-len", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.88)
    p.add_argument("--max-rounds", type=int, default=5)
    p.add_argument("--mutation-rate", type=float, default=None)
    p.add_argument("--crossover-rate", type=float, default=0.9)
    _add_embedding_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_attack_trigger)

    p = asub.add_parser("probe", help="score one fixed candidate against every reference")
    p.add_argument("--candidate", required=True)
    p.add_argument("--refs-file", required=True)
    _add_embedding_flags(p)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_attack_probe)

    p = asub.add_parser("sanitize", help="flag scrambled or degenerate lines")
    p.add_argument("--in-file", required=True)
    p.add_argument("--run-len", type=int, default=5)
    p.add_argument("--max-rep", type=int, default=8)
    p.add_argument("--min-ratio", type=float, default=0.5)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_attack_sanitize)

    p = commands.add_parser("counts", help="document/pair presence counts for ngd")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-file")
    p.add_argument("--counts-out", required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_counts)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
