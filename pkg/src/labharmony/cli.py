"""Command-line interface: preprocess, index, tune, generate-pairs, train,
harmonize, evaluate, serve, export-feedback, plus benchmark utilities."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import ablation as ablation_mod
from . import benchmark as benchmark_mod
from .bayesopt import TunerConfig, write_trace
from .fileio import (
    read_gold_csv,
    read_query_rows,
    read_reference_csv,
    read_runs_jsonl,
    write_gold_csv,
    write_jsonl,
    write_queries_csv,
    write_reference_csv,
)
from .hybrid import HybridRetriever
from .lexical import Bm25Index
from .metrics import compute_report, format_report_table
from .pairs import GenerationSchedule, PairFactory, read_pairs, write_pairs
from .pipeline import (
    PipelineConfig,
    ReviewStore,
    export_feedback_pairs,
    harmonize_batch,
    preprocess,
    read_results,
    write_results,
)
from .reranker import CompatibilityClassifier, TrainConfig
from .semantic import HashingEmbedder, SemanticIndex
from .synonyms import load_seed_dictionary, load_synonym_dictionary
from .types import WeightVector


def _load_config(ctx) -> PipelineConfig:
    cfg_path = ctx.obj.get("config")
    if cfg_path:
        return PipelineConfig.from_file(cfg_path)
    return PipelineConfig()


def _synonyms(path: str | None):
    if path:
        return load_synonym_dictionary(path)
    return load_seed_dictionary()


def _build_retriever(reference: str, synonyms_path: str | None,
                     weights: WeightVector, top_k: int, max_edits: int,
                     embed_dim: int, vectors: str | None = None,
                     snapshot: str | None = None) -> HybridRetriever:
    records = read_reference_csv(reference)
    synonyms = _synonyms(synonyms_path)
    provider = HashingEmbedder(dimension=embed_dim)
    retriever = HybridRetriever(synonyms=synonyms, weights=weights, top_k=top_k,
                                max_edits=max_edits, provider=provider)
    if snapshot or vectors:
        lexical = (Bm25Index.load(snapshot) if snapshot
                   else Bm25Index(synonyms=synonyms, max_edits=max_edits).fit(records))
        vectors_path = vectors or (snapshot + ".vectors" if snapshot else None)
        semantic = (SemanticIndex.from_vectors_file(vectors_path, query_provider=provider)
                    if vectors_path
                    else SemanticIndex(provider=provider).fit(records))
        retriever.from_parts(lexical, semantic, records)
    else:
        retriever.fit(records)
    return retriever


@click.group()
@click.option("--config", type=click.Path(), default=None,
              help="INI-style config file with [paths]/[retrieval]/[reranker]/[service] sections.")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.pass_context
def main(ctx, config, seed):
    """Laboratory triad harmonization toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config
    ctx.obj["seed"] = seed


def _seed(ctx, cfg: PipelineConfig) -> int:
    return ctx.obj["seed"] if ctx.obj.get("seed") is not None else cfg.seed


@main.command("preprocess")
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rejects", "rejects_path", default=None, type=click.Path())
def preprocess_cmd(queries_path, out_path, rejects_path):
    """Validate and deduplicate a raw query CSV."""
    rows = read_query_rows(queries_path)
    result = preprocess(rows)
    write_queries_csv(out_path, [q for _, q in result.queries])
    rejects_path = rejects_path or out_path + ".rejects.jsonl"
    write_jsonl(rejects_path, result.rejects)
    click.echo(f"kept {len(result.queries)} queries "
               f"({len(result.merged)} merged, {len(result.rejects)} rejected)")


@main.command()
@click.option("--reference", required=True, type=click.Path())
@click.option("--synonyms", "synonyms_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--embed-dim", default=256, type=int)
@click.option("--max-edits", default=1, type=int)
def index(reference, synonyms_path, out_path, embed_dim, max_edits):
    """Build and persist the lexical index snapshot and vector store."""
    records = read_reference_csv(reference)
    synonyms = _synonyms(synonyms_path)
    lexical = Bm25Index(synonyms=synonyms, max_edits=max_edits).fit(records)
    lexical.save(out_path)
    semantic = SemanticIndex(provider=HashingEmbedder(dimension=embed_dim)).fit(records)
    semantic.save_vectors(out_path + ".vectors")
    click.echo(f"indexed {len(records)} records -> {out_path}(.vectors)")


@main.command()
@click.option("--reference", required=True, type=click.Path())
@click.option("--synonyms", "synonyms_path", default=None, type=click.Path())
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--budget", default=120, type=int)
@click.option("--initial", default=20, type=int)
@click.option("--bounds", "bounds_spec", default=None,
              help="Narrowed search box as five lo:hi pairs, e.g. "
                   "'0:4,0:4,0:2,0:2,0:2' (must sit inside the standard box).")
@click.option("--trace", "trace_path", default=None, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Where to write the tuned weights JSON.")
@click.option("--embed-dim", default=256, type=int)
@click.pass_context
def tune(ctx, reference, synonyms_path, queries_path, gold_path, budget,
         initial, bounds_spec, trace_path, out_path, embed_dim):
    """Optimize fusion weights for validation MRR."""
    cfg = _load_config(ctx)
    seed = _seed(ctx, cfg)
    retriever = _build_retriever(reference, synonyms_path, WeightVector(),
                                 cfg.top_k, cfg.max_edits, embed_dim)
    rows = read_query_rows(queries_path)
    prep = preprocess(rows)
    gold = read_gold_csv(gold_path)
    qids = [qid for qid, _ in prep.queries]
    objective = ablation_mod.MrrObjective(
        retriever, [q for _, q in prep.queries], gold, qids, cutoff=cfg.top_k)
    bounds = _parse_bounds(bounds_spec) if bounds_spec else None
    theta, best, trace = _tune_weights(objective, budget, initial, seed, bounds)
    if trace_path:
        write_trace(trace_path, trace)
    payload = {"weights": list(theta.as_tuple()), "mrr": best,
               "budget": budget, "seed": seed}
    if out_path:
        Path(out_path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(json.dumps(payload))


def _parse_bounds(spec: str):
    from .types import WEIGHT_BOUNDS

    parts = [p for p in spec.split(",") if p.strip()]
    if len(parts) != 5:
        raise click.BadParameter("expected five lo:hi pairs")
    bounds = []
    for part, (std_lo, std_hi) in zip(parts, WEIGHT_BOUNDS):
        lo_s, _, hi_s = part.partition(":")
        lo, hi = float(lo_s), float(hi_s)
        if not (std_lo <= lo < hi <= std_hi):
            raise click.BadParameter(
                f"{part!r} must narrow the standard range [{std_lo}, {std_hi}]")
        bounds.append((lo, hi))
    return tuple(bounds)


def _tune_weights(objective, budget, initial, seed, bounds=None):
    from .bayesopt import tune as tune_fn

    kwargs = {"budget": budget, "n_initial": min(initial, budget - 1), "seed": seed}
    if bounds is not None:
        kwargs["bounds"] = bounds
    cfg = TunerConfig(**kwargs)
    result = tune_fn(lambda x: objective(WeightVector.from_sequence(x)), cfg)
    return WeightVector.from_sequence(result.best_theta), result.best_value, result.trace


@main.command("generate-pairs")
@click.option("--reference", required=True, type=click.Path())
@click.option("--synonyms", "synonyms_path", default=None, type=click.Path())
@click.option("--count", default=200000, type=int)
@click.option("--positive-fraction", default=0.5, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def generate_pairs(ctx, reference, synonyms_path, count, positive_fraction, out_path):
    """Generate labeled training pairs from the reference pool."""
    cfg = _load_config(ctx)
    seed = _seed(ctx, cfg)
    records = read_reference_csv(reference)
    synonyms = _synonyms(synonyms_path)
    factory = PairFactory(records, synonyms, seed=seed)
    schedule = GenerationSchedule(total=count, positive_fraction=positive_fraction)
    n = write_pairs(out_path, factory.generate(schedule))
    click.echo(f"wrote {n} pairs to {out_path}")


@main.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path())
@click.option("--synonyms", "synonyms_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--epochs", default=1, type=int)
@click.option("--lr", default=1e-2, type=float)
@click.option("--batch-size", default=256, type=int)
@click.option("--label-smoothing", default=0.0, type=float)
@click.pass_context
def train(ctx, pairs_path, synonyms_path, out_path, epochs, lr, batch_size,
          label_smoothing):
    """Train the compatibility scorer on labeled pairs."""
    cfg = _load_config(ctx)
    seed = _seed(ctx, cfg)
    pairs = read_pairs(pairs_path)
    clf = CompatibilityClassifier(synonyms=_synonyms(synonyms_path))
    clf.fit(pairs, config=TrainConfig(lr_max=lr, epochs=epochs,
                                      batch_size=batch_size,
                                      label_smoothing=label_smoothing, seed=seed))
    clf.save(out_path)
    report = clf.report_
    click.echo(report.header)
    click.echo(f"steps={report.steps} val_acc={report.val_accuracy:.4f} "
               f"val_f1={report.val_f1:.4f} -> {out_path}")


@main.command()
@click.option("--reference", required=True, type=click.Path())
@click.option("--synonyms", "synonyms_path", default=None, type=click.Path())
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--model", "model_path", default=None, type=click.Path())
@click.option("--index", "snapshot_path", default=None, type=click.Path(),
              help="Load the index snapshot written by `index` instead of rebuilding.")
@click.option("--weights", default=None, help="Comma-separated alpha,beta,w_test,w_sample,w_unit.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--threads", default=1, type=int)
@click.option("--top-k", default=None, type=int)
@click.option("--lam", default=None, type=float)
@click.option("--embed-dim", default=256, type=int)
@click.pass_context
def harmonize(ctx, reference, synonyms_path, queries_path, model_path, snapshot_path,
              weights, out_path, threads, top_k, lam, embed_dim):
    """Run the full pipeline over a query file and write results JSONL."""
    cfg = _load_config(ctx)
    theta = (WeightVector.from_sequence([float(v) for v in weights.split(",")])
             if weights else WeightVector.from_sequence(cfg.weights))
    retriever = _build_retriever(reference, synonyms_path, theta,
                                 top_k or cfg.top_k, cfg.max_edits, embed_dim,
                                 snapshot=snapshot_path)
    scorer = None
    if model_path:
        scorer = CompatibilityClassifier(synonyms=retriever.lexical_.synonyms_)
        scorer.load_weights(model_path)
    prep = preprocess(read_query_rows(queries_path))
    results = harmonize_batch(prep.queries, retriever, scorer=scorer,
                              lam=lam if lam is not None else cfg.lam,
                              top_k=top_k or cfg.top_k,
                              use_rerank=cfg.use_rerank,
                              use_override=cfg.use_override,
                              n_threads=threads)
    write_results(out_path, results, meta={
        "reference": str(reference), "queries": str(queries_path),
        "model": str(model_path) if model_path else None,
        "weights": list(theta.as_tuple()),
    })
    tags = {}
    for r in results:
        tags[r.tag.value] = tags.get(r.tag.value, 0) + 1
    click.echo(f"harmonized {len(results)} queries -> {out_path} {json.dumps(tags)}")


@main.command()
@click.option("--runs", "runs_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--k", "ks", default="1,3,5,10")
@click.option("--json", "as_json", is_flag=True, default=False)
def evaluate(runs_path, gold_path, ks, as_json):
    """Score a results/runs file against gold labels."""
    runs = read_runs_jsonl(runs_path)
    gold = read_gold_csv(gold_path)
    runs = {qid: ids for qid, ids in runs.items() if qid in gold}
    cutoffs = tuple(int(v) for v in ks.split(","))
    report = compute_report(runs, gold, ks=cutoffs)
    if as_json:
        click.echo(report.to_json())
    else:
        click.echo(format_report_table({"run": report}, ks=cutoffs))


@main.command()
@click.option("--reference", required=True, type=click.Path())
@click.option("--synonyms", "synonyms_path", default=None, type=click.Path())
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--budget", default=120, type=int)
@click.option("--lam", default=0.3, type=float)
@click.option("--modes", default="lexical,semantic,hybrid,hybrid+rerank",
              help="Comma-separated subset of the four retrieval modes.")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--embed-dim", default=256, type=int)
@click.pass_context
def ablate(ctx, reference, synonyms_path, queries_path, gold_path, budget, lam,
           modes, out_path, embed_dim):
    """Compare lexical / semantic / hybrid / hybrid+rerank on one dataset."""
    cfg = _load_config(ctx)
    seed = _seed(ctx, cfg)
    retriever = _build_retriever(reference, synonyms_path, WeightVector(),
                                 cfg.top_k, cfg.max_edits, embed_dim)
    prep = preprocess(read_query_rows(queries_path))
    gold = read_gold_csv(gold_path)
    qids = [qid for qid, _ in prep.queries]
    result = ablation_mod.run_ablation(
        retriever, [q for _, q in prep.queries], gold, qids,
        modes=tuple(m.strip() for m in modes.split(",") if m.strip()),
        lam=lam, budget=budget, seed=seed)
    click.echo(result.table)
    if out_path:
        Path(out_path).write_text(json.dumps(result.as_dict(), indent=2),
                                  encoding="utf-8")


@main.command()
@click.option("--results", "results_path", required=True, type=click.Path())
@click.option("--feedback", "feedback_path", required=True, type=click.Path())
@click.option("--reference", default=None, type=click.Path())
@click.option("--port", default=None, type=int)
@click.option("--static", "static_dir", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.pass_context
def serve(ctx, results_path, feedback_path, reference, port, static_dir, host):
    """Serve the review API (and the UI when a static dir is given)."""
    from .service import serve as run_service

    cfg = _load_config(ctx)
    results = read_results(results_path)
    triads = {}
    if reference:
        triads = {r.id: r.triad for r in read_reference_csv(reference)}
    store = ReviewStore(results, feedback_path, triads=triads)
    run_service(store, port=port or cfg.port, static_dir=static_dir, host=host)


@main.command("export-feedback")
@click.option("--feedback", "feedback_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def export_feedback(feedback_path, out_path):
    """Convert the verdict log into scorer training pairs."""
    n = export_feedback_pairs(feedback_path, out_path)
    click.echo(f"wrote {n} pairs to {out_path}")


@main.command("make-benchmark")
@click.option("--records", "n_records", default=2000, type=int)
@click.option("--eval-queries", "n_eval", default=500, type=int)
@click.option("--tune-queries", "n_tune", default=300, type=int)
@click.option("--hard-fraction", default=0.25, type=float)
@click.option("--outdir", required=True, type=click.Path())
@click.pass_context
def make_benchmark(ctx, n_records, n_eval, n_tune, hard_fraction, outdir):
    """Emit the synthetic benchmark (reference, queries, gold files)."""
    cfg = _load_config(ctx)
    seed = ctx.obj.get("seed")
    seed = seed if seed is not None else 7
    bench = benchmark_mod.make_benchmark(
        n_records=n_records, n_eval=n_eval, n_tune=n_tune, seed=seed,
        hard_fraction=hard_fraction)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_reference_csv(out / "reference.csv", bench.records)
    write_queries_csv(out / "queries_eval.csv", bench.eval_queries)
    write_gold_csv(out / "gold_eval.csv", bench.eval_gold)
    write_queries_csv(out / "queries_tune.csv", bench.tune_queries)
    write_gold_csv(out / "gold_tune.csv", bench.tune_gold)
    click.echo(f"benchmark written to {out} "
               f"({len(bench.records)} records, {len(bench.eval_queries)} eval queries)")


if __name__ == "__main__":
    main()
