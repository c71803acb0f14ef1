"""Batch command-line front-end for the whole pipeline.

Exit codes: 0 success, 2 partial per-topic failure (see failures.tsv in the
output directory), 1 fatal error.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click

from paravid import pipeline
from paravid.ensemble import EnsembleWeights
from paravid.errors import ParavidError
from paravid import evaluation
from paravid.paraphrase import (
    ParaphraseBundle,
    ParaphraseDefaults,
    build_bundle,
    parse_topics,
    read_bundle,
    write_bundle,
)
from paravid.providers import ProviderConfig, ProviderGateway
from paravid.store import ingest_store
from paravid.verification import verify_bundle, write_audit

DEFAULT_THETA = 0.5
DEFAULT_DEPTH = 1000


@dataclass(frozen=True)
class PipelineConfig:
    provider: ProviderConfig = ProviderConfig()
    defaults: ParaphraseDefaults = ParaphraseDefaults()
    theta: float = DEFAULT_THETA
    weights: EnsembleWeights = EnsembleWeights()
    depth: int = DEFAULT_DEPTH
    seed: int = 0
    jobs: int = 1


def _load_config(path: Path | None, overrides: dict) -> PipelineConfig:
    doc: dict = {}
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))

    def pick(key: str, fallback):
        if overrides.get(key) is not None:
            return overrides[key]
        return doc.get(key.replace("_", "-"), doc.get(key, fallback))

    provider = ProviderConfig(
        base_url=pick("base_url", "http://localhost:8199"),
        timeout_ms=int(pick("timeout_ms", 30_000)),
        max_retries=int(pick("max_retries", 2)),
        mode=pick("mode", "stub"),
        stub_seed=int(pick("stub_seed", 0)),
        cache_dir=Path(pick("cache_dir", ".paravid-cache")),
        stub_dim=int(pick("stub_dim", 64)),
        stub_concept_dim=(
            int(pick("stub_concept_dim", 0)) or None
        ),
        bearer_token=pick("bearer_token", None),
    )
    seeds = pick("seeds", list(ParaphraseDefaults().seeds))
    if isinstance(seeds, str):
        seeds = [int(s) for s in seeds.split(",") if s]
    defaults = ParaphraseDefaults(
        n_t2t=int(pick("n_t2t", 10)),
        seeds=tuple(int(s) for s in seeds),
        images_per_seed=int(pick("images_per_seed", 3)),
        captions_per_image=int(pick("captions_per_image", 10)),
    )
    raw_w = pick("weights", [1.0, 1.0, 0.5, 1.0])
    if isinstance(raw_w, str):
        raw_w = [float(x) for x in raw_w.split(",")]
    if len(raw_w) != 4:
        raise click.ClickException("weights must be four comma-separated numbers")
    return PipelineConfig(
        provider=provider,
        defaults=defaults,
        theta=float(pick("theta", DEFAULT_THETA)),
        weights=EnsembleWeights(*[float(w) for w in raw_w]),
        depth=int(pick("depth", DEFAULT_DEPTH)),
        seed=int(pick("seed", 0)),
        jobs=int(pick("jobs", 1)),
    )


def _artifact_dir(cfg: PipelineConfig) -> Path:
    gateway = ProviderGateway(cfg.provider)
    return gateway.cache_dir / "artifacts"


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None, help="JSON config file; flags override its fields.")
@click.option("--mode", type=click.Choice(["remote", "stub"]), default=None)
@click.option("--base-url", default=None)
@click.option("--timeout-ms", type=int, default=None)
@click.option("--max-retries", type=int, default=None)
@click.option("--stub-seed", type=int, default=None)
@click.option("--stub-dim", type=int, default=None)
@click.option("--stub-concept-dim", type=int, default=None)
@click.option("--cache-dir", type=click.Path(path_type=Path), default=None)
@click.option("--n-t2t", type=int, default=None)
@click.option("--seeds", default=None, help="Comma-separated generation seeds.")
@click.option("--images-per-seed", type=int, default=None)
@click.option("--captions-per-image", type=int, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--weights", default=None, help="user,t2t,t2i,i2t ensemble weights.")
@click.option("--depth", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Global experiment seed.")
@click.option("--jobs", type=int, default=None, help="Topic-level parallelism bound.")
@click.pass_context
def main(ctx: click.Context, config_path: Path | None, **overrides) -> None:
    """Query-paraphrasing video-search batch pipeline."""
    try:
        ctx.obj = _load_config(config_path, overrides)
    except (ValueError, ParavidError) as exc:
        raise click.ClickException(str(exc)) from exc


def _write_failures(out_dir: Path, failures: list[tuple[str, str]]) -> None:
    path = out_dir / "failures.tsv"
    lines = [f"{qid}\t{msg}" for qid, msg in failures]
    path.write_text("\n".join(lines) + "\n" if lines else "", encoding="utf-8")


@main.command("paraphrase")
@click.argument("topics", type=click.Path(exists=True, path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.pass_obj
def cmd_paraphrase(cfg: PipelineConfig, topics: Path, out_dir: Path) -> None:
    """Build one paraphrase bundle per topic."""
    queries = parse_topics(topics)
    out_dir.mkdir(parents=True, exist_ok=True)
    gateway = ProviderGateway(cfg.provider)
    artifact_dir = gateway.cache_dir / "artifacts"
    failures: list[tuple[str, str]] = []
    written: list[Path] = []

    def one(query):
        return build_bundle(gateway, query, cfg.defaults)

    with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        results = list(pool.map(lambda q: _try(one, q), queries))
    for query, (bundle, err) in zip(queries, results):
        if err is not None:
            failures.append((query.qid, err))
            continue
        written.append(write_bundle(bundle, out_dir, artifact_dir))
    _write_failures(out_dir, failures)
    pipeline.write_manifest(out_dir, written + [out_dir / "failures.tsv"])
    if failures:
        click.echo(f"{len(failures)} topic(s) failed; see failures.tsv", err=True)
        sys.exit(1 if not written else 2)


def _try(fn, *args):
    try:
        return fn(*args), None
    except Exception as exc:  # noqa: BLE001 - per-topic isolation
        return None, str(exc)


def _bundles_in(bundle_dir: Path, cfg: PipelineConfig) -> list[ParaphraseBundle]:
    artifact_dir = _artifact_dir(cfg)
    paths = sorted(Path(bundle_dir).glob("*.bundle"))
    if not paths:
        raise click.ClickException(f"no .bundle files in {bundle_dir}")
    return [read_bundle(p, artifact_dir) for p in paths]


@main.command("verify")
@click.argument("bundle_dir", type=click.Path(exists=True, path_type=Path))
@click.pass_obj
def cmd_verify(cfg: PipelineConfig, bundle_dir: Path) -> None:
    """Score paraphrases against the QA pairs and set valid flags in place."""
    gateway = ProviderGateway(cfg.provider)
    artifact_dir = gateway.cache_dir / "artifacts"
    failures: list[tuple[str, str]] = []
    for path in sorted(Path(bundle_dir).glob("*.bundle")):
        bundle = read_bundle(path, artifact_dir)
        try:
            verify_bundle(gateway, bundle)
        except Exception as exc:  # noqa: BLE001
            failures.append((bundle.query.qid, str(exc)))
            continue
        write_bundle(bundle, Path(bundle_dir), artifact_dir)
        write_audit(bundle, Path(bundle_dir) / f"{bundle.query.qid}.verify.tsv")
    _write_failures(Path(bundle_dir), failures)
    if failures:
        sys.exit(2)


@main.command("search")
@click.argument("bundle_dir", type=click.Path(exists=True, path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--emb-store", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--emb-ids", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--con-store", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--con-ids", type=click.Path(path_type=Path), default=None)
@click.option("--all-members", is_flag=True, help="Search every paraphrase, ignoring valid flags.")
@click.pass_obj
def cmd_search(cfg, bundle_dir, out_dir, emb_store, emb_ids, con_store, con_ids, all_members):
    """Produce per-source run files (user, t2t, t2i, i2t)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    gateway = ProviderGateway(cfg.provider)
    store = ingest_store(emb_store, emb_ids, kind="embedding")
    concepts = None
    if con_store is not None:
        if con_ids is None:
            raise click.ClickException("--con-store requires --con-ids")
        concepts = ingest_store(con_store, con_ids, kind="concept")
    bundles = _bundles_in(bundle_dir, cfg)
    failures: list[tuple[str, str]] = []
    scores_by_topic = {}

    def one(bundle):
        return pipeline.compute_bundle_scores(
            gateway, bundle, store, concepts, cfg.theta, only_valid=not all_members
        )

    with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        results = list(pool.map(lambda b: _try(one, b), bundles))
    for bundle, (scores, err) in zip(bundles, results):
        if err is not None:
            failures.append((bundle.query.qid, err))
        else:
            scores_by_topic[bundle.query.qid] = scores
    if not scores_by_topic:
        raise click.ClickException("every topic failed to search")
    runs = pipeline.search_runs(scores_by_topic, store, depth=cfg.depth)
    written = []
    for source in ("user", "t2t", "t2i", "i2t"):
        if source not in runs:
            continue
        path = out_dir / f"{source}.run"
        evaluation.write_run(runs[source], path)
        written.append(path)
    _write_failures(out_dir, failures)
    pipeline.write_manifest(
        out_dir,
        written + [out_dir / "failures.tsv"],
        notes={"absent_sources": sorted(set(("user", "t2t", "t2i", "i2t")) - set(runs))},
    )
    if failures:
        sys.exit(2)


@main.command("fuse")
@click.argument("run_dir", type=click.Path(exists=True, path_type=Path))
@click.argument("out_file", type=click.Path(path_type=Path))
@click.pass_obj
def cmd_fuse(cfg: PipelineConfig, run_dir: Path, out_file: Path) -> None:
    """Fuse the per-source runs in RUN_DIR into one weighted run."""
    user_path = run_dir / "user.run"
    if not user_path.exists():
        raise click.ClickException(f"{user_path}: user run is required")
    source_runs = {}
    for source in ("user", "t2t", "t2i", "i2t"):
        path = run_dir / f"{source}.run"
        source_runs[source] = evaluation.parse_run(path) if path.exists() else None
    fused = pipeline.fuse_runs(
        source_runs["user"],
        t2t_run=source_runs["t2t"],
        t2i_run=source_runs["t2i"],
        i2t_run=source_runs["i2t"],
        weights=cfg.weights,
        depth=cfg.depth,
    )
    evaluation.write_run(fused, out_file)


@main.command("eval")
@click.argument("run_file", type=click.Path(exists=True, path_type=Path))
@click.argument("qrels_file", type=click.Path(exists=True, path_type=Path))
@click.option("--metric", type=click.Choice(["xinfap", "medr"]), default="xinfap")
@click.option("--targets", type=click.Path(exists=True, path_type=Path), default=None,
              help="Known-item targets for medr: 'topic<TAB>video_id' lines.")
@click.pass_obj
def cmd_eval(cfg: PipelineConfig, run_file: Path, qrels_file: Path, metric: str, targets: Path | None) -> None:
    """Score a run against qrels and print a tab-separated report."""
    run = evaluation.parse_run(run_file)
    if metric == "xinfap":
        qrels = evaluation.parse_qrels(qrels_file)
        report = evaluation.xinfap_report(run, qrels, depth=cfg.depth)
    else:
        if targets is None:
            raise click.ClickException("--metric medr requires --targets")
        target_map = {}
        for line in Path(targets).read_text(encoding="utf-8").splitlines():
            if line.strip():
                topic, vid = line.split("\t", 1)
                target_map[topic] = vid
        report = evaluation.medr(run, target_map)
    click.echo(evaluation.format_report(report), nl=False)


@main.command("signif")
@click.argument("run_a", type=click.Path(exists=True, path_type=Path))
@click.argument("run_b", type=click.Path(exists=True, path_type=Path))
@click.argument("qrels_file", type=click.Path(exists=True, path_type=Path))
@click.option("--iters", type=int, default=100_000)
@click.pass_obj
def cmd_signif(cfg: PipelineConfig, run_a: Path, run_b: Path, qrels_file: Path, iters: int) -> None:
    """Paired randomization test on per-topic xinfAP of two runs."""
    qrels = evaluation.parse_qrels(qrels_file)
    rep_a = evaluation.xinfap_report(evaluation.parse_run(run_a), qrels, depth=cfg.depth)
    rep_b = evaluation.xinfap_report(evaluation.parse_run(run_b), qrels, depth=cfg.depth)
    topics = sorted(set(rep_a.per_topic) & set(rep_b.per_topic))
    if not topics:
        raise click.ClickException("the two runs share no topics")
    p = evaluation.randomization_test(
        [rep_a.per_topic[t] for t in topics],
        [rep_b.per_topic[t] for t in topics],
        iters=iters,
        seed=cfg.seed,
    )
    click.echo(f"p-value\t{p:.6g}")
    click.echo(f"mean-a\t{rep_a.mean:.6f}")
    click.echo(f"mean-b\t{rep_b.mean:.6f}")


@main.command("experiment-subsample")
@click.argument("bundle_dir", type=click.Path(exists=True, path_type=Path))
@click.argument("qrels_file", type=click.Path(exists=True, path_type=Path))
@click.option("--emb-store", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--emb-ids", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--con-store", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--con-ids", type=click.Path(path_type=Path), default=None)
@click.option("--sizes", default="1,5,15", help="Comma-separated subsample sizes.")
@click.option("--trials", type=int, default=5)
@click.pass_obj
def cmd_experiment_subsample(cfg, bundle_dir, qrels_file, emb_store, emb_ids, con_store, con_ids, sizes, trials):
    """Mean metric as a function of the number of valid queries used."""
    gateway = ProviderGateway(cfg.provider)
    store = ingest_store(emb_store, emb_ids, kind="embedding")
    concepts = None
    if con_store is not None:
        if con_ids is None:
            raise click.ClickException("--con-store requires --con-ids")
        concepts = ingest_store(con_store, con_ids, kind="concept")
    qrels = evaluation.parse_qrels(qrels_file)
    bundles = _bundles_in(bundle_dir, cfg)
    scores_by_topic = {
        b.query.qid: pipeline.compute_bundle_scores(
            gateway, b, store, concepts, cfg.theta, only_valid=True
        )
        for b in bundles
    }
    size_list = [int(s) for s in sizes.split(",") if s]
    rows = pipeline.subsample_experiment(
        scores_by_topic,
        store,
        {qid: qrels.topic(qid) for qid in scores_by_topic},
        sizes=size_list,
        trials=trials,
        seed=cfg.seed,
        weights=cfg.weights,
        depth=cfg.depth,
    )
    click.echo("size\ttrials\tmean_xinfap\tstddev")
    for row in rows:
        click.echo(f"{row['size']}\t{row['trials']}\t{row['mean']:.6f}\t{row['stddev']:.6f}")


@main.command("gen-conformance")
@click.argument("out_file", type=click.Path(path_type=Path))
@click.pass_obj
def cmd_gen_conformance(cfg: PipelineConfig, out_file: Path) -> None:
    """Write the normative stub conformance vectors for adapter services."""
    from paravid.conformance import generate_vectors, write_vectors

    write_vectors(generate_vectors(cfg.provider), out_file)
    click.echo(f"wrote {out_file}")


if __name__ == "__main__":
    main()
