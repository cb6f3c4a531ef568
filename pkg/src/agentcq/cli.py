"""Command-line orchestrator.

One subcommand per pipeline stage plus ``all`` and ``report``. Stages read
and write line-delimited artifacts under the configured output directory;
every artifact gets a manifest naming the config digest that produced it.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, crowdllm, filtering, generation, ingest, reports, retrieval
from .config import DEFAULTS, PipelineConfig
from .crowdllm import Judge, JudgePanel
from .domain import ANSWER_ASPECTS, ClarifyingQuestion, Facet, Topic
from .errors import AgentCQError, ValidationError
from .gateway import Gateway, LiveProvider, MockProvider, save_call_log
from .simulation import SimulationRequest, derive_seed, sample_profile, simulate_answer

STAGE_ORDER = ("generate", "filter", "simulate", "judge", "agree", "analyze", "report")

ARTIFACTS = {
    "generate": "generated.jsonl",
    "filter": "filtered.jsonl",
    "simulate": "answered.jsonl",
    "judge": "judged.jsonl",
    "agree": "agreement.jsonl",
    "analyze": "analyzed.jsonl",
    "retrieve": "retrieved.jsonl",
}

REPORT_TABLES = (
    "agreement",
    "answers",
    "correlation",
    "length",
    "patterns",
    "response_types",
    "categories",
    "pairwise",
    "retrieval",
)


class StageError(AgentCQError):
    """A stage cannot run; message is user-facing."""


def _require_artifact(cfg: PipelineConfig, stage: str) -> Path:
    path = cfg.out_path(ARTIFACTS[stage])
    if not path.exists():
        raise StageError(
            f"missing artifact {path}; run the '{stage}' stage first"
        )
    return path


def _make_gateway(cfg: PipelineConfig) -> Gateway:
    if cfg.get("provider.kind") == "mock":
        provider = MockProvider(seed=cfg.stage_seed("provider"))
    else:
        provider = LiveProvider()
    return Gateway(
        provider,
        max_concurrency=cfg.get_int("provider.max_concurrency"),
        retry_budget=cfg.get_int("provider.retry_budget"),
    )


def _load_dataset(cfg: PipelineConfig) -> ingest.ClariqDataset:
    split = cfg.get("data.split")
    path = Path(cfg.get("data.clariq_dir")) / f"{split}.tsv"
    if not path.exists():
        raise StageError(f"dataset file not found: {path}")
    return ingest.load_clariq(path)


def _run_topics(cfg: PipelineConfig, ds: ingest.ClariqDataset) -> list[Topic]:
    topics = ds.sorted_topics()
    limit = cfg.get_int("run.topics")
    return topics[:limit] if limit > 0 else topics


def _write(cfg: PipelineConfig, records: list, stage_name: str, stage_kind: str):
    return ingest.write_stage(
        records,
        cfg.out_path(ARTIFACTS[stage_name]),
        run_id=cfg.get("run.id"),
        stage=stage_kind,
        config_digest=cfg.digest(),
    )


def _maybe_save_calls(cfg: PipelineConfig, gateway: Gateway, stage_name: str, kind: str):
    if cfg.get_bool("provider.log_calls"):
        save_call_log(
            gateway,
            cfg.out_path(f"{stage_name}.calls.jsonl"),
            run_id=cfg.get("run.id"),
            stage=kind,
            config_digest=cfg.digest(),
        )


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------


def stage_generate(cfg: PipelineConfig) -> int:
    ds = _load_dataset(cfg)
    topics = _run_topics(cfg, ds)
    gateway = _make_gateway(cfg)
    strategies = cfg.get_list("generation.strategies")
    records: list = []
    for topic in topics:
        records.append(topic)
        for strategy in strategies:
            if strategy == "facet_based":
                facets = generation.generate_facets(
                    gateway,
                    topic,
                    cfg.get_int("generation.n_facets"),
                    model_name=cfg.get("models.facet_generation"),
                )
                records.extend(facets)
                pool = generation.QuestionPool(
                    topic_id=topic.topic_id,
                    candidates=generation.dedupe_questions(
                        [
                            generation.question_from_facet(
                                gateway,
                                topic,
                                facet,
                                model_name=cfg.get("models.question_generation"),
                            )
                            for facet in facets
                        ]
                    ),
                    strategy="facet_based",
                )
            elif strategy == "temperature_variation":
                pool = generation.generate_temperature_sets(
                    gateway,
                    topic,
                    cfg.get_int("generation.n_sets"),
                    cfg.get_int("generation.set_size"),
                    model_name=cfg.get("models.question_generation"),
                )
            else:
                pool = generation.generate_baseline(
                    gateway,
                    topic,
                    cfg.get_int("generation.baseline_n"),
                    model_name=cfg.get("models.question_generation"),
                )
            records.extend(pool.candidates)
    manifest = _write(cfg, records, "generate", "generated")
    _maybe_save_calls(cfg, gateway, "generate", "generated")
    print(f"generate: wrote {manifest.record_count} records")
    return 0


def _pools_from_records(records: list) -> tuple[dict[str, Topic], list[generation.QuestionPool]]:
    topics: dict[str, Topic] = {}
    grouped: dict[tuple[str, str], list[ClarifyingQuestion]] = {}
    for record in records:
        if isinstance(record, Topic):
            topics[record.topic_id] = record
        elif isinstance(record, ClarifyingQuestion):
            grouped.setdefault((record.topic_id, record.source), []).append(record)
    pools = [
        generation.QuestionPool(
            topic_id=topic_id, candidates=tuple(questions), strategy=source
        )
        for (topic_id, source), questions in grouped.items()
    ]
    return topics, pools


def stage_filter(cfg: PipelineConfig) -> int:
    records = ingest.read_stage(_require_artifact(cfg, "generate"))
    topics, pools = _pools_from_records(records)
    gateway = _make_gateway(cfg)
    alpha = cfg.get_float("filter.alpha")
    top_k = cfg.get_int("filter.top_k")
    out: list = [topic for topic in sorted(topics.values(), key=lambda t: t.topic_id)]
    for pool in pools:
        topic = topics[pool.topic_id]
        scores = [
            filtering.score_candidate(
                gateway,
                topic,
                question,
                model_name=cfg.get("models.filtering"),
                alpha=alpha,
            )
            for question in pool.candidates
        ]
        selected = filtering.select_top_k(pool, scores, top_k)
        out.extend(scores)
        out.extend(selected)
    manifest = _write(cfg, out, "filter", "filtered")
    _maybe_save_calls(cfg, gateway, "filter", "filtered")
    print(f"filter: wrote {manifest.record_count} records")
    return 0


def _selected_questions(records: list) -> tuple[dict[str, Topic], dict[str, list[ClarifyingQuestion]]]:
    """Topics and per-topic selected questions from the filtered artifact.

    The filtered artifact holds every score plus the selected questions;
    selected questions are exactly the ClarifyingQuestion records.
    """
    topics: dict[str, Topic] = {}
    selected: dict[str, list[ClarifyingQuestion]] = {}
    for record in records:
        if isinstance(record, Topic):
            topics[record.topic_id] = record
        elif isinstance(record, ClarifyingQuestion):
            selected.setdefault(record.topic_id, []).append(record)
    return topics, selected


def stage_simulate(cfg: PipelineConfig) -> int:
    records = ingest.read_stage(_require_artifact(cfg, "filter"))
    topics, selected = _selected_questions(records)
    ds = _load_dataset(cfg)
    gateway = _make_gateway(cfg)
    parameterized = cfg.get_bool("simulate.parameterized")
    include_human = cfg.get_bool("simulate.include_human_questions")
    seed = cfg.stage_seed("simulate")
    answers: list = []
    for topic_id in sorted(topics, key=_topic_key):
        topic = topics[topic_id]
        facets = ds.facets_for_topic(topic_id)
        for facet in facets:
            questions = list(selected.get(topic_id, []))
            if include_human:
                questions.extend(
                    q
                    for q in ds.questions_for_topic(topic_id)
                    if (facet.facet_id, q.question_id) in ds.answers
                )
            for question in questions:
                profile = sample_profile(
                    derive_seed(seed, facet.facet_id, question.question_id)
                )
                request = SimulationRequest(
                    topic=topic,
                    facet=facet,
                    question=question,
                    profile=profile,
                    seed=seed,
                )
                answers.append(
                    simulate_answer(
                        gateway,
                        request,
                        model_name=cfg.get("models.simulation"),
                        parameterized=parameterized,
                    )
                )
    manifest = _write(cfg, answers, "simulate", "answered")
    _maybe_save_calls(cfg, gateway, "simulate", "answered")
    print(f"simulate: wrote {manifest.record_count} records")
    return 0


def _topic_key(topic_id: str):
    return (0, int(topic_id)) if topic_id.isdigit() else (1, topic_id)


def _panel(cfg: PipelineConfig) -> JudgePanel:
    temperatures = cfg.get_float_list("judge.temperatures")
    return JudgePanel(
        judges=tuple(
            Judge(judge_id=f"judge-{i+1}", temperature=t)
            for i, t in enumerate(temperatures)
        ),
        model_name=cfg.get("models.judge"),
    )


def stage_judge(cfg: PipelineConfig) -> int:
    records = ingest.read_stage(_require_artifact(cfg, "filter"))
    topics, selected = _selected_questions(records)
    ds = _load_dataset(cfg)
    gateway = _make_gateway(cfg)
    panel = _panel(cfg)
    max_questions = cfg.get_int("judge.max_questions")
    max_pairs = cfg.get_int("judge.max_pairs")

    to_judge: list[tuple[Topic, ClarifyingQuestion]] = []
    for topic_id in sorted(topics, key=_topic_key):
        topic = topics[topic_id]
        for question in selected.get(topic_id, []):
            to_judge.append((topic, question))
        for question in ds.questions_for_topic(topic_id):
            to_judge.append((topic, question))
    if max_questions > 0:
        to_judge = to_judge[:max_questions]

    out: list = []
    for topic, question in to_judge:
        out.append(question)
        out.append(crowdllm.judge_question(gateway, topic, question, panel))

    # Pairwise answer comparison: human vs simulated answers to the same
    # (facet, question), judged on every answer aspect.
    answered_path = cfg.out_path(ARTIFACTS["simulate"])
    if answered_path.exists():
        llm_answers = {
            (a.facet_id, a.question_id): a
            for a in ingest.read_stage(answered_path)
            if getattr(a, "origin", "") == "llm"
        }
        pairs = []
        for (facet_id, question_id), human_answer in sorted(ds.answers.items()):
            llm_answer = llm_answers.get((facet_id, question_id))
            if llm_answer is None:
                continue
            facet = ds.facets.get(facet_id)
            if facet is None or facet.topic_id not in topics:
                continue
            question = next(
                (
                    q
                    for q in ds.questions_for_topic(facet.topic_id)
                    if q.question_id == question_id
                ),
                None,
            )
            if question is None:
                continue
            pairs.append((topics[facet.topic_id], facet, question, human_answer, llm_answer))
        if max_pairs > 0:
            pairs = pairs[:max_pairs]
        pair_seed = cfg.stage_seed("judge-pairs")
        for topic, facet, question, human_answer, llm_answer in pairs:
            for aspect in ANSWER_ASPECTS:
                out.append(
                    crowdllm.judge_pair(
                        gateway,
                        topic,
                        facet,
                        question,
                        human_answer,
                        llm_answer,
                        aspect,
                        panel,
                        pair_id=f"{facet.facet_id}:{question.question_id}",
                        seed=pair_seed,
                    )
                )

    manifest = _write(cfg, out, "judge", "judged")
    _maybe_save_calls(cfg, gateway, "judge", "judged")
    print(f"judge: wrote {manifest.record_count} records")
    return 0


def stage_agree(cfg: PipelineConfig) -> int:
    records = ingest.read_stage(_require_artifact(cfg, "judge"))
    judgments = [r for r in records if isinstance(r, crowdllm.PanelQuestionJudgment)]
    questions = [r for r in records if isinstance(r, ClarifyingQuestion)]
    verdicts = [r for r in records if isinstance(r, crowdllm.PanelPairVerdict)]
    group_of = {q.question_id: q.source for q in questions}

    out: list = []
    out.extend(reports.agreement_rows(judgments, group_of))
    out.extend(reports.pair_agreement_rows(verdicts))
    out.extend(reports.correlation_rows(judgments))
    out.extend(reports.pairwise_outcome_rows(verdicts))
    manifest = _write(cfg, out, "agree", "analyzed")
    print(f"agree: wrote {manifest.record_count} records")
    return 0


def stage_analyze(cfg: PipelineConfig) -> int:
    records = ingest.read_stage(_require_artifact(cfg, "filter"))
    topics, selected = _selected_questions(records)
    ds = _load_dataset(cfg)
    classify = cfg.get_bool("analysis.classify_categories")
    gateway = _make_gateway(cfg) if classify else None

    questions: list[tuple[Topic, ClarifyingQuestion]] = []
    for topic_id in sorted(topics, key=_topic_key):
        topic = topics[topic_id]
        for question in selected.get(topic_id, []):
            questions.append((topic, question))
        if cfg.get_bool("analysis.include_human"):
            for question in ds.questions_for_topic(topic_id):
                questions.append((topic, question))

    out: list = []
    for topic, question in questions:
        category = "general"
        if classify:
            category = analysis.classify_category(
                gateway, topic, question, model_name=cfg.get("models.category")
            )
        out.append(question)
        out.append(
            analysis.analyze_question(question.question_id, question.text, category)
        )
    manifest = _write(cfg, out, "analyze", "analyzed")
    if gateway is not None:
        _maybe_save_calls(cfg, gateway, "analyze", "analyzed")
    print(f"analyze: wrote {manifest.record_count} records")
    return 0


def stage_retrieve(cfg: PipelineConfig) -> int:
    answered = ingest.read_stage(_require_artifact(cfg, "simulate"))
    corpus_path = cfg.get("data.corpus")
    qrels_path = cfg.get("data.qrels")
    if not corpus_path or not Path(corpus_path).exists():
        raise StageError("retrieve needs data.corpus pointing at a corpus file")
    if not qrels_path or not Path(qrels_path).exists():
        raise StageError("retrieve needs data.qrels pointing at a judgment file")

    filtered = ingest.read_stage(_require_artifact(cfg, "filter"))
    topics, selected = _selected_questions(filtered)
    ds = _load_dataset(cfg)
    corpus = ingest.load_corpus(corpus_path)
    qrels = ingest.qrels_to_map(
        ingest.load_qrels(qrels_path, negative_grades=cfg.get("data.negative_grades"))
    )
    index = retrieval.build_index(corpus)
    doc_texts = {d.doc_id: d.text for d in corpus}

    questions_by_id: dict[tuple[str, str], ClarifyingQuestion] = {}
    for topic_id, questions in selected.items():
        for question in questions:
            questions_by_id[(topic_id, question.question_id)] = question
    for (topic_id, question_id), question in ds.questions.items():
        questions_by_id.setdefault((topic_id, question_id), question)

    items: list[retrieval.RetrievalItem] = []
    for answer_record in answered:
        facet = ds.facets.get(answer_record.facet_id)
        if facet is None or facet.topic_id not in topics:
            continue
        question = questions_by_id.get((facet.topic_id, answer_record.question_id))
        if question is None:
            continue
        items.append(
            retrieval.RetrievalItem(
                topic=topics[facet.topic_id],
                facet_id=answer_record.facet_id,
                question=question,
                answer=answer_record,
                question_label=question.source,
                answer_label=answer_record.origin,
            )
        )
    # Human answers from the dataset evaluate alongside the simulated ones.
    for (facet_id, question_id), human_answer in sorted(ds.answers.items()):
        facet = ds.facets[facet_id]
        if facet.topic_id not in topics:
            continue
        question = questions_by_id.get((facet.topic_id, question_id))
        if question is None:
            continue
        items.append(
            retrieval.RetrievalItem(
                topic=topics[facet.topic_id],
                facet_id=facet_id,
                question=question,
                answer=human_answer,
                question_label=question.source,
                answer_label="human",
            )
        )

    report = retrieval.evaluate_run(
        items,
        index,
        qrels,
        strategy=cfg.get("retrieval.strategy"),
        k1=cfg.get_float("retrieval.k1"),
        b=cfg.get_float("retrieval.b"),
        gain=cfg.get("retrieval.gain"),
        rerank_endpoint=cfg.get("retrieval.rerank_endpoint") or None,
        doc_texts=doc_texts,
        rerank_depth=cfg.get_int("retrieval.rerank_depth"),
        cutoff=cfg.get_int("retrieval.cutoff"),
    )
    manifest = _write(cfg, report.rows, "retrieve", "retrieved")
    print(report.to_table())
    if report.excluded_facets:
        print(f"retrieve: excluded {report.excluded_facets} facet(s) without judgments")
    print(f"retrieve: wrote {manifest.record_count} rows")
    return 0


def stage_report(cfg: PipelineConfig, table: str) -> int:
    if table in ("agreement", "answers", "correlation", "pairwise"):
        records = ingest.read_stage(_require_artifact(cfg, "agree"))
        if table == "agreement":
            rows = [r for r in records if isinstance(r, reports.AgreementRow)]
            rendered = reports.render_agreement_table(rows)
        elif table == "answers":
            rows = [r for r in records if isinstance(r, reports.PairAgreementRow)]
            rendered = reports.render_pair_agreement_table(rows)
        elif table == "correlation":
            rows = [r for r in records if isinstance(r, reports.CorrelationRow)]
            rendered = reports.render_correlation_table(rows)
        else:
            rows = [r for r in records if isinstance(r, reports.PairwiseOutcomeRow)]
            rendered = reports.render_pairwise_table(rows)
    elif table in ("length", "patterns", "response_types", "categories"):
        records = ingest.read_stage(_require_artifact(cfg, "analyze"))
        questions = [r for r in records if isinstance(r, ClarifyingQuestion)]
        profiles = [r for r in records if isinstance(r, analysis.AnalysisProfile)]
        group_of = {q.question_id: q.source for q in questions}
        groups = reports.profiles_by_group(profiles, group_of)
        if table == "length":
            rendered = reports.render_length_table(groups)
        else:
            rendered = reports.render_distribution_table(groups, table)
    elif table == "retrieval":
        records = ingest.read_stage(_require_artifact(cfg, "retrieve"))
        report = retrieval.RetrievalReport(
            rows=[r for r in records if isinstance(r, retrieval.RetrievalRow)]
        )
        rendered = report.to_table()
    else:
        raise StageError(f"unknown table {table!r}; choose from {REPORT_TABLES}")

    out_path = cfg.out_path(f"report_{table}.txt")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(rendered + "\n", encoding="utf-8")
    print(rendered)
    return 0


def stage_all(cfg: PipelineConfig, table: str) -> int:
    stage_generate(cfg)
    stage_filter(cfg)
    stage_simulate(cfg)
    stage_judge(cfg)
    stage_agree(cfg)
    stage_analyze(cfg)
    if cfg.get("data.corpus") and cfg.get("data.qrels"):
        stage_retrieve(cfg)
    return stage_report(cfg, table)


# --------------------------------------------------------------------------
# Argument handling
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file of dotted 'key = value' lines")
    common.add_argument("--seed", type=int, help="root seed (run.seed)")
    common.add_argument("--provider", choices=("mock", "live"), help="provider.kind")
    common.add_argument("--alpha", type=float, help="filter.alpha")
    common.add_argument("--topk", type=int, help="filter.top_k")
    common.add_argument("--strategy", help="retrieval.strategy")
    common.add_argument("--out", help="run.out_dir")
    common.add_argument("--topics", type=int, help="run.topics (0 = all)")
    common.add_argument("--split", help="data.split (train/dev)")
    common.add_argument("--data", help="data.clariq_dir")
    common.add_argument("--corpus", help="data.corpus")
    common.add_argument("--qrels", help="data.qrels")
    common.add_argument(
        "--stage-model",
        action="append",
        default=[],
        metavar="STAGE=MODEL",
        help="override models.<stage>, e.g. --stage-model judge=gpt-4o",
    )
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key by dotted name",
    )

    parser = argparse.ArgumentParser(
        prog="agentcq",
        description="Clarifying-question generation, evaluation, and retrieval pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "filter", "simulate", "judge", "agree", "analyze", "retrieve"):
        sub.add_parser(name, parents=[common])
    report = sub.add_parser("report", parents=[common])
    report.add_argument("--table", choices=REPORT_TABLES, default="agreement")
    everything = sub.add_parser("all", parents=[common])
    everything.add_argument("--table", choices=REPORT_TABLES, default="agreement")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides: dict[str, str] = {}
    direct = {
        "seed": "run.seed",
        "provider": "provider.kind",
        "alpha": "filter.alpha",
        "topk": "filter.top_k",
        "strategy": "retrieval.strategy",
        "out": "run.out_dir",
        "topics": "run.topics",
        "split": "data.split",
        "data": "data.clariq_dir",
        "corpus": "data.corpus",
        "qrels": "data.qrels",
    }
    for attr, key in direct.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    for item in args.stage_model:
        if "=" not in item:
            raise ValidationError(f"--stage-model expects STAGE=MODEL, got {item!r}")
        stage, model = item.split("=", 1)
        key = f"models.{stage.strip()}"
        if key not in DEFAULTS:
            raise ValidationError(f"unknown stage for --stage-model: {stage!r}")
        overrides[key] = model.strip()
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return PipelineConfig.load(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "report":
            return stage_report(cfg, args.table)
        if args.command == "all":
            return stage_all(cfg, args.table)
        handler = {
            "generate": stage_generate,
            "filter": stage_filter,
            "simulate": stage_simulate,
            "judge": stage_judge,
            "agree": stage_agree,
            "analyze": stage_analyze,
            "retrieve": stage_retrieve,
        }[args.command]
        return handler(cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AgentCQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
