"""
Pipeline stages behind the fader subcommands

NOTE:
1.Every stage writes under <workdir>/<stage>/ and records input and output hashes in manifest.json.
2.A stage whose inputs are unchanged and whose outputs are intact is a no-op. Changed inputs
  over existing outputs are refused unless force is set.
3.Chunk jobs (speculate, extract) write one part file per (chunk, run), so an interrupted
  stage resumes where it stopped. Failed chunks are logged, skipped and retried on the next run.
4.All outputs are sorted before writing, so --jobs never changes their bytes.
"""
import asyncio
import re
import shutil
from collections import defaultdict
from pathlib import Path
from typing import Awaitable, Callable, Dict, List, Optional, Sequence, Tuple

from app.analysis.providers import FileVectorProvider, HttpEmbeddingProvider
from app.analysis.utils import bucket_report, format_report_table, match_questions
from app.core.errors import (
    BackendError,
    ConfigurationError,
    MissingPrerequisiteError,
    StaleArtifactError,
)
from app.database.datastore import (
    Datastore,
    configure_datastore,
    file_sha256,
    iter_jsonl,
    log_error,
    payload_sha256,
    read_json,
    text_sha256,
    write_json,
    write_jsonl,
    write_text,
)
from app.database.schema_setup import validate_record
from app.eval.curves import build_curve, write_curve_csv, write_frontier_csv
from app.eval.schemas import MetricReport, Prediction, QaTask
from app.eval.utils import evaluate_predictions, metrics_for_profile
from app.kb.schemas import Edp
from app.kb.utils import build_run_kb, edps_to_units, load_kb, merge_kbs, meta_path, save_kb
from app.llmgen.backends import HttpChatBackend, mock_backend
from app.llmgen.parsing import parse_option_index
from app.llmgen.schemas import LlmBackend, SpeculatedQuestion
from app.llmgen.templates import PROFILE_TEMPLATES
from app.llmgen.utils import (
    TranscriptLog,
    answer_question,
    compress_answer,
    extract_edps,
    speculate_questions,
)
from app.retrieval.schemas import RankedContext, RetrievalUnit
from app.retrieval.utils import (
    build_scoped_indexes,
    chunks_to_units,
    index_key,
    load_external_units,
    load_scoped_indexes,
    load_units,
    render_context,
    retrieve_under_budget,
    save_scoped_indexes,
    save_units,
)
from app.text.schemas import Chunk
from app.text.utils import chunk_corpus
from .datasets import load_corpus, load_tasks
from .schemas import RunConfig, RunManifest, StageRecord

EDP_LABEL = re.compile(r"^(edp|edp_factonly)_s(\d+)$")
CHUNK_LABEL = re.compile(r"^chunk(\d+)$")

EVAL_NOTES = (
    "bleu4, rouge_l and meteor_lite compare lowercased default-tokenizer tokens with "
    "punctuation kept; meteor_lite has no synonym stage; token_f1 is max over gold "
    "answers, averaged over tasks"
)


class StageContext:
    """Config, datastore and manifest shared by the stages of one command"""

    def __init__(self, config: RunConfig, force: bool = False) -> None:
        self.config = config
        self.force = force
        self.store: Datastore = configure_datastore(config.workdir)
        self.manifest_path = self.store.path("manifest.json")
        self.manifest = RunManifest.load(self.manifest_path)

    def rel(self, path: Path) -> str:
        return path.relative_to(self.store.workdir).as_posix()

    def require(self, path: Path, command: str) -> Path:
        if not path.exists():
            raise MissingPrerequisiteError(self.rel(path), command)
        return path

    def input_file(self, value: Optional[str], field: str) -> Path:
        if not value:
            raise ConfigurationError(f"{field} is not set")
        path = Path(value)
        if not path.exists():
            raise ConfigurationError("Input file not found", value)
        return path

    def up_to_date(self, stage: str, inputs_hash: str, outputs: Sequence[Path]) -> bool:
        """
        Raises:
            StaleArtifactError: If outputs exist from different inputs and force is off
        """
        record = self.manifest.stages.get(stage)
        if record is None or not all(p.exists() for p in outputs):
            return False
        if record.inputs_hash != inputs_hash:
            if self.force:
                return False
            raise StaleArtifactError(stage)
        if record.failed:
            return False
        return all(record.outputs.get(self.rel(p)) == file_sha256(p) for p in outputs)

    def record(
        self,
        stage: str,
        inputs_hash: str,
        outputs: Sequence[Path],
        completed: Sequence[str] = (),
        failed: Sequence[str] = (),
    ) -> None:
        self.manifest.stages[stage] = StageRecord(
            inputs_hash=inputs_hash,
            outputs={self.rel(p): file_sha256(p) for p in outputs},
            completed=list(completed),
            failed=list(failed),
        )
        write_json(self.manifest_path, self.manifest.model_dump())


def make_backend(config: RunConfig) -> LlmBackend:
    if config.backend == "mock":
        return mock_backend(config.seed, config.template_version)
    return HttpChatBackend(model=config.model, temperature=config.temperature)


def load_chunks(path: Path) -> List[Chunk]:
    chunks = []
    for line_number, record in iter_jsonl(path):
        validate_record("chunk", record, str(path), line_number)
        chunks.append(Chunk(**record))
    return chunks


def load_questions(path: Path) -> Dict[Tuple[str, int], List[SpeculatedQuestion]]:
    by_chunk: Dict[Tuple[str, int], List[SpeculatedQuestion]] = defaultdict(list)
    for line_number, record in iter_jsonl(path):
        validate_record("question", record, str(path), line_number)
        question = SpeculatedQuestion(**record)
        by_chunk[(question.doc_id, question.chunk_index)].append(question)
    return by_chunk


def load_edps(path: Path) -> List[Edp]:
    edps = []
    for line_number, record in iter_jsonl(path):
        validate_record("edp", record, str(path), line_number)
        edps.append(Edp(**record))
    return edps


async def run_chunk_jobs(
    ctx: StageContext,
    stage_name: str,
    run: int,
    chunks: Sequence[Chunk],
    inputs_hash: str,
    job: Callable[[Chunk], Awaitable[List[dict]]],
) -> Tuple[List[dict], List[str], List[str]]:
    """
    Run job over every chunk with at most config.jobs in flight.

    Returns:
        Tuple[List[dict], List[str], List[str]]: records in chunk order, completed items, failed items
    """
    parts_dir = ctx.store.path(stage_name, "parts", f"run_{run}")
    stamp = parts_dir / "inputs.sha256"
    if parts_dir.exists() and (not stamp.exists() or stamp.read_text(encoding="utf-8") != inputs_hash):
        shutil.rmtree(parts_dir)
    parts_dir.mkdir(parents=True, exist_ok=True)
    write_text(stamp, inputs_hash)

    semaphore = asyncio.Semaphore(ctx.config.jobs)

    async def one(chunk: Chunk) -> Tuple[str, List[dict], bool]:
        item = f"{chunk.doc_id}:{chunk.chunk_index}:{run}"
        part = parts_dir / f"{text_sha256(chunk.doc_id)[:16]}_{chunk.chunk_index:05d}.jsonl"
        if part.exists():
            return item, [record for _, record in iter_jsonl(part)], True
        async with semaphore:
            try:
                records = await job(chunk)
            except BackendError as e:
                print(f"{stage_name}: chunk {item} failed after {e.attempts} attempts, continuing")
                await log_error(
                    error=e,
                    location=f"cli/pipeline.py - {stage_name}",
                    additional_info={"item": item},
                )
                return item, [], False
        write_jsonl(part, records)
        return item, records, True

    results = await asyncio.gather(*(one(chunk) for chunk in chunks))
    records: List[dict] = []
    completed: List[str] = []
    failed: List[str] = []
    for item, item_records, ok in results:
        records.extend(item_records)
        (completed if ok else failed).append(item)
    return records, completed, failed


async def cmd_ingest(ctx: StageContext, chunk_target: Optional[int] = None) -> Path:
    """Chunk the corpus into ingest/chunks_<target>.jsonl."""
    config = ctx.config
    corpus_path = ctx.input_file(config.corpus_path, "corpus_path")
    target = chunk_target or config.chunk_target
    out = ctx.store.path("ingest", f"chunks_{target}.jsonl")
    stage = f"ingest:chunks_{target}"
    inputs_hash = payload_sha256(
        {"corpus": file_sha256(corpus_path), "tokenizer": config.tokenizer.model_dump(), "target": target}
    )
    if ctx.up_to_date(stage, inputs_hash, [out]):
        print(f"ingest: chunks_{target} up to date")
        return out

    documents = load_corpus(corpus_path)
    chunks = chunk_corpus(documents, target, config.tokenizer)
    write_jsonl(out, (chunk.to_record() for chunk in chunks))
    ctx.record(stage, inputs_hash, [out])
    print(f"ingest: {len(documents)} documents -> {len(chunks)} chunks (target {target} tokens)")
    return out


async def cmd_speculate(ctx: StageContext, num_kbs: Optional[int] = None) -> List[Path]:
    """Speculate questions for every chunk in runs 1..S."""
    config = ctx.config
    if not config.speculation:
        print("speculate: skipped (fact-only extraction)")
        return []
    chunks_path = ctx.require(ctx.store.path("ingest", f"chunks_{config.chunk_target}.jsonl"), "ingest")
    chunks = load_chunks(chunks_path)
    backend = make_backend(config)
    template_id = PROFILE_TEMPLATES[config.dataset_profile]["speculate"]

    outputs = []
    for run in range(1, (num_kbs or config.num_kbs) + 1):
        out = ctx.store.path("speculate", f"run_{run}.jsonl")
        outputs.append(out)
        stage = f"speculate:run_{run}"
        inputs_hash = payload_sha256(
            {
                "chunks": file_sha256(chunks_path),
                "template": template_id,
                "backend": config.backend_fingerprint(),
                "run": run,
            }
        )
        if ctx.up_to_date(stage, inputs_hash, [out]):
            print(f"speculate: run {run} up to date")
            continue

        transcript = TranscriptLog() if config.log_transcripts else None

        async def job(chunk: Chunk, run: int = run, transcript: Optional[TranscriptLog] = transcript) -> List[dict]:
            questions = await speculate_questions(
                chunk, backend, template_id, run, config.template_version, transcript
            )
            return [q.to_record() for q in questions]

        records, completed, failed = await run_chunk_jobs(ctx, "speculate", run, chunks, inputs_hash, job)
        write_jsonl(out, records)
        if transcript is not None:
            transcript.write(ctx.store.path("transcripts", f"speculate_run_{run}.jsonl"))
        ctx.record(stage, inputs_hash, [out], completed, failed)

        per_chunk = defaultdict(int)
        for record in records:
            per_chunk[(record["doc_id"], record["chunk_index"])] += 1
        most = max(per_chunk.values(), default=0)
        print(
            f"speculate: run {run}: {len(records)} questions over {len(chunks)} chunks "
            f"(max {most} per chunk), {len(failed)} failed"
        )
    return outputs


async def cmd_extract(ctx: StageContext, num_kbs: Optional[int] = None) -> List[Path]:
    """Extract EDPs per chunk for runs 1..S, with or without speculated questions."""
    config = ctx.config
    chunks_path = ctx.require(ctx.store.path("ingest", f"chunks_{config.chunk_target}.jsonl"), "ingest")
    chunks = load_chunks(chunks_path)
    backend = make_backend(config)
    stage_name = "extract" if config.speculation else "extract_fact_only"
    template_key = "extract" if config.speculation else "extract_fact_only"
    template_id = PROFILE_TEMPLATES[config.dataset_profile][template_key]

    outputs = []
    for run in range(1, (num_kbs or config.num_kbs) + 1):
        questions_by_chunk = None
        questions_hash = None
        if config.speculation:
            questions_path = ctx.require(ctx.store.path("speculate", f"run_{run}.jsonl"), "speculate")
            questions_by_chunk = load_questions(questions_path)
            questions_hash = file_sha256(questions_path)

        out = ctx.store.path(stage_name, f"run_{run}.jsonl")
        outputs.append(out)
        stage = f"{stage_name}:run_{run}"
        inputs_hash = payload_sha256(
            {
                "chunks": file_sha256(chunks_path),
                "questions": questions_hash,
                "template": template_id,
                "backend": config.backend_fingerprint(),
                "run": run,
            }
        )
        if ctx.up_to_date(stage, inputs_hash, [out]):
            print(f"{stage_name}: run {run} up to date")
            continue

        transcript = TranscriptLog() if config.log_transcripts else None
        malformed_total = [0]

        async def job(
            chunk: Chunk,
            run: int = run,
            questions_by_chunk=questions_by_chunk,
            transcript: Optional[TranscriptLog] = transcript,
            malformed_total: List[int] = malformed_total,
        ) -> List[dict]:
            questions = None
            if questions_by_chunk is not None:
                questions = questions_by_chunk.get((chunk.doc_id, chunk.chunk_index), [])
                # no speculated questions: nothing to extract for this chunk
                if not questions:
                    return []
            edps, malformed = await extract_edps(
                chunk, questions, backend, template_id, run, config.template_version, transcript
            )
            malformed_total[0] += malformed
            return [edp.to_record() for edp in edps]

        records, completed, failed = await run_chunk_jobs(ctx, stage_name, run, chunks, inputs_hash, job)
        write_jsonl(out, records)
        if transcript is not None:
            transcript.write(ctx.store.path("transcripts", f"{stage_name}_run_{run}.jsonl"))
        ctx.record(stage, inputs_hash, [out], completed, failed)
        print(
            f"{stage_name}: run {run}: {len(records)} EDPs, "
            f"{malformed_total[0]} malformed tuples skipped, {len(failed)} failed chunks"
        )
    return outputs


async def cmd_merge(ctx: StageContext, num_kbs: Optional[int] = None) -> Path:
    """Union the per-run KBs 1..S into merge/<label>.jsonl."""
    config = ctx.config
    num_kbs = num_kbs or config.num_kbs
    stage_name = "extract" if config.speculation else "extract_fact_only"
    run_paths = [
        ctx.require(ctx.store.path(stage_name, f"run_{run}.jsonl"), "extract")
        for run in range(1, num_kbs + 1)
    ]
    label = config.edp_label(num_kbs)
    out = ctx.store.path("merge", f"{label}.jsonl")
    stage = f"merge:{label}"
    inputs_hash = payload_sha256({"runs": [file_sha256(p) for p in run_paths]})
    if ctx.up_to_date(stage, inputs_hash, [out, meta_path(out)]):
        print(f"merge: {label} up to date")
        return out

    run_kbs = [build_run_kb(load_edps(path), run) for run, path in enumerate(run_paths, 1)]
    final = merge_kbs(run_kbs)
    save_kb(final, out)
    ctx.record(stage, inputs_hash, [out, meta_path(out)])
    sizes = ", ".join(str(len(kb)) for kb in run_kbs)
    print(f"merge: {label}: run sizes [{sizes}] -> {len(final)} EDPs")
    return out


def build_units(ctx: StageContext, label: str) -> Tuple[List[RetrievalUnit], List[Path]]:
    """
    Retrieval units for an index label: edp[_factonly]_s<S>, chunk<t>, or external.

    Returns:
        Tuple[List[RetrievalUnit], List[Path]]: The units and the files they came from
    """
    tokenizer = ctx.config.tokenizer
    chunk_match = CHUNK_LABEL.match(label)
    if chunk_match:
        path = ctx.require(ctx.store.path("ingest", f"chunks_{chunk_match.group(1)}.jsonl"), "ingest")
        return chunks_to_units(load_chunks(path), tokenizer), [path]
    if EDP_LABEL.match(label):
        path = ctx.require(ctx.store.path("merge", f"{label}.jsonl"), "merge")
        return edps_to_units(load_kb(path), tokenizer), [path]
    if label == "external":
        path = ctx.input_file(ctx.config.external_units_path, "external_units_path")
        return load_external_units(path, tokenizer), [path]
    raise ConfigurationError(f"Unknown index label: {label}")


async def cmd_index(ctx: StageContext, label: Optional[str] = None) -> Path:
    """Build and persist BM25 indexes over the label's units."""
    config = ctx.config
    label = label or config.default_label()
    units, sources = build_units(ctx, label)
    index_out = ctx.store.path("index", f"{label}.json")
    units_out = ctx.store.path("index", f"{label}_units.jsonl")
    stage = f"index:{label}"
    inputs_hash = payload_sha256(
        {
            "sources": [file_sha256(p) for p in sources],
            "k1": config.bm25_k1,
            "b": config.bm25_b,
            "scope": config.retrieval_scope,
            "tokenizer": config.tokenizer.model_dump(),
        }
    )
    if ctx.up_to_date(stage, inputs_hash, [index_out, units_out]):
        print(f"index: {label} up to date")
        return index_out
    if not units:
        raise ValueError(f"No retrieval units for {label}")

    indexes = build_scoped_indexes(units, config.retrieval_scope, config.bm25_k1, config.bm25_b)
    save_units(units, units_out)
    save_scoped_indexes(indexes, config.retrieval_scope, index_out)
    ctx.record(stage, inputs_hash, [index_out, units_out])
    print(f"index: {label}: {len(units)} units in {len(indexes)} {config.retrieval_scope} index(es)")
    return index_out


def _tasks(ctx: StageContext) -> Tuple[Path, List[QaTask]]:
    path = ctx.input_file(ctx.config.tasks_path, "tasks_path")
    return path, sorted(load_tasks(path), key=lambda t: t.task_id)


async def cmd_retrieve(ctx: StageContext, label: Optional[str] = None, budgets: Optional[List[int]] = None) -> List[Path]:
    """Select each task's context under every budget."""
    config = ctx.config
    label = label or config.default_label()
    budgets = budgets or config.budgets
    index_path = ctx.require(ctx.store.path("index", f"{label}.json"), "index")
    units_path = ctx.require(ctx.store.path("index", f"{label}_units.jsonl"), "index")
    tasks_path, tasks = _tasks(ctx)

    scope, indexes = load_scoped_indexes(index_path)
    units_by_key: Dict[str, List[RetrievalUnit]] = defaultdict(list)
    for unit in load_units(units_path):
        units_by_key[index_key(scope, unit.doc_id)].append(unit)

    outputs = []
    for budget in budgets:
        out = ctx.store.path("retrieve", label, f"b{budget}.jsonl")
        outputs.append(out)
        stage = f"retrieve:{label}:b{budget}"
        inputs_hash = payload_sha256(
            {
                "index": file_sha256(index_path),
                "units": file_sha256(units_path),
                "tasks": file_sha256(tasks_path),
                "budget": budget,
            }
        )
        if ctx.up_to_date(stage, inputs_hash, [out]):
            continue

        records = []
        for task in tasks:
            key = index_key(scope, task.doc_id)
            index = indexes.get(key)
            if index is None:
                ranked = RankedContext(query=task.question, budget_b=budget)
            else:
                ranked = retrieve_under_budget(index, units_by_key[key], task.question, budget)
            records.append(
                {
                    "task_id": task.task_id,
                    "doc_id": task.doc_id,
                    "budget": budget,
                    "used_tokens": ranked.used_tokens,
                    "selected": ranked.selected,
                    "context": render_context(ranked, units_by_key.get(key, [])),
                }
            )
        write_jsonl(out, records)
        ctx.record(stage, inputs_hash, [out])
    print(f"retrieve: {label}: {len(tasks)} tasks x {len(budgets)} budgets")
    return outputs


async def answer_task(
    task: QaTask,
    retrieved: dict,
    backend: LlmBackend,
    config: RunConfig,
    transcript: Optional[TranscriptLog],
) -> Prediction:
    """Answer one task from its retrieved context under the profile's prompts."""
    templates = PROFILE_TEMPLATES[config.dataset_profile]
    seed = config.seed or 0
    common = {
        "task_id": task.task_id,
        "budget": retrieved["budget"],
        "used_tokens": retrieved["used_tokens"],
        "context_unit_ids": retrieved["selected"],
    }
    if config.dataset_profile == "quality":
        completion = await answer_question(
            task.question, retrieved["context"], backend, templates["answer"],
            options=task.options, seed=seed, version=config.template_version, transcript=transcript,
        )
        option_index = parse_option_index(completion)
        return Prediction(answer=completion, option_index=option_index, invalid_option=option_index is None, **common)

    answer = await answer_question(
        task.question, retrieved["context"], backend, templates["answer"],
        seed=seed, version=config.template_version, transcript=transcript,
    )
    if "compress" not in templates:
        return Prediction(answer=answer, **common)
    compressed = await compress_answer(
        task.question, answer, backend, templates["compress"],
        seed=seed, version=config.template_version, transcript=transcript,
    )
    return Prediction(answer=compressed, round1_answer=answer, **common)


async def cmd_answer(ctx: StageContext, label: Optional[str] = None, budgets: Optional[List[int]] = None) -> List[Path]:
    """Answer every task at every budget with the configured backend."""
    config = ctx.config
    label = label or config.default_label()
    budgets = budgets or config.budgets
    tasks_path, tasks = _tasks(ctx)
    tasks_by_id = {task.task_id: task for task in tasks}
    if config.dataset_profile == "quality":
        not_mc = [task.task_id for task in tasks if not task.is_multiple_choice]
        if not_mc:
            raise ConfigurationError(f"quality profile needs options and gold_index; missing for {not_mc[:5]}")
    backend = make_backend(config)

    outputs = []
    for budget in budgets:
        retrieve_path = ctx.require(ctx.store.path("retrieve", label, f"b{budget}.jsonl"), "retrieve")
        out = ctx.store.path("answer", label, f"b{budget}.jsonl")
        outputs.append(out)
        stage = f"answer:{label}:b{budget}"
        inputs_hash = payload_sha256(
            {
                "retrieve": file_sha256(retrieve_path),
                "tasks": file_sha256(tasks_path),
                "backend": config.backend_fingerprint(),
                "profile": config.dataset_profile,
            }
        )
        if ctx.up_to_date(stage, inputs_hash, [out]):
            continue

        transcript = TranscriptLog() if config.log_transcripts else None
        semaphore = asyncio.Semaphore(config.jobs)
        failed: List[str] = []

        async def one(retrieved: dict, transcript: Optional[TranscriptLog] = transcript, failed: List[str] = failed) -> Prediction:
            task = tasks_by_id[retrieved["task_id"]]
            async with semaphore:
                try:
                    return await answer_task(task, retrieved, backend, config, transcript)
                except BackendError as e:
                    failed.append(task.task_id)
                    await log_error(
                        error=e,
                        location="cli/pipeline.py - cmd_answer",
                        additional_info={"task_id": task.task_id, "budget": retrieved["budget"]},
                    )
                    return Prediction(
                        task_id=task.task_id,
                        budget=retrieved["budget"],
                        invalid_option=task.is_multiple_choice,
                        used_tokens=retrieved["used_tokens"],
                        context_unit_ids=retrieved["selected"],
                    )

        retrieved_records = [record for _, record in iter_jsonl(retrieve_path)]
        predictions = await asyncio.gather(*(one(record) for record in retrieved_records))
        write_jsonl(out, (p.model_dump() for p in sorted(predictions, key=lambda p: p.task_id)))
        if transcript is not None:
            transcript.write(ctx.store.path("transcripts", f"answer_{label}_b{budget}.jsonl"))
        ctx.record(stage, inputs_hash, [out], failed=sorted(failed))
        if failed:
            print(f"answer: {label} b{budget}: {len(failed)} tasks failed")
    print(f"answer: {label}: {len(tasks)} tasks x {len(budgets)} budgets")
    return outputs


async def cmd_eval(ctx: StageContext, label: Optional[str] = None, budgets: Optional[List[int]] = None) -> List[Path]:
    """Score predictions with the profile's metrics."""
    config = ctx.config
    label = label or config.default_label()
    budgets = budgets or config.budgets
    tasks_path, tasks = _tasks(ctx)

    outputs = []
    for budget in budgets:
        answer_path = ctx.require(ctx.store.path("answer", label, f"b{budget}.jsonl"), "answer")
        out = ctx.store.path("eval", label, f"b{budget}.json")
        outputs.append(out)
        stage = f"eval:{label}:b{budget}"
        inputs_hash = payload_sha256(
            {
                "answer": file_sha256(answer_path),
                "tasks": file_sha256(tasks_path),
                "profile": config.dataset_profile,
                "bleu_smoothing": config.bleu_smoothing,
            }
        )
        if ctx.up_to_date(stage, inputs_hash, [out]):
            continue

        predictions = [Prediction(**record) for _, record in iter_jsonl(answer_path)]
        reports = evaluate_predictions(tasks, predictions, config.dataset_profile, config.bleu_smoothing)
        write_json(
            out,
            {
                "label": label,
                "budget": budget,
                "profile": config.dataset_profile,
                "notes": EVAL_NOTES,
                "reports": {name: report.model_dump() for name, report in reports.items()},
            },
        )
        ctx.record(stage, inputs_hash, [out])
        summary = ", ".join(f"{name}={report.aggregate:.4f}" for name, report in reports.items())
        print(f"eval: {label} b{budget}: {summary}")
    return outputs


async def cmd_curve(ctx: StageContext, label: Optional[str] = None, budgets: Optional[List[int]] = None) -> List[Path]:
    """One context-efficiency curve (and its frontier) per metric."""
    config = ctx.config
    label = label or config.default_label()
    budgets = budgets or config.budgets
    eval_paths = [ctx.require(ctx.store.path("eval", label, f"b{b}.json"), "eval") for b in budgets]
    metrics = metrics_for_profile(config.dataset_profile)

    outputs = []
    for metric in metrics:
        outputs.append(ctx.store.path("curve", f"{label}_{metric}.csv"))
        outputs.append(ctx.store.path("curve", f"{label}_{metric}_frontier.csv"))
    stage = f"curve:{label}"
    inputs_hash = payload_sha256({"evals": [file_sha256(p) for p in eval_paths], "budgets": budgets})
    if ctx.up_to_date(stage, inputs_hash, outputs):
        print(f"curve: {label} up to date")
        return outputs

    payloads = [read_json(path) for path in eval_paths]
    for metric in metrics:
        runs = [(budget, MetricReport(**payload["reports"][metric])) for budget, payload in zip(budgets, payloads)]
        curve = build_curve(runs, label=label)
        write_curve_csv(curve, ctx.store.path("curve", f"{label}_{metric}.csv"))
        write_frontier_csv(curve, ctx.store.path("curve", f"{label}_{metric}_frontier.csv"))
    ctx.record(stage, inputs_hash, outputs)
    print(f"curve: {label}: {len(metrics)} metric(s) over budgets {budgets}")
    return outputs


async def evaluate_label(ctx: StageContext, label: str) -> List[Path]:
    """retrieve -> answer -> eval -> curve for one index label."""
    await cmd_retrieve(ctx, label)
    await cmd_answer(ctx, label)
    await cmd_eval(ctx, label)
    return await cmd_curve(ctx, label)


async def cmd_simq(ctx: StageContext) -> Path:
    """Bucket speculated questions by similarity to the real task questions."""
    config = ctx.config
    spec_paths = [
        ctx.require(ctx.store.path("speculate", f"run_{run}.jsonl"), "speculate")
        for run in range(1, config.num_kbs + 1)
    ]
    tasks_path, tasks = _tasks(ctx)
    out = ctx.store.path("simq", "report.json")
    table_out = ctx.store.path("simq", "report.txt")
    if config.vectors_path:
        vectors_path = ctx.input_file(config.vectors_path, "vectors_path")
        provider = FileVectorProvider(vectors_path)
        provider_source = file_sha256(vectors_path)
    else:
        provider = HttpEmbeddingProvider()
        provider_source = provider.url
    stage = "simq"
    inputs_hash = payload_sha256(
        {"speculated": [file_sha256(p) for p in spec_paths], "tasks": file_sha256(tasks_path), "vectors": provider_source}
    )
    if ctx.up_to_date(stage, inputs_hash, [out, table_out]):
        print("simq: up to date")
        return out

    real_by_doc: Dict[str, List[str]] = defaultdict(list)
    for task in tasks:
        if task.question not in real_by_doc[task.doc_id]:
            real_by_doc[task.doc_id].append(task.question)
    spec_by_doc: Dict[str, Dict[str, None]] = defaultdict(dict)
    for path in spec_paths:
        for questions in load_questions(path).values():
            for question in questions:
                spec_by_doc[question.doc_id].setdefault(question.question_text, None)

    pairs = []
    for doc_id in sorted(spec_by_doc):
        if doc_id in real_by_doc:
            pairs.extend(await match_questions(real_by_doc[doc_id], list(spec_by_doc[doc_id]), provider))
    report = bucket_report(pairs)
    write_json(out, report.model_dump(mode="json"))
    write_text(table_out, format_report_table(report))
    ctx.record(stage, inputs_hash, [out, table_out])
    print(
        f"simq: {report.pair_count} speculated questions: close {report.close_fraction:.2%}, "
        f"topic {report.topic_fraction:.2%}"
    )
    return out


async def cmd_run(ctx: StageContext) -> List[Path]:
    """Full pipeline for the configured unit."""
    config = ctx.config
    if config.unit == "edp":
        await cmd_ingest(ctx)
        await cmd_speculate(ctx)
        await cmd_extract(ctx)
        await cmd_merge(ctx)
    elif config.unit == "chunk":
        await cmd_ingest(ctx, config.baseline_chunk_target)
    label = config.default_label()
    await cmd_index(ctx, label)
    return await evaluate_label(ctx, label)


async def cmd_sweep(ctx: StageContext) -> Path:
    """Chunk-length baselines over chunk_sweep, and KB augmentation over num_kbs_sweep."""
    config = ctx.config
    labels = []
    for target in config.chunk_sweep:
        await cmd_ingest(ctx, target)
        label = f"chunk{target}"
        await cmd_index(ctx, label)
        await evaluate_label(ctx, label)
        labels.append(label)

    max_runs = max(config.num_kbs_sweep)
    await cmd_ingest(ctx)
    await cmd_speculate(ctx, max_runs)
    await cmd_extract(ctx, max_runs)
    kb_sizes = {}
    for num_kbs in config.num_kbs_sweep:
        kb_path = await cmd_merge(ctx, num_kbs)
        label = config.edp_label(num_kbs)
        kb_sizes[str(num_kbs)] = read_json(meta_path(kb_path))["size"]
        await cmd_index(ctx, label)
        await evaluate_label(ctx, label)
        labels.append(label)

    out = ctx.store.path("sweep", "summary.json")
    write_json(out, {"labels": labels, "kb_sizes": kb_sizes, "budgets": config.budgets})
    print(f"sweep: {len(labels)} curves; KB sizes by S: {kb_sizes}")
    return out
