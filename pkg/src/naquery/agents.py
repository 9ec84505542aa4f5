"""Four-role agent loop: design -> search -> evaluate -> code, with
feedback rounds bounded by the search budget, over any ChatBackend.

Deterministic profiling and feasibility verdicts always come from the
profiler; chat responses only ever add rankings and commentary on top.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import codegen, querygen
from .archir import (ArchitectureIR, SearchSpace, default_search_space,
                     parse_candidate_configs, parse_search_space, validate)
from .backends import (ChatBackend, ChatResponse, multimodal_message,
                       text_message)
from .dataset import TimeSeriesDataset, load_dataset, representative_series
from .errors import (DesignFailed, EmptyRound, NaqueryError, NoCandidates,
                     RewriteFailed)
from .profiler import (ConstraintVerdict, DeviceSpec, ProfileReport,
                       check_constraints, lookup_device, profile)
from .querygen import (MultiObjectiveQuery, RewrittenQuery,
                       build_rewrite_prompt, parse_rewritten_query,
                       passthrough_query, render_group_image,
                       serialize_numeric)

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 3            # search-evaluate rounds
DEFAULT_CANDIDATES = 5        # architectures requested per round
ALL_AGENTS = ("design", "search", "eval", "code")

# ledger pricing: repository defaults, USD per million tokens
DEFAULT_PRICE_IN_PER_MTOK = 2.5
DEFAULT_PRICE_OUT_PER_MTOK = 10.0


def system_message(role: str) -> str:
    """Verbatim system-message asset for one agent role."""
    return resources.files("naquery.assets.prompts").joinpath(
        f"{role}.txt").read_text(encoding="utf-8")


@dataclass
class RunConfig:
    data_dir: str
    dataset_name: str
    user_prompt: str
    backend: ChatBackend
    out_dir: str
    device_name: str = "default"
    ram: int | None = None
    flash: int | None = None
    latency_ms: float | None = None
    budget: int = DEFAULT_BUDGET
    candidates: int = DEFAULT_CANDIDATES
    seed: int = 0
    quant: str = "int8"
    fold_bn: bool = False
    no_rewrite: bool = False
    agents: tuple[str, ...] = ALL_AGENTS
    images_all_stages: bool = False
    code_agent_writes: bool = False
    manager_verify: bool = False
    fixed_length: int = querygen.DEFAULT_FIXED_LENGTH
    n_bins: int = 4
    price_in_per_mtok: float = DEFAULT_PRICE_IN_PER_MTOK
    price_out_per_mtok: float = DEFAULT_PRICE_OUT_PER_MTOK

    def __post_init__(self):
        if self.budget < 1 or self.candidates < 1:
            raise ValueError("budget and candidates must be >= 1")
        unknown = set(self.agents) - set(ALL_AGENTS)
        if unknown:
            raise ValueError(f"unknown agents {sorted(unknown)}")


@dataclass
class Candidate:
    arch: ArchitectureIR
    source_round: int
    rationale: str = ""
    profile: ProfileReport | None = None
    verdict: ConstraintVerdict | None = None
    predicted_performance: str | None = None

    @property
    def id(self) -> str:
        return self.arch.content_hash()

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "source_round": self.source_round,
            "rationale": self.rationale,
            "arch": self.arch.to_dict(),
        }
        if self.profile is not None:
            out["profile"] = self.profile.to_dict()
        if self.verdict is not None:
            out["verdict"] = self.verdict.to_dict()
        if self.predicted_performance is not None:
            out["predicted_performance"] = self.predicted_performance
        return out


@dataclass
class SearchState:
    query: MultiObjectiveQuery
    space: SearchSpace | None = None
    rounds_used: int = 0
    budget: int = DEFAULT_BUDGET
    candidates_per_round: int = DEFAULT_CANDIDATES
    history: list[Candidate] = field(default_factory=list)
    cost_ledger: list[dict] = field(default_factory=list)
    selected: Candidate | None = None
    best_effort: bool = False
    rejections: list[str] = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    eval_pick: str | None = None  # candidate id favored by the eval agent
    images_all_stages: bool = False
    transcripts_dir: Path | None = None
    price_in: float = DEFAULT_PRICE_IN_PER_MTOK
    price_out: float = DEFAULT_PRICE_OUT_PER_MTOK
    _call_counter: int = 0

    def record(self, stage: str, messages: list[dict],
               response: ChatResponse) -> None:
        usd = (response.tokens_in * self.price_in
               + response.tokens_out * self.price_out) / 1e6
        self.cost_ledger.append({
            "stage": stage,
            "tokens_in": response.tokens_in,
            "tokens_out": response.tokens_out,
            "wall_ms": response.wall_ms,
            "usd_estimate": round(usd, 6),
        })
        if self.transcripts_dir is not None:
            self.transcripts_dir.mkdir(parents=True, exist_ok=True)
            path = self.transcripts_dir / \
                f"{self._call_counter:03d}_{stage}.json"
            path.write_text(json.dumps({
                "stage": stage,
                "messages": [_transcript_message(m) for m in messages],
                "response": response.content,
            }, indent=2, sort_keys=True), encoding="utf-8")
        self._call_counter += 1

    def calls_for(self, stage: str) -> int:
        return sum(1 for e in self.cost_ledger if e["stage"] == stage)


def _transcript_message(msg: dict) -> dict:
    content = msg["content"]
    if isinstance(content, str):
        return msg
    parts = []
    for part in content:
        if part.get("type") == "text":
            parts.append(part)
        else:
            parts.append({"type": "image",
                          "group": part.get("naquery_group", "")})
    return {"role": msg["role"], "content": parts}


def _chat(backend: ChatBackend, state: SearchState, stage: str,
          messages: list[dict]) -> ChatResponse:
    response = backend.complete(messages, stage)
    state.record(stage, messages, response)
    return response


# --- rewrite stage -------------------------------------------------------

def run_rewrite_stage(backend: ChatBackend, state: SearchState,
                      user_prompt: str, ds: TimeSeriesDataset,
                      numeric_csv: str,
                      images: list[tuple[str, bytes]]) -> RewrittenQuery:
    """One rewrite call (images attached), one re-ask on parse failure."""
    prompt = build_rewrite_prompt(user_prompt, ds, numeric_csv)
    # the rewrite instruction is self-contained; no role persona needed
    messages = [multimodal_message("user", prompt, images)]
    last_error = None
    for attempt in range(2):
        response = _chat(backend, state, "rewrite", messages)
        try:
            return parse_rewritten_query(response.content)
        except NaqueryError as exc:
            last_error = exc
            messages = messages + [
                text_message("assistant", response.content),
                text_message("user",
                             "Your previous response could not be parsed "
                             f"({exc}). Please respond again with exactly "
                             "the JSON object requested above."),
            ]
    raise RewriteFailed(f"rewrite stage failed twice: {last_error}")


# --- design stage --------------------------------------------------------

def _design_prompt(query: MultiObjectiveQuery) -> str:
    return (
        "Here is the organized multi-objective query describing the task, "
        "the dataset, and the hardware constraints:\n\n"
        f"{json.dumps(query.to_dict(), indent=2)}\n\n"
        "Design a neural network search space for this task. Respond with "
        "a Python dictionary in a fenced ```python block mapping dimension "
        "names (e.g. layer_type, Conv1D_filters, Conv1D_kernel_size, "
        "LSTM_units, Dense_units, activation, dropout_rate, pooling_type, "
        "pool_size, strides, batch_normalization) to lists of allowed "
        "values."
    )


def _user_message(state: SearchState, text: str) -> dict:
    """Plain text by default; image parts attached when the image-modality
    variant is enabled for every stage."""
    if state.images_all_stages and state.query.images:
        return multimodal_message("user", text, state.query.images)
    return text_message("user", text)


def run_design_stage(backend: ChatBackend, state: SearchState) -> SearchSpace:
    """One design call, one re-ask, then the shipped default space."""
    messages = [
        text_message("system", system_message("design")),
        _user_message(state, _design_prompt(state.query)),
    ]
    last_error = None
    for attempt in range(2):
        response = _chat(backend, state, "design", messages)
        try:
            return parse_search_space(response.content)
        except NaqueryError as exc:
            last_error = exc
            messages = messages + [
                text_message("assistant", response.content),
                text_message("user",
                             "No parsable search-space dictionary was "
                             "found. Respond with only a fenced ```python "
                             "block containing the dictionary."),
            ]
    logger.warning("design stage failed twice (%s); using default space",
                   last_error)
    state.flags["fallback_space_used"] = True
    return default_search_space()


# --- search rounds -------------------------------------------------------

def _feedback_text(state: SearchState) -> str:
    """Fixed-format evaluation feedback passed to the next search round."""
    lines = []
    for cand in state.history:
        if cand.verdict is None:
            continue
        if cand.verdict.feasible:
            lines.append(f"- candidate {cand.id}: feasible")
        else:
            details = "; ".join(
                f"{metric} {actual:g} exceeds limit {limit:g}"
                for metric, limit, actual in cand.verdict.violations)
            lines.append(f"- candidate {cand.id}: INFEASIBLE ({details})")
    for reason in state.rejections:
        lines.append(f"- rejected config: {reason}")
    if not lines:
        return ""
    return ("Feedback on previously proposed candidates:\n"
            + "\n".join(lines) + "\n\n")


def _search_prompt(state: SearchState, n: int) -> str:
    space = state.space.dimensions if state.space else {}
    return (
        f"{_feedback_text(state)}"
        "Multi-objective query:\n"
        f"{json.dumps(state.query.to_dict(), indent=2)}\n\n"
        "Search space:\n"
        f"{json.dumps(space, indent=2)}\n\n"
        f"Propose {n} distinct model configurations drawn from this search "
        "space. Give each configuration as a separate fenced ```python "
        "block containing a dictionary with a \"layer_sequence\" list, one "
        "entry per layer with its hyperparameters. End each network with "
        "the task-appropriate Dense output layer."
    )


def run_search_round(backend: ChatBackend, state: SearchState,
                     input_shape: tuple[int, int], output_units: int,
                     task: str) -> list[Candidate]:
    """One search call -> up to C validated, deduplicated candidates.

    An unparseable round still consumes budget (EmptyRound).
    """
    if state.rounds_used >= state.budget:
        raise NoCandidates("search budget exhausted")
    messages = [
        text_message("system", system_message("search")),
        _user_message(state,
                      _search_prompt(state, state.candidates_per_round)),
    ]
    response = _chat(backend, state, "search", messages)
    state.rounds_used += 1
    parsed, rejected = parse_candidate_configs(
        response.content, input_shape, output_units, task)
    state.rejections.extend(rejected)

    seen = {cand.id for cand in state.history}
    accepted: list[Candidate] = []
    for arch in parsed:
        violations = validate(arch)
        if violations:
            state.rejections.append(
                f"round {state.rounds_used} config dropped: "
                + "; ".join(violations))
            continue
        if arch.content_hash() in seen:
            state.rejections.append(
                f"round {state.rounds_used} duplicate of "
                f"{arch.content_hash()} dropped")
            continue
        if len(accepted) >= state.candidates_per_round:
            break
        seen.add(arch.content_hash())
        accepted.append(Candidate(arch=arch, source_round=state.rounds_used,
                                  rationale=f"search round "
                                            f"{state.rounds_used}"))
    if not parsed and not accepted:
        raise EmptyRound(
            f"round {state.rounds_used}: no candidate configs parsed")
    state.history.extend(accepted)
    return accepted


# --- evaluation stage ----------------------------------------------------

_PICK_RE = re.compile(r"[Mm]odel\s+[Cc]onfiguration\s*#?\s*(\d+)")


def run_eval_stage(backend: ChatBackend, state: SearchState,
                   candidates: list[Candidate], dev: DeviceSpec,
                   quant: str = "int8", fold_bn: bool = False,
                   use_llm: bool = True) -> list[Candidate]:
    """Deterministic profiling of every candidate, then an optional chat
    call for predicted performance and ranking. The chat response never
    overrides a deterministic verdict."""
    for cand in candidates:
        cand.profile = profile(cand.arch, dev, quant=quant, fold_bn=fold_bn)
        cand.verdict = check_constraints(cand.profile, state.query.model, dev)
    if not use_llm or not candidates:
        return candidates
    profile_blocks = []
    for i, cand in enumerate(candidates, start=1):
        profile_blocks.append(
            f"Model Configuration #{i} (id {cand.id}):\n"
            + json.dumps({"arch": cand.arch.to_dict(),
                          "profile": cand.profile.to_dict(),
                          "verdict": cand.verdict.to_dict()},
                         indent=2))
    messages = [
        text_message("system", system_message("eval")),
        _user_message(state,
                      "Multi-objective query:\n"
                     f"{json.dumps(state.query.to_dict(), indent=2)}\n\n"
                     "Candidate models with deterministic complexity "
                     "profiles:\n\n" + "\n\n".join(profile_blocks) + "\n\n"
                     "Estimate the expected task performance of each "
                     "candidate and state which single configuration you "
                     "recommend, referring to it as 'Model Configuration "
                     "#<number>'."),
    ]
    try:
        response = _chat(backend, state, "eval", messages)
    except NaqueryError as exc:
        logger.warning("eval chat call failed (%s); deterministic ranking "
                       "only", exc)
        state.flags["eval_llm_failed"] = True
        return candidates
    match = _PICK_RE.search(response.content)
    if match:
        idx = int(match.group(1)) - 1
        if 0 <= idx < len(candidates):
            candidates[idx].predicted_performance = response.content
            state.eval_pick = candidates[idx].id
    return candidates


# --- final selection -----------------------------------------------------

def _rank_key(cand: Candidate):
    return (len(cand.verdict.violations) if cand.verdict else 1 << 30,
            cand.profile.latency_ms if cand.profile else float("inf"),
            cand.profile.flash_bytes if cand.profile else 1 << 62,
            cand.id)


def select_final(state: SearchState) -> Candidate:
    """Eval-agent pick when feasible, otherwise the deterministic total
    order: fewest violations, lowest latency, lowest flash, lowest hash."""
    if not state.history:
        raise NoCandidates("no candidates after budget")
    feasible = [c for c in state.history
                if c.verdict is not None and c.verdict.feasible]
    if state.eval_pick is not None:
        for cand in feasible:
            if cand.id == state.eval_pick:
                state.selected = cand
                return cand
    pool = feasible
    if not pool:
        state.best_effort = True
        pool = [c for c in state.history if c.verdict is not None]
        if not pool:
            pool = state.history
    state.selected = min(pool, key=_rank_key)
    return state.selected


# --- code stage ----------------------------------------------------------

def run_code_stage_zero_shot(backend: ChatBackend, state: SearchState,
                             ds: TimeSeriesDataset,
                             template: codegen.SkeletonTemplate) -> str:
    """Single code-generation call: the agent completes get_model inside
    the frozen skeleton."""
    prompt = system_message("zero_shot") \
        .replace("{task}", ds.task) \
        .replace("{dataset_name}", ds.name) \
        .replace("{task_description}", state.query.task_description) \
        .replace("{script}", template.render())
    messages = [
        text_message("system", system_message("code")),
        text_message("user", prompt),
    ]
    last_error = None
    for attempt in range(2):
        response = _chat(backend, state, "code", messages)
        try:
            return codegen.extract_script(response.content, template)
        except NaqueryError as exc:
            last_error = exc
            messages = messages + [
                text_message("assistant", response.content),
                text_message("user",
                             f"The script was rejected ({exc}). Return the "
                             "full skeleton unchanged except for the "
                             "completed get_model() function, inside a "
                             "```python fence."),
            ]
    raise DesignFailed(f"code stage failed twice: {last_error}")


# --- full pipeline -------------------------------------------------------

def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label) or "group"


def run_pipeline(config: RunConfig) -> dict:
    """End-to-end run; returns the report dict and writes the run
    directory (report.json, emitted script, images, transcripts)."""
    started = time.monotonic()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ds = load_dataset(config.data_dir, config.dataset_name)
    reps = representative_series(ds, n_bins=config.n_bins)
    numeric_csv = serialize_numeric(reps, fixed_length=config.fixed_length)
    images = [(rep.group_label, render_group_image(rep)) for rep in reps]
    images_dir = out_dir / "images"
    images_dir.mkdir(exist_ok=True)
    for label, png in images:
        (images_dir / f"{_safe_name(label)}.png").write_bytes(png)

    dev = lookup_device(config.device_name)
    if config.ram or config.flash:
        dev = DeviceSpec(name=dev.name, clock_hz=dev.clock_hz,
                         flash_bytes=config.flash or dev.flash_bytes,
                         ram_bytes=config.ram or dev.ram_bytes,
                         macs_per_cycle=dev.macs_per_cycle,
                         joules_per_mac=dev.joules_per_mac)

    placeholder = MultiObjectiveQuery(
        task_description=config.user_prompt,
        data=querygen.DataAspect(), model=querygen.ModelAspect(),
        numeric_csv=numeric_csv, images=images,
        raw_user_prompt=config.user_prompt)
    state = SearchState(query=placeholder, budget=config.budget,
                        candidates_per_round=config.candidates,
                        transcripts_dir=out_dir / "transcripts",
                        images_all_stages=config.images_all_stages,
                        price_in=config.price_in_per_mtok,
                        price_out=config.price_out_per_mtok)

    agents = set(config.agents)
    code_only = "search" not in agents

    # query rewriting (skipped for --no-rewrite and for the code-only cut)
    if config.no_rewrite or (code_only and agents == {"code"}):
        rewritten = passthrough_query(config.user_prompt)
        if config.no_rewrite:
            state.flags["rewrite_skipped"] = True
    else:
        try:
            rewritten = run_rewrite_stage(config.backend, state,
                                          config.user_prompt, ds,
                                          numeric_csv, images)
        except RewriteFailed as exc:
            logger.warning("%s; continuing with passthrough query", exc)
            state.flags["rewrite_failed"] = True
            rewritten = passthrough_query(config.user_prompt)
    state.query = MultiObjectiveQuery(
        task_description=rewritten.task_description,
        data=rewritten.data, model=rewritten.model,
        numeric_csv=numeric_csv, images=images,
        raw_user_prompt=config.user_prompt)
    if config.latency_ms is not None and not state.query.model.latency:
        state.query.model = dataclasses.replace(
            state.query.model, latency=str(config.latency_ms))

    template = codegen.load_template(ds.task)
    script_name = f"train_{_safe_name(ds.name)}.py"
    errors: list[str] = []

    if not code_only:
        if "design" in agents:
            state.space = run_design_stage(config.backend, state)
        else:
            state.space = default_search_space()
            state.flags["design_skipped"] = True

        input_shape = (ds.seq_length, ds.n_features)
        while state.rounds_used < state.budget:
            try:
                new = run_search_round(config.backend, state, input_shape,
                                       ds.output_units, ds.task)
            except EmptyRound as exc:
                errors.append(str(exc))
                continue
            run_eval_stage(config.backend, state, new, dev,
                           quant=config.quant, fold_bn=config.fold_bn,
                           use_llm="eval" in agents)
            if any(c.verdict and c.verdict.feasible for c in state.history):
                break

        try:
            selected = select_final(state)
        except NoCandidates as exc:
            selected = None
            errors.append(str(exc))

        script = None
        if selected is not None:
            if config.code_agent_writes and "code" in agents:
                script = run_code_stage_zero_shot(config.backend, state, ds,
                                                  template)
            else:
                script = codegen.emit_script(selected.arch, template)
    else:
        selected = None
        script = run_code_stage_zero_shot(config.backend, state, ds,
                                          template)

    # optional manager verification of the selected model; the manager's
    # text is recorded but never overrides the deterministic verdict
    verification = None
    if config.manager_verify and selected is not None:
        messages = [
            text_message("system", system_message("manager")),
            _user_message(state,
                          "Multi-objective query:\n"
                          f"{json.dumps(state.query.to_dict(), indent=2)}"
                          "\n\nSelected model and complexity profile:\n"
                          f"{json.dumps(selected.to_dict(), indent=2)}\n\n"
                          "Verify whether this model satisfies the user's "
                          "requirements and summarize any concerns."),
        ]
        verification = _chat(config.backend, state, "manager",
                             messages).content

    script_path = None
    if script is not None:
        script_path = out_dir / script_name
        script_path.write_text(script, encoding="utf-8")

    total_wall_ms = sum(e["wall_ms"] for e in state.cost_ledger)
    report = {
        "config": {
            "dataset": ds.name,
            "task": ds.task,
            "device": dev.name,
            "budget": state.budget,
            "candidates_per_round": state.candidates_per_round,
            "quant": config.quant,
            "fold_bn": config.fold_bn,
            "seed": config.seed,
            "agents": sorted(agents),
            "no_rewrite": config.no_rewrite,
            "images_all_stages": config.images_all_stages,
            "backend": config.backend.name,
        },
        "query": state.query.to_dict(),
        "search_space": state.space.to_dict() if state.space else None,
        "rounds_used": state.rounds_used,
        "candidates": [c.to_dict() for c in state.history],
        "rejections": state.rejections,
        "selected": (selected.to_dict() if selected is not None else None),
        "best_effort": state.best_effort,
        "verification": verification,
        "script": script_name if script is not None else None,
        "flags": state.flags,
        "errors": errors,
        "cost_ledger": state.cost_ledger,
        "totals": {
            "chat_calls": len(state.cost_ledger),
            "tokens_in": sum(e["tokens_in"] for e in state.cost_ledger),
            "tokens_out": sum(e["tokens_out"] for e in state.cost_ledger),
            "wall_ms": total_wall_ms,
            "usd_estimate": round(sum(e["usd_estimate"]
                                      for e in state.cost_ledger), 6),
        },
    }
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    logger.info("pipeline finished in %.1f s", time.monotonic() - started)
    return report
