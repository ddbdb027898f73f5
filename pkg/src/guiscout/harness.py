"""The per-iteration orchestration loop and run management.

Each iteration: build the controller prompt, query the controller, parse and
validate its output, execute the action, append to the action log, render the
new screenshot, build the evaluator prompt from the action's explanation and
the before/after pair, query the evaluator, and record the verdict. Records
persist incrementally (one JSONL line per iteration) so a crashed run keeps
everything it completed.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import time
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

from .actions import (
    ActionLogEntry,
    ControllerOutputError,
    format_action,
    parse_controller_output,
    validate_action,
)
from .agents import (
    Agent,
    AgentError,
    AgentRequest,
    RandomAgent,
    RemoteAgent,
    RemoteAgentConfig,
    ScriptedAgent,
    ScriptExhausted,
    Verdict,
    VerdictParseError,
    parse_verdict,
    verdict_to_json,
)
from .prompts import DEFAULT_DOC_BUDGET, DocCorpus, ImageRef, build_controller_prompt, \
    build_evaluator_prompt
from .simulator import (
    FaultSpec,
    SimScreenshot,
    SimWizard,
    default_doc_corpus,
    full_traversal_script,
    new_wizard,
)
from .widgets import possible_actions, serialize_tree

DEFAULT_TASK = (
    "Act as a GUI-Tester for the software RCE.\n"
    "Cover all pages of the Tool Integration Wizard.\n"
    "Use as many different UI-Elements as possible."
)

SCREENSHOT_MEDIA_TYPE = "text/plain; charset=utf-8"


class ConfigError(ValueError):
    """The run configuration is unusable."""


class RecordLoadError(ValueError):
    """A persisted run record could not be read back."""


class ReplayError(ValueError):
    """A record cannot be replayed at all."""


class ReplayDivergence(Exception):
    """Replay produced a different trajectory than the record."""

    def __init__(self, iteration: int, detail: str):
        super().__init__(f"replay diverged at iteration {iteration}: {detail}")
        self.iteration = iteration
        self.detail = detail


class CampaignError(Exception):
    """One or more runs of a campaign failed; successful records are attached."""

    def __init__(self, failures: list[tuple[int, Exception]], records: list["RunRecord"]):
        lines = ", ".join(f"run {index}: {exc}" for index, exc in failures)
        super().__init__(f"{len(failures)} run(s) failed: {lines}")
        self.failures = failures
        self.records = records


@dataclass
class RunConfig:
    task: str = DEFAULT_TASK
    max_iterations: int = 100
    backend: str = "sim"  # "sim" | "live"
    controller: str = "scripted"  # scripted | random | remote
    evaluator: str = "oracle"  # scripted | oracle | remote
    seed: int = 0
    out_dir: Path | None = None
    run_id: str = "run-000"
    faults: list[FaultSpec] = dc_field(default_factory=list)
    wizard_config: dict | None = None
    controller_script: list[str] | None = None
    evaluator_script: list[str] | None = None
    doc_budget: int = DEFAULT_DOC_BUDGET
    attach_screenshot: bool = True
    remote_controller: RemoteAgentConfig | None = None
    remote_evaluator: RemoteAgentConfig | None = None

    def __post_init__(self) -> None:
        if self.backend == "simulated":
            self.backend = "sim"
        if self.backend not in ("sim", "live"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be non-negative")
        if self.controller not in ("scripted", "random", "remote"):
            raise ConfigError(f"unknown controller kind {self.controller!r}")
        if self.evaluator not in ("scripted", "oracle", "remote"):
            raise ConfigError(f"unknown evaluator kind {self.evaluator!r}")
        if self.controller == "remote" and self.remote_controller is None:
            raise ConfigError("a remote controller needs a remote agent config")
        if self.evaluator == "remote" and self.remote_evaluator is None:
            raise ConfigError("a remote evaluator needs a remote agent config")
        if self.backend == "live" and (self.remote_controller is None
                                       and self.remote_evaluator is None):
            raise ConfigError("the live backend requires a remote agent config")

    def echo(self) -> dict:
        """Config as persisted in run headers. Never contains credentials."""
        return {
            "task": self.task,
            "max_iterations": self.max_iterations,
            "backend": self.backend,
            "controller": self.controller,
            "evaluator": self.evaluator,
            "seed": self.seed,
            "faults": [fault.to_json_obj() for fault in self.faults],
            "wizard_config": self.wizard_config,
            "doc_budget": self.doc_budget,
            "attach_screenshot": self.attach_screenshot,
            "remote_controller": (self.remote_controller.to_json_obj()
                                  if self.remote_controller else None),
            "remote_evaluator": (self.remote_evaluator.to_json_obj()
                                 if self.remote_evaluator else None),
        }


@dataclass
class IterationRecord:
    index: int
    page_key: str
    tree_digest: str
    controller_prompt_digest: str | None = None
    evaluator_prompt_digest: str | None = None
    controller_raw: str | None = None
    controller_error: str | None = None
    action: str | None = None
    explanation: str = ""
    parse_error: str | None = None
    reject_reason: str | None = None
    status: str | None = None
    before_digest: str | None = None
    after_digest: str | None = None
    evaluator_raw: str | None = None
    verdict: dict | None = None
    verdict_error: str | None = None
    started_at: float = 0.0
    finished_at: float = 0.0

    def to_json_obj(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "IterationRecord":
        return cls(**obj)

    def fingerprint(self) -> dict:
        """Everything identity-relevant; wall-clock timestamps excluded."""
        obj = self.to_json_obj()
        obj.pop("started_at")
        obj.pop("finished_at")
        return obj


@dataclass
class RunRecord:
    run_id: str
    config: dict
    iterations: list[IterationRecord] = dc_field(default_factory=list)

    def fingerprint(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config,
            "iterations": [it.fingerprint() for it in self.iterations],
        }

    def problem_iterations(self) -> list[IterationRecord]:
        return [it for it in self.iterations
                if it.verdict is not None and it.verdict.get("state") == "problem"]


class RunWriter:
    """Incremental, crash-safe persistence for one run directory."""

    def __init__(self, out_dir: Path, run_id: str, header: dict):
        self.run_dir = Path(out_dir) / run_id
        self.shots_dir = self.run_dir / "shots"
        self.prompts_dir = self.run_dir / "prompts"
        self.shots_dir.mkdir(parents=True, exist_ok=True)
        self.prompts_dir.mkdir(parents=True, exist_ok=True)
        header_path = self.run_dir / "header.json"
        header_path.write_text(json.dumps(header, indent=2), encoding="utf-8")
        self._iterations_path = self.run_dir / "iterations.jsonl"
        self._iterations_path.write_text("", encoding="utf-8")

    def write_shot(self, shot: SimScreenshot) -> None:
        path = self.shots_dir / f"{shot.digest}.txt"
        if not path.exists():
            path.write_text(shot.rendered, encoding="utf-8")

    def write_prompt(self, text: str) -> str:
        digest = _sha256(text)
        path = self.prompts_dir / f"{digest}.txt"
        if not path.exists():
            path.write_text(text, encoding="utf-8")
        return digest

    def append_iteration(self, record: IterationRecord) -> None:
        with self._iterations_path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record.to_json_obj()) + "\n")


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _screenshot_ref(shot: SimScreenshot) -> ImageRef:
    return ImageRef(name=shot.digest, media_type=SCREENSHOT_MEDIA_TYPE,
                    data=shot.rendered.encode("utf-8"))


def _build_controller(config: RunConfig) -> Agent:
    if config.controller == "scripted":
        lines = config.controller_script
        if lines is None:
            lines = full_traversal_script(config.wizard_config)
        return ScriptedAgent(lines)
    if config.controller == "random":
        return RandomAgent(config.seed)
    assert config.remote_controller is not None
    return RemoteAgent(config.remote_controller)


def _build_evaluator(config: RunConfig) -> Agent | None:
    """None means the deterministic oracle evaluates in-process."""
    if config.evaluator == "oracle":
        return None
    if config.evaluator == "scripted":
        return ScriptedAgent(config.evaluator_script or [])
    assert config.remote_evaluator is not None
    return RemoteAgent(config.remote_evaluator)


class RunSession:
    """One sequential run: owns the simulator, the agents, and the log."""

    def __init__(self, config: RunConfig, docs: DocCorpus | None = None):
        if config.backend != "sim":
            raise ConfigError("the live backend is not available in this build; "
                              "only the simulated backend ships")
        self.config = config
        self.sim: SimWizard = new_wizard(config.faults, config.seed, config.wizard_config)
        self.controller = _build_controller(config)
        self.evaluator = _build_evaluator(config)
        self.docs = docs if docs is not None else default_doc_corpus()
        self.log: list[ActionLogEntry] = []
        self.writer: RunWriter | None = None
        if config.out_dir is not None:
            self.writer = RunWriter(config.out_dir, config.run_id,
                                    {"run_id": config.run_id, "format_version": 1,
                                     "created_at": time.time(), "config": config.echo()})
        self.prev_shot: SimScreenshot = self.sim.render()
        if self.writer:
            self.writer.write_shot(self.prev_shot)
        self.record = RunRecord(run_id=config.run_id, config=config.echo())

    def run_iteration(self, index: int) -> IterationRecord:
        """Execute one full controller/executor/evaluator iteration."""
        started = time.time()
        tree = self.sim.snapshot()
        before = self.prev_shot
        rec = IterationRecord(
            index=index,
            page_key=before.page_key,
            tree_digest=_sha256(serialize_tree(tree)),
            before_digest=before.digest,
            started_at=started,
        )
        attachment = _screenshot_ref(before) if self.config.attach_screenshot else None
        controller_prompt = build_controller_prompt(
            self.config.task, self.docs, tree, self.log,
            screenshot=attachment, doc_budget=self.config.doc_budget)
        prompt_text = controller_prompt.text()
        rec.controller_prompt_digest = (self.writer.write_prompt(prompt_text)
                                        if self.writer else _sha256(prompt_text))

        try:
            raw = self.controller.respond(AgentRequest(controller_prompt, "controller"))
        except ScriptExhausted:
            raise
        except AgentError as exc:
            rec.controller_error = str(exc)
            rec.finished_at = time.time()
            return rec
        rec.controller_raw = raw

        explanation = ""
        cmd = None
        try:
            output = parse_controller_output(raw)
            cmd = output.action
            explanation = output.explanation
        except ControllerOutputError as exc:
            rec.parse_error = str(exc)

        if cmd is None:
            rec.status = "rejected"
            entry = ActionLogEntry("", f"rejected: {rec.parse_error}", "rejected")
        else:
            rec.action = format_action(cmd)
            rec.explanation = explanation
            validation = validate_action(cmd, possible_actions(tree))
            if not validation.accepted:
                rec.status = "rejected"
                rec.reject_reason = validation.reason
                entry = ActionLogEntry(rec.action, explanation, "rejected")
            else:
                outcome = self.sim.execute(cmd)
                rec.status = outcome.status
                if outcome.status == "failed":
                    rec.reject_reason = outcome.reason
                entry = ActionLogEntry(rec.action, explanation, outcome.status)
        self.log.append(entry)

        after = self.sim.render()
        rec.after_digest = after.digest
        rec.page_key = after.page_key
        if self.writer:
            self.writer.write_shot(after)

        evaluator_prompt = build_evaluator_prompt(
            explanation, _screenshot_ref(before), _screenshot_ref(after))
        eval_text = evaluator_prompt.text()
        rec.evaluator_prompt_digest = (self.writer.write_prompt(eval_text)
                                       if self.writer else _sha256(eval_text))

        verdict: Verdict | None = None
        if self.evaluator is None:
            verdict = self.sim.oracle_evaluate(before, after, cmd)
            rec.evaluator_raw = verdict_to_json(verdict)
        else:
            try:
                rec.evaluator_raw = self.evaluator.respond(
                    AgentRequest(evaluator_prompt, "evaluator"))
                verdict = parse_verdict(rec.evaluator_raw)
            except (AgentError, VerdictParseError) as exc:
                rec.verdict_error = str(exc)
        if verdict is not None:
            rec.verdict = json.loads(verdict_to_json(verdict))

        self.prev_shot = after
        rec.finished_at = time.time()
        return rec

    def run(self) -> RunRecord:
        for index in range(self.config.max_iterations):
            if self.controller.finished:
                break
            try:
                rec = self.run_iteration(index)
            except ScriptExhausted:
                break
            self.record.iterations.append(rec)
            if self.writer:
                self.writer.append_iteration(rec)
        return self.record


def run(config: RunConfig, docs: DocCorpus | None = None) -> RunRecord:
    """Execute one run to completion and return its record."""
    return RunSession(config, docs).run()


def run_many(config: RunConfig, n: int, jobs: int = 1) -> list[RunRecord]:
    """n independent runs with derived seeds (seed + run index)."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    configs = []
    for index in range(n):
        configs.append(replace(config, seed=config.seed + index,
                               run_id=f"run-{index:03d}"))
    records: list[RunRecord | None] = [None] * n
    failures: list[tuple[int, Exception]] = []
    if jobs <= 1:
        for index, cfg in enumerate(configs):
            try:
                records[index] = run(cfg)
            except Exception as exc:  # noqa: BLE001 - per-run isolation is the contract
                failures.append((index, exc))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run, cfg): index for index, cfg in enumerate(configs)}
            for future in concurrent.futures.as_completed(futures):
                index = futures[future]
                try:
                    records[index] = future.result()
                except Exception as exc:  # noqa: BLE001
                    failures.append((index, exc))
    ok = [record for record in records if record is not None]
    if failures:
        raise CampaignError(sorted(failures, key=lambda pair: pair[0]), ok)
    return ok


def load_record(run_dir: Path) -> RunRecord:
    """Read a persisted run back; corrupt files raise RecordLoadError."""
    run_dir = Path(run_dir)
    try:
        header = json.loads((run_dir / "header.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise RecordLoadError(f"unreadable header in {run_dir}: {exc}") from exc
    record = RunRecord(run_id=header.get("run_id", run_dir.name),
                       config=header.get("config", {}))
    iterations_path = run_dir / "iterations.jsonl"
    try:
        text = iterations_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RecordLoadError(f"unreadable iterations in {run_dir}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record.iterations.append(IterationRecord.from_json_obj(json.loads(line)))
        except (ValueError, TypeError) as exc:
            raise RecordLoadError(
                f"corrupt iteration at {iterations_path}:{line_no}: {exc}") from exc
    return record


def config_from_echo(echo: dict) -> RunConfig:
    """Rebuild enough of a RunConfig from a persisted header to replay it."""
    return RunConfig(
        task=echo.get("task", DEFAULT_TASK),
        max_iterations=echo.get("max_iterations", 100),
        backend=echo.get("backend", "sim"),
        controller="scripted",
        evaluator="scripted",
        seed=echo.get("seed", 0),
        faults=[FaultSpec.from_json_obj(obj) for obj in echo.get("faults", [])],
        wizard_config=echo.get("wizard_config"),
        doc_budget=echo.get("doc_budget", DEFAULT_DOC_BUDGET),
        attach_screenshot=echo.get("attach_screenshot", True),
    )


def replay(record: RunRecord, faults: list[FaultSpec] | None = None,
           out_dir: Path | None = None) -> RunRecord:
    """Re-execute a recorded run against a fresh simulator.

    Statuses and screenshot digests must match the original record; the first
    mismatch raises ReplayDivergence naming the iteration.
    """
    if record.config.get("backend", "sim") != "sim":
        raise ReplayError("only simulated-backend records can be replayed")
    controller_lines = []
    evaluator_lines = []
    for it in record.iterations:
        if it.controller_raw is None or it.evaluator_raw is None:
            raise ReplayError(
                f"iteration {it.index} has no recorded agent output; cannot replay")
        controller_lines.append(it.controller_raw)
        evaluator_lines.append(it.evaluator_raw)
    config = config_from_echo(record.config)
    config.controller_script = controller_lines
    config.evaluator_script = evaluator_lines
    config.max_iterations = len(record.iterations)
    config.run_id = record.run_id + "-replay"
    config.out_dir = out_dir
    if faults is not None:
        config.faults = faults
    new_record = run(config)
    for old, new in zip(record.iterations, new_record.iterations):
        for field_name in ("status", "before_digest", "after_digest"):
            old_value = getattr(old, field_name)
            new_value = getattr(new, field_name)
            if old_value != new_value:
                raise ReplayDivergence(
                    old.index, f"{field_name} {new_value!r} != recorded {old_value!r}")
    if len(new_record.iterations) != len(record.iterations):
        raise ReplayDivergence(len(new_record.iterations),
                               "replay produced a different number of iterations")
    return new_record
