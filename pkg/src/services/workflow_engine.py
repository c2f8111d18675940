"""The agentic construction pipeline as an explicit state machine.

plan -> draft_review -> build_guidance (+ controller for motion tasks) -> done.
Any WorkflowError ends the run in the failed phase with its FailureReason.
"""

import hashlib
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

from models.action import Action, Category
from models.control import ControlState
from models.metrics import CostCounters
from models.scene import Phase, Scene
from models.task import TaskConfig
from models.workflow import Entity, EntityName, Message, WorkflowPhase, WorkflowRun
from services.action_engine import OPERATIONS, ActionEngine, category_of
from services.agent_backends import AgentBackend
from services.catalog_loader import describe_block_type
from services.scene_io import export_machine_file
from utils.config import load_config
from utils.errors import (
    BackendError,
    DraftRejected,
    FormatViolation,
    LoopBudgetExceeded,
    MalformedToolCall,
    WorkflowError,
)
from utils.retry import retry_file_operation

logger = logging.getLogger(__name__)

TERMINATE = "TERMINATE"
REJECT_DRAFT = "REJECT_DRAFT"
PLAN_ENVELOPE = re.compile(r"<building_plan>(.*?)</building_plan>", re.DOTALL)
TOOL_CALL = re.compile(r"<tool_call>(.*?)</tool_call>", re.DOTALL)
CONTROLLER_ATTEMPTS = 2

AVAILABLE_PLACEHOLDER = "{available_blks}"

# Wire conventions the engine parses; appended after the prompt assets
INTERFACE_NOTES = {
    EntityName.BUILDER: (
        "Tool calls are written as exactly one JSON object per reply:\n"
        '<tool_call>{{"name": "attach_block_to", "arguments": {{"base_block": 0, "face": "north", '
        '"new_block": "SmallWoodenBlock", "note": "chassis front"}}}}</tool_call>\n'
        "Available tools:\n{tools}"
    ),
    EntityName.GUIDANCE: (
        "To reject the current draft and request a redesign, include REJECT_DRAFT in your reply."
    ),
}

PROMPT_FILES = {
    EntityName.PLANNER: "planner.txt",
    EntityName.DRAFTER: "drafter.txt",
    EntityName.REVIEWER: "reviewer.txt",
    EntityName.BUILDER: "builder.txt",
    EntityName.GUIDANCE: "guidance.txt",
    EntityName.CONTROLLER: "controller.txt",
}


def load_prompts(prompts_dir: Union[str, Path]) -> Dict[EntityName, str]:
    """Read the entity prompt assets verbatim."""
    prompts = {}
    for name, filename in PROMPT_FILES.items():
        path = Path(prompts_dir) / filename
        prompts[name] = path.read_text(encoding="utf-8")
    return prompts


def tool_listing() -> str:
    """One line per action category, as the Builder sees it."""
    by_category: Dict[Category, List[str]] = {}
    for name, entry in OPERATIONS.items():
        by_category.setdefault(entry[0], []).append(name)
    return "\n".join(
        f"  {category.value}: {', '.join(names)}" for category, names in by_category.items()
    )


def render_prompt(name: EntityName, template: str, available_blocks: str) -> str:
    """Fill the block list into a prompt asset and append the engine's wire conventions."""
    prompt = template.replace(AVAILABLE_PLACEHOLDER, available_blocks)
    note = INTERFACE_NOTES.get(name)
    if note:
        prompt = f"{prompt.rstrip()}\n\n{note.format(tools=tool_listing())}\n"
    return prompt


def parse_tool_call(text: str) -> Action:
    """Exactly one <tool_call> JSON object per Builder message.

    Raises:
        MalformedToolCall: zero or several calls, bad JSON, or a bad envelope
    """
    calls = TOOL_CALL.findall(text)
    if len(calls) != 1:
        raise MalformedToolCall(
            f"expected exactly one <tool_call> per message, found {len(calls)}"
        )
    try:
        payload = json.loads(calls[0])
    except json.JSONDecodeError as e:
        raise MalformedToolCall(f"tool call is not valid JSON: {e}")
    if not isinstance(payload, dict) or not isinstance(payload.get("name"), str):
        raise MalformedToolCall("tool call needs a string 'name'")
    arguments = payload.get("arguments", {})
    if not isinstance(arguments, dict):
        raise MalformedToolCall("tool call 'arguments' must be an object")
    name = payload["name"]
    try:
        category = Category(payload["category"]) if "category" in payload else category_of(name)
    except ValueError:
        raise MalformedToolCall(f"unknown category {payload['category']!r}")
    note = payload.get("note")
    return Action(
        category=category or Category.QUERY,
        name=name,
        arguments=arguments,
        note=note if isinstance(note, str) else None,
    )


def account_costs(run: WorkflowRun) -> CostCounters:
    """Backend-reported usage summed over every entity call."""
    total = CostCounters()
    for message in run.transcript:
        if message.backend_call:
            total = total + CostCounters(message.input_tokens, message.output_tokens, 1)
    return total


def transcript_lines(run: WorkflowRun) -> List[str]:
    return [
        json.dumps(
            {
                "role": m.role,
                "entity": m.entity,
                "content": m.content,
                "input_tokens": m.input_tokens,
                "output_tokens": m.output_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        for m in run.transcript
    ]


def transcript_hash(run: WorkflowRun) -> str:
    return hashlib.sha256("\n".join(transcript_lines(run)).encode("utf-8")).hexdigest()


@retry_file_operation(max_retries=3, base_delay=0.5)
def write_transcript(run: WorkflowRun, path: Union[str, Path]) -> None:
    """Persist the transcript as JSON lines."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(transcript_lines(run)) + "\n", encoding="utf-8")


class WorkflowEngine:
    """Runs Planner, Drafter/Reviewer, Guidance/Builder and Controller over one backend."""

    def __init__(
        self,
        engine: ActionEngine,
        backend: AgentBackend,
        config: Optional[Dict] = None,
        prompts: Optional[Dict[EntityName, str]] = None,
    ):
        self.engine = engine
        self.backend = backend
        self.config = config or engine.config or load_config()
        prompts = prompts or load_prompts(self.config["prompts_dir"])
        self.max_rounds = int(self.config.get("draft_review_max_rounds", 5))
        self.max_turns = int(self.config.get("build_guidance_max_turns", 120))
        self.attempts = int(self.config.get("malformed_output_retries", 2))
        # Planner, Builder and Controller budgets are attempts per request;
        # the others bound their loop
        budgets = {
            EntityName.PLANNER: self.attempts,
            EntityName.DRAFTER: self.max_rounds,
            EntityName.REVIEWER: self.max_rounds,
            EntityName.BUILDER: self.attempts,
            EntityName.GUIDANCE: self.max_turns,
            EntityName.CONTROLLER: CONTROLLER_ATTEMPTS,
        }
        block_list = self._block_list()
        self.entities = {
            name: Entity(name, render_prompt(name, prompts.get(name, ""), block_list), budgets[name])
            for name in EntityName
        }
        self.conversations: Dict[EntityName, List[Message]] = {}

    # Plumbing

    def _ask(self, run: WorkflowRun, name: EntityName, content: str) -> str:
        """Send one user message to an entity and record both sides."""
        entity = self.entities[name]
        conversation = self.conversations.setdefault(name, [])
        request = Message("user", name.value, content)
        conversation.append(request)
        run.append(request)
        try:
            reply = self.backend.reply(entity, list(conversation))
        except BackendError:
            raise
        except Exception as e:
            raise BackendError(f"{name.value} backend failed: {e}")
        answer = Message(
            "assistant", name.value, reply.text, reply.input_tokens, reply.output_tokens, True
        )
        conversation.append(answer)
        run.append(answer)
        return reply.text

    @staticmethod
    def _expect(run: WorkflowRun, phase: WorkflowPhase) -> None:
        if run.phase != phase:
            raise RuntimeError(f"run is in phase {run.phase.value}, expected {phase.value}")

    def _block_list(self) -> str:
        catalog = self.engine.catalog
        return "\n".join(
            f"- {describe_block_type(catalog, type_id, self.engine.templates)}"
            for type_id in catalog.type_ids
        )

    def _available_blocks(self) -> str:
        return "Available building blocks you can use:\n" + self._block_list()

    # Phases

    def new_run(self, task: TaskConfig) -> WorkflowRun:
        self.conversations = {}
        return WorkflowRun(task=task)

    def run(self, task: TaskConfig) -> WorkflowRun:
        """Full pipeline; failures end in the failed phase with a reason."""
        run = self.new_run(task)
        try:
            self.run_plan_phase(run)
            self.run_draft_review_loop(run)
            scene = self.run_build_guidance_loop(run)
            if task.requires_controls:
                self.run_controller_phase(run, scene)
            run.phase = WorkflowPhase.DONE
            logger.info(f"Run for {task.task_id} done: {len(scene.blocks)} blocks")
        except WorkflowError as e:
            run.phase = WorkflowPhase.FAILED
            run.failure_reason = e.reason
            run.failure_detail = str(e)
            logger.warning(f"Run for {task.task_id} failed ({e.reason.value}): {e}")
        return run

    def run_plan_phase(self, run: WorkflowRun) -> str:
        """Planner output must carry a <building_plan> envelope.

        Raises:
            FormatViolation: no envelope within the retry budget
        """
        self._expect(run, WorkflowPhase.PLAN)
        content = f"Task:\n{run.task.prompt}\n\n{self._available_blocks()}"
        budget = self.entities[EntityName.PLANNER].turn_budget
        for attempt in range(budget):
            text = self._ask(run, EntityName.PLANNER, content)
            match = PLAN_ENVELOPE.search(text)
            if match:
                run.plan = match.group(1).strip()
                run.phase = WorkflowPhase.DRAFT_REVIEW
                logger.info("Plan accepted")
                return run.plan
            logger.warning(f"Planner reply {attempt + 1} misses the <building_plan> envelope")
            content = "Your reply must wrap the plan in <building_plan>...</building_plan>."
        raise FormatViolation(f"no <building_plan> envelope after {budget} attempts")

    def run_draft_review_loop(self, run: WorkflowRun) -> str:
        """Alternate Drafter and Reviewer until the Reviewer says TERMINATE.

        Raises:
            LoopBudgetExceeded: no approval within the Drafter budget
            DraftRejected: the Reviewer rejects the draft outright
        """
        self._expect(run, WorkflowPhase.DRAFT_REVIEW)
        request = f"Task:\n{run.task.prompt}\n\nBuilding plan:\n{run.plan}"
        budget = self.entities[EntityName.DRAFTER].turn_budget
        for round_index in range(1, budget + 1):
            draft = self._ask(run, EntityName.DRAFTER, request)
            verdict = self._ask(run, EntityName.REVIEWER, f"Draft for review:\n{draft}")
            if REJECT_DRAFT in verdict:
                raise DraftRejected(f"Reviewer rejected the draft in round {round_index}")
            if TERMINATE in verdict:
                run.blueprint = draft
                run.phase = WorkflowPhase.BUILD_GUIDANCE
                logger.info(f"Draft approved in round {round_index}")
                return draft
            request = f"Reviewer feedback:\n{verdict}"
        raise LoopBudgetExceeded(f"no approval within {budget} draft-review rounds")

    def _builder_action(self, run: WorkflowRun, instruction: str) -> Action:
        content = instruction
        last_error: Optional[MalformedToolCall] = None
        budget = self.entities[EntityName.BUILDER].turn_budget
        for attempt in range(budget):
            text = self._ask(run, EntityName.BUILDER, content)
            try:
                return parse_tool_call(text)
            except MalformedToolCall as e:
                logger.warning(f"Builder turn attempt {attempt + 1} rejected: {e}")
                last_error = e
                content = f"Rejected: {e}. Reply with exactly one <tool_call>{{...}}</tool_call>."
        raise MalformedToolCall(f"{last_error} (after {budget} attempts)")

    def run_build_guidance_loop(self, run: WorkflowRun, scene: Optional[Scene] = None) -> Scene:
        """Guidance instructs, Builder emits one tool call, the engine answers.

        Ends on a Guidance TERMINATE, which finalizes the scene and exports the
        machine file.

        Raises:
            LoopBudgetExceeded: the Guidance budget ran out
            MalformedToolCall: a Builder turn failed every retry
            DraftRejected: Guidance emitted REJECT_DRAFT
        """
        self._expect(run, WorkflowPhase.BUILD_GUIDANCE)
        scene = scene if scene is not None else Scene()
        run.scene = scene
        feedback = f"Approved blueprint:\n{run.blueprint}"
        budget = self.entities[EntityName.GUIDANCE].turn_budget
        for turn in range(budget):
            instruction = self._ask(run, EntityName.GUIDANCE, feedback)
            if REJECT_DRAFT in instruction:
                raise DraftRejected(f"Guidance rejected the build at turn {turn + 1}")
            if TERMINATE in instruction:
                self._finalize(run, scene)
                return scene
            action = self._builder_action(run, instruction)
            result = self.engine.apply(scene, action)
            feedback = "\n".join([result.description, *result.warnings])
            run.append(Message("tool", EntityName.BUILDER.value, feedback))
        raise LoopBudgetExceeded(f"build not confirmed within {budget} turns")

    def _finalize(self, run: WorkflowRun, scene: Scene) -> None:
        if scene.phase != Phase.FINALIZED:
            result = self.engine.run(scene, "advance_phase", target=Phase.FINALIZED.value)
            if not result.ok:
                raise DraftRejected(f"machine cannot be finalized: {result.description}")
        run.machine_file = export_machine_file(
            scene, self.engine.catalog, builder=self.engine.builder
        )
        logger.info(f"Build finalized with {len(scene.blocks)} blocks")

    def run_controller_phase(self, run: WorkflowRun, scene: Scene) -> ControlState:
        """Install the Controller's control document; invalid documents are retried.

        Raises:
            FormatViolation: no valid document within the budget
        """
        content = (
            f"Task:\n{run.task.prompt}\n\nMachine:\n"
            f"{self.engine.describer.machine_summary(scene)}\n\n"
            f"Controls:\n{self.engine.describer.control_map(scene)}"
        )
        budget = self.entities[EntityName.CONTROLLER].turn_budget
        for attempt in range(budget):
            text = self._ask(run, EntityName.CONTROLLER, content)
            result = self.engine.run(scene, "install_controls", document=text)
            run.append(Message("tool", EntityName.CONTROLLER.value, result.description))
            if result.ok:
                logger.info("Controls installed")
                return scene.control
            logger.warning(f"Controller attempt {attempt + 1} rejected: {result.description}")
            content = f"The control document was rejected: {result.description}"
        raise FormatViolation(f"no valid control document after {budget} attempts")
