"""Prompt assembly for the controller and evaluator agents.

Both prompts are built from fixed sections in a fixed order (controller:
Role, Task, Documentation, GUI, Action, ActionLog, Closing; evaluator: Role,
Task, Output, Action, Closing). Rendered text is the section bodies joined by
blank lines, and golden files in the test suite pin the bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import ActionLogEntry, format_log
from .widgets import WidgetKind, WidgetNode, serialize_tree


class MissingAttachmentError(ValueError):
    """An image reference required by the prompt is absent."""


@dataclass(frozen=True)
class ImageRef:
    """A resolvable reference to one screenshot, carried as raw bytes."""

    name: str
    media_type: str
    data: bytes


@dataclass(frozen=True)
class PromptDocument:
    """An ordered list of named sections plus up to two image attachments."""

    sections: tuple[tuple[str, str], ...]
    attachments: tuple[ImageRef, ...] = ()

    def __post_init__(self) -> None:
        if len(self.attachments) > 2:
            raise ValueError("a prompt carries at most two attachments")

    def text(self) -> str:
        return "\n\n".join(body for _, body in self.sections)

    def section(self, name: str) -> str:
        for section_name, body in self.sections:
            if section_name == name:
                return body
        raise KeyError(name)

    @property
    def section_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.sections)


@dataclass(frozen=True)
class DocEntry:
    page_key: str
    body: str


@dataclass(frozen=True)
class DocCorpus:
    """Documentation pages keyed by wizard page, selectable per GUI state."""

    entries: tuple[DocEntry, ...] = ()


CONTROLLER_SECTIONS = ("Role", "Task", "Documentation", "GUI", "Action", "ActionLog", "Closing")
EVALUATOR_SECTIONS = ("Role", "Task", "Output", "Action", "Closing")

DEFAULT_DOC_BUDGET = 8000

CONTROLLER_ROLE = """Your Role:
You are an automated system that controls the software RCE.
You are given a task, the GUI of RCE and documentation about the software in textual form.
You have to interact with the GUI to achieve the given task.
You can control the GUI by sending actions to the software.
The software will execute the actions and give you feedback about the result, by sending you the new state of the GUI and whether the action was successful or not.
You must use the information about the GUI and the documentation to decide which actions to take.
Include the information about the position of the GUI-Elements and the text of the GUI-Elements in your decision.
Also consider which Parent-Elements the GUI-Elements have.
It is important to take the context of the GUI-Elements into account when deciding which actions to take
You can also use the feedback about the result of the actions to decide which actions to take next."""

CONTROLLER_ACTION = """There are different types of GUI-Elements in the GUI of RCE.
UIAWrapper and StaticWrapper are GUI-Elements that can not be interacted with.
Their only purpose is to display information or group other Gui Elements.
The ButtonWrapper is a GUI-Element that can be clicked.
The EditWrapper is a text input field that can be written to.
The ComboBoxWrapper is a drop-down list from which one item can be selected.
The CheckBoxWrapper is a GUI-Element that can be checked or unchecked.
The RadioButtonWrapper is a GUI-Element that can be clicked to select one option of a group.
The ListItemWrapper and TabItemWrapper are GUI-Elements that can be clicked.
To control a GUI-Element output a command in the following Format:
<action>(<control id>), for example click(134478)
For each control type there are different actions posible.
The StaticWrapper, ToolbarWrapper and UIAWrapper have no actions.
The ButtonWrapper has the click(<control_id>) action, for example click(134478)
The EditWrapper has the write(<control_id>, '<text>') action, for example write(134478, 'some text')
The ComboBoxWrapper has the select(<control_id>, '<item>') action, for example select(134478, 'some item')
The CheckBoxWrapper has the check(<control_id>) and uncheck(<control_id>) actions, for example check(134478)
The RadioButtonWrapper has the click(<control_id>) action, for example click(134478)
The ListItemWrapper and TabItemWrapper have the click(<control_id>) action, for example click(134478)
You must format your output in JSON as the following:
{
    "action": "<action>",
    "explanation": "<what the action does and why you do it>"
}
example 1:
{
    "action": "click(134478)",
    "explanation": "click next to get to the second page"
}
example 2:
{
    "action": "write(2166788, 'Number of Threads')",
    "explanation": "write a display name into the text field to make the key human-readable"
}"""

CONTROLLER_CLOSING = (
    "What action do you want to take to do the next step for achieving the given task?"
)

EVALUATOR_ROLE = """You are a very experienced GUI Tester.
You observe the GUI of a Software.
A system performs actions on the GUI.
After each action taken on the GUI you evaluate whether the software behaves as expected or if there are any issues.
You are provided with a screenshot of the GUI before and after the action."""

EVALUATOR_TASK = """Check if there are any inconsistencies, unexpected behaviour or UI Elements that are not visible.
In detail check the following:
- the size, position, height, width of the visual elements
- Checking the message displayed, frequency and content
- Checking alignment of radio buttons, drop downs
- Verifying the title of each section and their correctness
- Cross-checking the colors and its synchronization with the theme"""

EVALUATOR_OUTPUT = """Format your output as JSON.
For example:
{
    "state": "problem",
    "reason": "The Text of the Description is not fully visible."
}
If there are no problems output:
{
    "state": "okay"
}"""

# The historical header repeats "was"; kept by default so golden files stay
# byte-stable. Pass doubled_was=False to normalize.
EVALUATOR_ACTION_HEADER_DOUBLED = "The action performed between the two images was was:"
EVALUATOR_ACTION_HEADER_NORMALIZED = "The action performed between the two images was:"

EVALUATOR_CLOSING = "Are there any problems with the GUI after the action was performed?"


def select_documentation(
    docs: DocCorpus, tree: WidgetNode, budget: int = DEFAULT_DOC_BUDGET
) -> str:
    """Pick the documentation page matching the current wizard page.

    The page is identified by the active-page marker on the dialog root.
    Without a match, falls back to concatenating all entries up to the
    character budget.
    """
    page_key = None
    if tree.kind is WidgetKind.DIALOG:
        marker = tree.extra_state.get("active_page")
        if isinstance(marker, str):
            page_key = marker
    for entry in docs.entries:
        if page_key is not None and entry.page_key == page_key:
            return entry.body[:budget]
    return "\n\n".join(entry.body for entry in docs.entries)[:budget]


def build_controller_prompt(
    task: str,
    docs: DocCorpus,
    tree: WidgetNode,
    log: list[ActionLogEntry],
    screenshot: ImageRef | None = None,
    doc_budget: int = DEFAULT_DOC_BUDGET,
) -> PromptDocument:
    """Assemble the controller prompt for one iteration."""
    sections = (
        ("Role", CONTROLLER_ROLE),
        ("Task", "Your task:\n" + task),
        ("Documentation", "Documentation:\n" + select_documentation(docs, tree, doc_budget)),
        ("GUI", "The current state of the GUI:\n" + serialize_tree(tree)),
        ("Action", CONTROLLER_ACTION),
        ("ActionLog", "The previous actions:\n" + format_log(log)),
        ("Closing", CONTROLLER_CLOSING),
    )
    attachments = (screenshot,) if screenshot is not None else ()
    return PromptDocument(sections=sections, attachments=attachments)


def build_evaluator_prompt(
    action_explanation: str,
    before: ImageRef | None,
    after: ImageRef | None,
    doubled_was: bool = True,
) -> PromptDocument:
    """Assemble the evaluator prompt for one before/after screenshot pair."""
    if before is None or after is None:
        raise MissingAttachmentError("the evaluator prompt needs both a before and an after image")
    header = EVALUATOR_ACTION_HEADER_DOUBLED if doubled_was else EVALUATOR_ACTION_HEADER_NORMALIZED
    sections = (
        ("Role", EVALUATOR_ROLE),
        ("Task", EVALUATOR_TASK),
        ("Output", EVALUATOR_OUTPUT),
        ("Action", header + "\n" + action_explanation),
        ("Closing", EVALUATOR_CLOSING),
    )
    return PromptDocument(sections=sections, attachments=(before, after))
