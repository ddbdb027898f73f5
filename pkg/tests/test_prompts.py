from pathlib import Path

import pytest

from guiscout.actions import ActionLogEntry
from guiscout.harness import DEFAULT_TASK
from guiscout.prompts import (
    CONTROLLER_SECTIONS,
    EVALUATOR_SECTIONS,
    DocCorpus,
    DocEntry,
    ImageRef,
    MissingAttachmentError,
    PromptDocument,
    build_controller_prompt,
    build_evaluator_prompt,
    select_documentation,
)
from guiscout.simulator import CPACS_DOC, default_doc_corpus, new_wizard
from guiscout.widgets import Rect, WidgetKind, WidgetNode

GOLDEN_DIR = Path(__file__).parent / "golden"

FIXTURE_TREE = WidgetNode(
    class_name="Dialog", kind=WidgetKind.DIALOG, control_id=0,
    rectangle=Rect(4429, 1655, 5172, 2299),
    text="Integrate a Tool as a Workflow Component",
    sub_elements=(
        WidgetNode(class_name="Static", kind=WidgetKind.STATIC, control_id=1,
                   rectangle=Rect(4449, 1703, 5152, 1727), text="Tool Description"),
        WidgetNode(class_name="Edit", kind=WidgetKind.EDIT, control_id=2166788,
                   rectangle=Rect(4689, 1735, 5102, 1759), text="Number of Threads"),
        WidgetNode(class_name="Button", kind=WidgetKind.BUTTON, control_id=134478,
                   rectangle=Rect(4699, 2243, 4779, 2271), text="Next >"),
    ),
)

FIXTURE_LOG = [ActionLogEntry(
    action="write(2166788, 'Number of Threads')",
    explanation="Enter a display name 'Number of Threads' for the 'numThreads' property "
                "to make the key human-readable and provide context in the properties view.",
    status="executed",
)]

FIXTURE_CORPUS = DocCorpus(entries=(DocEntry("cpacs_properties", CPACS_DOC),))

EVALUATOR_EXPLANATION = ("Click the 'Next >' button to proceed to the next page of the "
                         "Tool Integration Wizard and continue testing the remaining pages "
                         "and their functionalities.")


def shot(name: str = "s") -> ImageRef:
    return ImageRef(name=name, media_type="text/plain", data=name.encode())


# --- golden files ----------------------------------------------------------

def test_controller_prompt_matches_golden_bytes():
    prompt = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, FIXTURE_LOG)
    golden = (GOLDEN_DIR / "controller_prompt.txt").read_text(encoding="utf-8")
    assert prompt.text() == golden


def test_evaluator_prompt_matches_golden_bytes():
    prompt = build_evaluator_prompt(EVALUATOR_EXPLANATION, shot("before"), shot("after"))
    golden = (GOLDEN_DIR / "evaluator_prompt.txt").read_text(encoding="utf-8")
    assert prompt.text() == golden


# --- section structure -----------------------------------------------------

def test_controller_section_order_is_fixed():
    prompt = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [])
    assert prompt.section_names == CONTROLLER_SECTIONS


def test_evaluator_section_order_is_fixed():
    prompt = build_evaluator_prompt("x", shot(), shot())
    assert prompt.section_names == EVALUATOR_SECTIONS


def test_empty_log_section_body():
    prompt = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [])
    assert prompt.section("ActionLog") == "The previous actions:\n[]"


def test_task_section_prefix_and_content():
    prompt = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [])
    body = prompt.section("Task")
    assert body.startswith("Your task:")
    assert "Act as a GUI-Tester for the software RCE." in body


def test_gui_section_contains_serialized_tree_with_prefix():
    prompt = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [])
    body = prompt.section("GUI")
    assert body.startswith("The current state of the GUI:\n{")
    assert '"control_id": 134478' in body


def test_closing_question_is_invariant():
    prompt = build_controller_prompt("other task", DocCorpus(), FIXTURE_TREE, [])
    assert prompt.section("Closing") == ("What action do you want to take to do the "
                                         "next step for achieving the given task?")


def test_action_section_contains_format_and_both_examples():
    prompt = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [])
    body = prompt.section("Action")
    assert "<action>(<control id>), for example click(134478)" in body
    assert "You must format your output in JSON" in body
    assert "example 1:" in body and "example 2:" in body


def test_evaluator_output_section_shows_both_verdict_shapes():
    prompt = build_evaluator_prompt("x", shot(), shot())
    body = prompt.section("Output")
    assert '"state": "problem"' in body
    assert '"state": "okay"' in body


def test_evaluator_action_header_doubled_and_normalized():
    doubled = build_evaluator_prompt("go", shot(), shot())
    assert "was was:" in doubled.section("Action")
    normalized = build_evaluator_prompt("go", shot(), shot(), doubled_was=False)
    assert "was was:" not in normalized.section("Action")
    assert "images was:" in normalized.section("Action")


def test_evaluator_empty_explanation_still_has_two_attachments():
    prompt = build_evaluator_prompt("", shot("b"), shot("a"))
    assert len(prompt.attachments) == 2
    assert prompt.section("Action").endswith("was was:\n")


def test_evaluator_attachments_keep_before_after_order():
    prompt = build_evaluator_prompt("x", shot("before"), shot("after"))
    assert [ref.name for ref in prompt.attachments] == ["before", "after"]


def test_evaluator_missing_image_is_an_error():
    with pytest.raises(MissingAttachmentError):
        build_evaluator_prompt("x", None, shot())
    with pytest.raises(MissingAttachmentError):
        build_evaluator_prompt("x", shot(), None)


def test_controller_screenshot_is_optional():
    without = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [])
    assert without.attachments == ()
    with_shot = build_controller_prompt(DEFAULT_TASK, FIXTURE_CORPUS, FIXTURE_TREE, [],
                                        screenshot=shot())
    assert len(with_shot.attachments) == 1


def test_prompt_document_caps_attachments():
    with pytest.raises(ValueError):
        PromptDocument(sections=(("Role", "x"),), attachments=(shot(), shot(), shot()))


# --- documentation selection -----------------------------------------------

def test_select_documentation_by_active_page():
    sim = new_wizard()
    sim.current_page = 2
    tree = sim.snapshot()
    body = select_documentation(default_doc_corpus(), tree)
    assert body.startswith("# Launch Settings")


def test_select_documentation_empty_corpus():
    assert select_documentation(DocCorpus(), FIXTURE_TREE) == ""


def test_select_documentation_fallback_respects_budget():
    corpus = DocCorpus(entries=tuple(
        DocEntry(f"page{i}", f"# Page {i}\n" + "x" * 400) for i in range(5)))
    body = select_documentation(corpus, FIXTURE_TREE, budget=1000)
    assert len(body) <= 1000
    full = "\n\n".join(entry.body for entry in corpus.entries)
    assert body == full[:1000]


def test_select_documentation_budget_applies_to_matched_page():
    sim = new_wizard()
    sim.current_page = 3
    tree = sim.snapshot()
    body = select_documentation(default_doc_corpus(), tree, budget=50)
    assert len(body) <= 50
    assert CPACS_DOC.startswith(body)
