import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guiscout.widgets import (
    ActionVerb,
    KIND_VERBS,
    PossibleAction,
    Rect,
    TreeIntegrityError,
    TreeParseError,
    WidgetKind,
    WidgetNode,
    find_widget,
    parse_tree,
    possible_actions,
    serialize_tree,
)

DIALOG_ROOT = WidgetNode(
    class_name="Dialog",
    kind=WidgetKind.DIALOG,
    control_id=0,
    rectangle=Rect(4429, 1655, 5172, 2299),
    text="Integrate a Tool as a Workflow Component",
)

TABLE_SNIPPET = """{
  "class_name": "Dialog",
  "control_type": "WindowSpecification",
  "control_id": 0,
  "rectangle": [ "L4429", "T1655", "R5172", "B2299" ],
  "text": "Integrate a Tool as a Workflow Component",
  "sub_elements": []
}"""


def leaf(kind: WidgetKind, control_id: int, text: str = "", extra=None) -> WidgetNode:
    return WidgetNode(
        class_name=kind.name.title(),
        kind=kind,
        control_id=control_id,
        rectangle=Rect(0, 0, 10, 10),
        text=text,
        extra_state=dict(extra or {}),
    )


# --- serialization ---------------------------------------------------------

def test_serialize_dialog_root_matches_wire_fields():
    obj = json.loads(serialize_tree(DIALOG_ROOT))
    assert list(obj) == ["class_name", "control_type", "control_id", "rectangle",
                         "text", "sub_elements"]
    assert obj["class_name"] == "Dialog"
    assert obj["control_type"] == "WindowSpecification"
    assert obj["control_id"] == 0
    assert obj["rectangle"] == ["L4429", "T1655", "R5172", "B2299"]
    assert obj["text"] == "Integrate a Tool as a Workflow Component"
    assert obj["sub_elements"] == []


def test_serialize_static_leaf_has_empty_sub_elements():
    text = serialize_tree(leaf(WidgetKind.STATIC, 3))
    assert '"sub_elements": []' in text
    assert '"control_type": "StaticWrapper"' in text


def test_extra_state_serializes_between_text_and_sub_elements():
    node = leaf(WidgetKind.CHECK_BOX, 9, "Run", {"checked": True, "enabled": False})
    obj = json.loads(serialize_tree(node))
    assert list(obj) == ["class_name", "control_type", "control_id", "rectangle",
                         "text", "checked", "enabled", "sub_elements"]
    assert obj["checked"] is True
    assert obj["enabled"] is False


def test_rectangle_encoding_round_trip():
    rect = Rect(7, 8, 900, 1000)
    assert rect.encode() == ["L7", "T8", "R900", "B1000"]
    assert Rect.decode(rect.encode()) == rect


# --- parsing ---------------------------------------------------------------

def test_parse_reference_snippet():
    root = parse_tree(TABLE_SNIPPET)
    assert root.kind is WidgetKind.DIALOG
    assert root.control_id == 0
    assert root.text == "Integrate a Tool as a Workflow Component"


def test_parse_minimal_button_leaf():
    raw = ('{"class_name":"X","control_type":"ButtonWrapper","control_id":1,'
           '"rectangle":["L0","T0","R1","B1"],"text":"","sub_elements":[]}')
    node = parse_tree(raw)
    assert node.kind is WidgetKind.BUTTON
    assert node.control_id == 1
    assert node.sub_elements == ()


def test_parse_duplicate_control_id_is_integrity_error():
    root = WidgetNode(
        class_name="Dialog", kind=WidgetKind.DIALOG, control_id=5,
        rectangle=Rect(0, 0, 100, 100),
        sub_elements=(leaf(WidgetKind.BUTTON, 5),),
    )
    with pytest.raises(TreeIntegrityError, match="duplicate control_id 5"):
        parse_tree(serialize_tree_unchecked(root))


def serialize_tree_unchecked(node: WidgetNode) -> str:
    # serialize_tree validates, so build the duplicate-id JSON by hand
    def obj(n):
        return {
            "class_name": n.class_name, "control_type": n.kind.value,
            "control_id": n.control_id, "rectangle": n.rectangle.encode(),
            "text": n.text, "sub_elements": [obj(c) for c in n.sub_elements],
        }
    return json.dumps(obj(node))


def test_parse_malformed_json_reports_byte_offset():
    with pytest.raises(TreeParseError, match=r"malformed JSON at byte \d+"):
        parse_tree('{"class_name": "X", ')


def test_parse_unknown_control_type_degrades_to_container():
    raw = ('{"class_name":"X","control_type":"HyperlinkWrapper","control_id":1,'
           '"rectangle":["L0","T0","R1","B1"],"text":"","sub_elements":[]}')
    node = parse_tree(raw)
    assert node.kind is WidgetKind.CONTAINER
    assert node.unknown_type is True
    assert possible_actions(node) == []


def test_parse_rejects_bad_rectangle():
    raw = ('{"class_name":"X","control_type":"ButtonWrapper","control_id":1,'
           '"rectangle":["X0","T0","R1","B1"],"text":"","sub_elements":[]}')
    with pytest.raises(TreeParseError, match="rectangle"):
        parse_tree(raw)


# --- possible actions ------------------------------------------------------

def test_single_button_yields_single_click():
    assert possible_actions(leaf(WidgetKind.BUTTON, 134478)) == [
        PossibleAction(134478, ActionVerb.CLICK)
    ]


def test_non_actionable_kinds_yield_nothing():
    root = WidgetNode(
        class_name="Pane", kind=WidgetKind.CONTAINER, control_id=0,
        rectangle=Rect(0, 0, 50, 50),
        sub_elements=(leaf(WidgetKind.STATIC, 1, "hi"), leaf(WidgetKind.TOOLBAR, 2)),
    )
    assert possible_actions(root) == []


def test_disabled_widgets_yield_nothing():
    node = leaf(WidgetKind.BUTTON, 7, "Next >", {"enabled": False})
    assert possible_actions(node) == []


def test_combo_box_select_offers_its_items():
    node = leaf(WidgetKind.COMBO_BOX, 4, "File", {"items": "File|Float|Integer"})
    (action,) = possible_actions(node)
    assert action.verb is ActionVerb.SELECT
    assert action.arg.kind == "one_of"
    assert action.arg.choices == ("File", "Float", "Integer")


def test_checkbox_offers_check_and_uncheck_in_order():
    verbs = [pa.verb for pa in possible_actions(leaf(WidgetKind.CHECK_BOX, 2, "x"))]
    assert verbs == [ActionVerb.CHECK, ActionVerb.UNCHECK]


def brute_force_actions(tree: WidgetNode) -> set[tuple[int, str]]:
    """Independent oracle: flat scan of every node against the verb table."""
    table = {
        WidgetKind.BUTTON: ("click",),
        WidgetKind.EDIT: ("write",),
        WidgetKind.COMBO_BOX: ("select",),
        WidgetKind.CHECK_BOX: ("check", "uncheck"),
        WidgetKind.RADIO_BUTTON: ("click",),
        WidgetKind.LIST_ITEM: ("click",),
        WidgetKind.TAB_ITEM: ("click",),
    }
    found = set()
    stack = [tree]
    while stack:
        node = stack.pop()
        stack.extend(node.sub_elements)
        if node.extra_state.get("enabled") is False:
            continue
        for verb in table.get(node.kind, ()):
            found.add((node.control_id, verb))
    return found


def test_possible_actions_matches_brute_force_on_wizard_page_two():
    from guiscout.simulator import new_wizard

    sim = new_wizard()
    sim.current_page = 1
    tree = sim.snapshot()
    got = {(pa.control_id, pa.verb.value) for pa in possible_actions(tree)}
    assert got == brute_force_actions(tree)


def test_possible_actions_follow_depth_first_document_order():
    from guiscout.simulator import new_wizard

    tree = new_wizard().snapshot()
    actionable_dfs = [node.control_id for node in tree.iter_nodes()
                      if node.kind in KIND_VERBS and node.enabled]
    listed = []
    for pa in possible_actions(tree):
        if pa.control_id not in listed:
            listed.append(pa.control_id)
    assert listed == actionable_dfs


# --- find_widget -----------------------------------------------------------

def test_find_widget_returns_root_for_id_zero():
    assert find_widget(DIALOG_ROOT, 0) is DIALOG_ROOT


def test_find_widget_absent_id_returns_none():
    assert find_widget(DIALOG_ROOT, 99) is None


# --- property tests --------------------------------------------------------

_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=30
)

_EXTRA = st.dictionaries(
    keys=st.sampled_from(["enabled", "checked", "selected", "selected_item", "items"]),
    values=st.one_of(st.booleans(), _TEXT),
    max_size=3,
)


@st.composite
def widget_trees(draw) -> WidgetNode:
    shape = draw(st.recursive(
        st.just(None), lambda child: st.lists(child, max_size=3), max_leaves=10))

    counter = iter(range(10_000))

    def build(node_shape) -> WidgetNode:
        children = () if node_shape is None else tuple(build(c) for c in node_shape)
        kind = draw(st.sampled_from(list(WidgetKind)))
        left = draw(st.integers(0, 5000))
        top = draw(st.integers(0, 5000))
        return WidgetNode(
            class_name=draw(st.text(min_size=1, max_size=10)),
            kind=kind,
            control_id=next(counter),
            rectangle=Rect(left, top, left + draw(st.integers(0, 800)),
                           top + draw(st.integers(0, 800))),
            text=draw(_TEXT),
            extra_state=draw(_EXTRA),
            sub_elements=children,
        )

    return build(shape)


@settings(max_examples=100)
@given(widget_trees())
def test_round_trip_structural_equality(tree):
    assert parse_tree(serialize_tree(tree)) == tree


@settings(max_examples=100)
@given(widget_trees())
def test_reserialization_is_bit_identical(tree):
    once = serialize_tree(tree)
    assert serialize_tree(parse_tree(once)) == once


@settings(max_examples=100)
@given(widget_trees())
def test_every_possible_action_resolves_and_is_permitted(tree):
    for pa in possible_actions(tree):
        node = find_widget(tree, pa.control_id)
        assert node is not None
        assert pa.verb in KIND_VERBS[node.kind]


@settings(max_examples=100)
@given(widget_trees(), st.randoms(use_true_random=False))
def test_removing_a_subtree_never_adds_actions(tree, rng):
    def drop_random_child(node: WidgetNode) -> WidgetNode:
        if node.sub_elements and rng.random() < 0.5:
            keep = rng.randrange(len(node.sub_elements))
            children = tuple(c for i, c in enumerate(node.sub_elements) if i != keep)
        else:
            children = tuple(drop_random_child(c) for c in node.sub_elements)
        return WidgetNode(
            class_name=node.class_name, kind=node.kind, control_id=node.control_id,
            rectangle=node.rectangle, text=node.text, extra_state=node.extra_state,
            sub_elements=children)

    pruned = drop_random_child(tree)
    before = {(pa.control_id, pa.verb) for pa in possible_actions(tree)}
    after = {(pa.control_id, pa.verb) for pa in possible_actions(pruned)}
    assert after <= before


@settings(max_examples=60)
@given(widget_trees(), st.randoms(use_true_random=False))
def test_find_widget_agrees_with_exhaustive_scan(tree, rng):
    ids = [node.control_id for node in tree.iter_nodes()]
    target = rng.choice(ids)
    found = find_widget(tree, target)
    assert found is not None and found.control_id == target
    assert serialize_tree(tree).count(f'"control_id": {target},') == 1
