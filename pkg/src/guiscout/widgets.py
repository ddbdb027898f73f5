"""Widget-tree data model for GUI snapshots.

A snapshot of the system under test is a tree of immutable :class:`WidgetNode`
values. The JSON produced by :func:`serialize_tree` is embedded verbatim in
controller prompts and persisted run records, so the encoding is a byte-stable
contract: key order is fixed and rectangles are encoded as four prefixed
strings (``["L4429", "T1655", "R5172", "B2299"]``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator


class TreeParseError(ValueError):
    """Widget-tree JSON could not be decoded."""


class TreeIntegrityError(ValueError):
    """A decoded or constructed tree violates a structural invariant."""


class ActionVerb(Enum):
    CLICK = "click"
    WRITE = "write"
    SELECT = "select"
    CHECK = "check"
    UNCHECK = "uncheck"


class WidgetKind(Enum):
    """Widget kinds; the enum value is the on-the-wire control_type string."""

    BUTTON = "ButtonWrapper"
    EDIT = "EditWrapper"
    COMBO_BOX = "ComboBoxWrapper"
    CHECK_BOX = "CheckBoxWrapper"
    RADIO_BUTTON = "RadioButtonWrapper"
    STATIC = "StaticWrapper"
    TOOLBAR = "ToolbarWrapper"
    CONTAINER = "UIAWrapper"
    DIALOG = "WindowSpecification"
    LIST_ITEM = "ListItemWrapper"
    TAB_ITEM = "TabItemWrapper"


#: Verbs permitted per widget kind. Kinds not listed are not actionable.
KIND_VERBS: dict[WidgetKind, tuple[ActionVerb, ...]] = {
    WidgetKind.BUTTON: (ActionVerb.CLICK,),
    WidgetKind.EDIT: (ActionVerb.WRITE,),
    WidgetKind.COMBO_BOX: (ActionVerb.SELECT,),
    WidgetKind.CHECK_BOX: (ActionVerb.CHECK, ActionVerb.UNCHECK),
    WidgetKind.RADIO_BUTTON: (ActionVerb.CLICK,),
    WidgetKind.LIST_ITEM: (ActionVerb.CLICK,),
    WidgetKind.TAB_ITEM: (ActionVerb.CLICK,),
}

_CONTROL_TYPE_TO_KIND = {kind.value: kind for kind in WidgetKind}

#: Top-level JSON keys owned by the node encoding; extra_state may not shadow them.
RESERVED_KEYS = frozenset(
    {"class_name", "control_type", "control_id", "rectangle", "text", "sub_elements"}
)

#: Separator used to pack combo-box item lists into the "items" extra_state value.
ITEMS_SEPARATOR = "|"


@dataclass(frozen=True)
class Rect:
    """Screen rectangle in pixels."""

    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self) -> None:
        if self.left > self.right or self.top > self.bottom:
            raise TreeIntegrityError(
                f"degenerate rectangle ({self.left}, {self.top}, {self.right}, {self.bottom})"
            )

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    def shifted(self, dx: int = 0, dy: int = 0) -> "Rect":
        return Rect(self.left + dx, self.top + dy, self.right + dx, self.bottom + dy)

    def encode(self) -> list[str]:
        return [f"L{self.left}", f"T{self.top}", f"R{self.right}", f"B{self.bottom}"]

    @classmethod
    def decode(cls, raw: object) -> "Rect":
        if not isinstance(raw, list) or len(raw) != 4:
            raise TreeParseError(f"rectangle must be a list of 4 prefixed strings, got {raw!r}")
        values = []
        for prefix, part in zip("LTRB", raw):
            if not isinstance(part, str) or not part.startswith(prefix):
                raise TreeParseError(f"rectangle entry {part!r} must start with {prefix!r}")
            try:
                values.append(int(part[1:]))
            except ValueError as exc:
                raise TreeParseError(f"rectangle entry {part!r} is not an integer") from exc
        return cls(*values)


@dataclass(frozen=True)
class WidgetNode:
    """One widget in a GUI snapshot. Immutable; safe to share between threads."""

    class_name: str
    kind: WidgetKind
    control_id: int
    rectangle: Rect
    text: str = ""
    extra_state: dict[str, str | bool] = field(default_factory=dict)
    sub_elements: tuple["WidgetNode", ...] = ()
    # Set by parse_tree when the control_type string was unknown and the node
    # degraded to CONTAINER. Excluded from structural equality.
    unknown_type: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.control_id < 0:
            raise TreeIntegrityError(f"control_id must be non-negative, got {self.control_id}")
        for key, value in self.extra_state.items():
            if key in RESERVED_KEYS:
                raise TreeIntegrityError(f"extra_state key {key!r} shadows a reserved key")
            if not isinstance(value, (str, bool)):
                raise TreeIntegrityError(
                    f"extra_state value for {key!r} must be text or boolean, got {type(value).__name__}"
                )

    @property
    def enabled(self) -> bool:
        return self.extra_state.get("enabled") is not False

    def iter_nodes(self) -> Iterator["WidgetNode"]:
        """Depth-first document order, this node first."""
        yield self
        for child in self.sub_elements:
            yield from child.iter_nodes()

    def combo_items(self) -> tuple[str, ...]:
        """Selectable items of a combo box, unpacked from extra_state."""
        raw = self.extra_state.get("items")
        if not isinstance(raw, str) or raw == "":
            return ()
        return tuple(raw.split(ITEMS_SEPARATOR))


@dataclass(frozen=True)
class ArgSpec:
    """What argument an action accepts: none, free text, or one of a list."""

    kind: str  # "none" | "free_text" | "one_of"
    choices: tuple[str, ...] = ()


ARG_NONE = ArgSpec("none")
ARG_FREE_TEXT = ArgSpec("free_text")


@dataclass(frozen=True)
class PossibleAction:
    """One (widget, verb) pair that is legal in the current GUI state."""

    control_id: int
    verb: ActionVerb
    arg: ArgSpec = ARG_NONE


def validate_tree(root: WidgetNode) -> None:
    """Check tree-wide invariants; raises TreeIntegrityError on violation."""
    seen: set[int] = set()
    for node in root.iter_nodes():
        if node.control_id in seen:
            raise TreeIntegrityError(f"duplicate control_id {node.control_id}")
        seen.add(node.control_id)


def _node_to_obj(node: WidgetNode) -> dict:
    obj: dict = {
        "class_name": node.class_name,
        "control_type": node.kind.value,
        "control_id": node.control_id,
        "rectangle": node.rectangle.encode(),
        "text": node.text,
    }
    for key in sorted(node.extra_state):
        obj[key] = node.extra_state[key]
    obj["sub_elements"] = [_node_to_obj(child) for child in node.sub_elements]
    return obj


def serialize_tree(tree: WidgetNode) -> str:
    """Encode a widget tree as the canonical JSON text used in prompts."""
    validate_tree(tree)
    return json.dumps(_node_to_obj(tree), indent=2)


def _node_from_obj(obj: object) -> WidgetNode:
    if not isinstance(obj, dict):
        raise TreeParseError(f"widget node must be a JSON object, got {type(obj).__name__}")
    for required in ("class_name", "control_type", "control_id", "rectangle", "sub_elements"):
        if required not in obj:
            raise TreeParseError(f"widget node is missing {required!r}")
    control_type = obj["control_type"]
    unknown = False
    kind = _CONTROL_TYPE_TO_KIND.get(control_type)
    if kind is None:
        kind = WidgetKind.CONTAINER
        unknown = True
    control_id = obj["control_id"]
    if not isinstance(control_id, int) or isinstance(control_id, bool):
        raise TreeParseError(f"control_id must be an integer, got {control_id!r}")
    text = obj.get("text", "")
    if not isinstance(text, str):
        raise TreeParseError(f"text must be a string, got {text!r}")
    extra: dict[str, str | bool] = {}
    for key, value in obj.items():
        if key in RESERVED_KEYS:
            continue
        if not isinstance(value, (str, bool)):
            raise TreeParseError(f"extra_state value for {key!r} must be text or boolean")
        extra[key] = value
    children = tuple(_node_from_obj(child) for child in obj["sub_elements"])
    try:
        return WidgetNode(
            class_name=str(obj["class_name"]),
            kind=kind,
            control_id=control_id,
            rectangle=Rect.decode(obj["rectangle"]),
            text=text,
            extra_state=extra,
            sub_elements=children,
            unknown_type=unknown,
        )
    except TreeIntegrityError:
        raise
    except ValueError as exc:
        raise TreeParseError(str(exc)) from exc


def parse_tree(text: str) -> WidgetNode:
    """Decode widget-tree JSON; inverse of :func:`serialize_tree`.

    Unknown control_type strings degrade to CONTAINER with ``unknown_type``
    set rather than failing, because real accessibility trees contain wrapper
    types this model does not enumerate.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeParseError(f"malformed JSON at byte {exc.pos}: {exc.msg}") from exc
    root = _node_from_obj(data)
    validate_tree(root)
    return root


def possible_actions(tree: WidgetNode) -> list[PossibleAction]:
    """Enumerate every legal (widget, verb) pair in depth-first document order.

    Non-actionable kinds contribute nothing; widgets with extra_state
    ``enabled=false`` contribute nothing.
    """
    actions: list[PossibleAction] = []
    for node in tree.iter_nodes():
        verbs = KIND_VERBS.get(node.kind)
        if verbs is None or not node.enabled:
            continue
        for verb in verbs:
            if verb is ActionVerb.WRITE:
                arg = ARG_FREE_TEXT
            elif verb is ActionVerb.SELECT:
                arg = ArgSpec("one_of", node.combo_items())
            else:
                arg = ARG_NONE
            actions.append(PossibleAction(node.control_id, verb, arg))
    return actions


def find_widget(tree: WidgetNode, control_id: int) -> WidgetNode | None:
    """Return the unique node with the given id, or None."""
    for node in tree.iter_nodes():
        if node.control_id == control_id:
            return node
    return None
