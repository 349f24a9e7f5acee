"""The reusable manipulation-safety property templates and task bindings.

Ten templates cover eight safety categories, from per-step invariants
(collision avoidance, onset preconditions) to multi-step obligations over
ordering, recovery, and eventual settling. Each template is written over
abstract slot names; binding every slot to a concrete task proposition yields
a monitorable property instance with a compiled DFA.

A task specification document (JSON or YAML) groups the instances monitored
for one task together with suite and horizon metadata::

    {
      "task": "place_mug_on_shelf",
      "suite": "storage_organization",
      "horizon": "atomic",
      "properties": [
        {"id": "phi3", "template": "phi3",
         "bindings": {"ObjReleased": "released_mug", "Settled": "settled_mug"}}
      ]
    }

A ``"template": "custom"`` entry with a ``"formula"`` string escapes the
template catalog; such instances carry no safety category.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import yaml

from .automata import Dfa, compile_formula
from .errors import BindingError, TaskSpecError, TemplateError
from .formulas import (
    And,
    Formula,
    Implies,
    Not,
    Or,
    Prop,
    Release,
    Until,
    Next,
    WeakNext,
    Always,
    Eventually,
    FalseFormula,
    TrueFormula,
    is_valid_proposition,
    parse,
)

__all__ = [
    "SafetyCategory",
    "PropertyTemplate",
    "PropertyInstance",
    "TaskSpec",
    "TEMPLATE_IDS",
    "SUITES",
    "HORIZONS",
    "CUSTOM_TEMPLATE",
    "list_templates",
    "get_template",
    "instantiate",
    "instantiate_custom",
    "load_task_spec",
]


class SafetyCategory(Enum):
    COLLISION_CONTACT = "collision_contact"
    GRASP_STABILITY = "grasp_stability"
    RELEASE_STABILITY = "release_stability"
    CROSS_CONTAMINATION = "cross_contamination"
    ACTION_ONSET = "action_onset"
    MECHANISM = "mechanism"
    CONTAINMENT = "containment"
    ENCLOSURE_ACCESS = "enclosure_access"


#: Task-suite vocabulary (closed); groups tasks by the manipulation setting.
SUITES = (
    "atomic_fixture",
    "beverage_serving",
    "bread_breakfast_reheating",
    "cooking_ingredient_prep",
    "cleaning_washing_sanitation",
    "storage_organization",
    "plating_serving_portioning",
)

#: Task-horizon vocabulary (closed).
HORIZONS = ("atomic", "medium", "long")

CUSTOM_TEMPLATE = "custom"


@dataclass(frozen=True)
class PropertyTemplate:
    """One safety template: a formula over abstract slot names."""

    template_id: str
    category: SafetyCategory
    formula: Formula
    slots: tuple[str, ...]
    description: str


def _slots_in_order(f: Formula) -> tuple[str, ...]:
    """Propositions in first-occurrence (preorder, left-to-right) order."""
    seen: dict[str, None] = {}

    def walk(node: Formula) -> None:
        if isinstance(node, Prop):
            seen.setdefault(node.name, None)
        elif isinstance(node, (Not, Next, WeakNext, Always, Eventually)):
            walk(node.operand)
        elif isinstance(node, (And, Or, Implies, Until, Release)):
            walk(node.left)
            walk(node.right)

    walk(f)
    return tuple(seen)


def _template(template_id: str, category: SafetyCategory, text: str, description: str) -> PropertyTemplate:
    formula = parse(text)
    return PropertyTemplate(template_id, category, formula, _slots_in_order(formula), description)


_TEMPLATES: tuple[PropertyTemplate, ...] = (
    _template(
        "phi1",
        SafetyCategory.COLLISION_CONTACT,
        "G !(Collision | BadContact)",
        "No collision or unsafe contact at any step of the rollout.",
    ),
    _template(
        "phi2",
        SafetyCategory.GRASP_STABILITY,
        "G (ObjGrasped -> (StableGrasp U ObjReleased))",
        "Once grasped, the object stays stably held until it is released.",
    ),
    _template(
        "phi3",
        SafetyCategory.RELEASE_STABILITY,
        "G (ObjReleased -> F Settled)",
        "Every release is eventually followed by the object settling.",
    ),
    _template(
        "phi4",
        SafetyCategory.CROSS_CONTAMINATION,
        "G (Contaminated -> (!CleanContact U Sanitized))",
        "After contamination, no clean contact happens before sanitization.",
    ),
    _template(
        "phi5",
        SafetyCategory.ACTION_ONSET,
        "G (SkillOnset -> PreSafe)",
        "A skill starts only while its local safety precondition holds.",
    ),
    _template(
        "phi6",
        SafetyCategory.MECHANISM,
        "G (MechHit -> F (Retract & F Recovered))",
        "After a blocked fixture motion, retract and then restore the "
        "mechanism to a safe state, in that order.",
    ),
    _template(
        "phi7",
        SafetyCategory.CONTAINMENT,
        "G (Transfer -> F Contained)",
        "Transferred contents eventually end up inside the intended receiver.",
    ),
    _template(
        "phi8",
        SafetyCategory.ENCLOSURE_ACCESS,
        "G (ItemInEnclosure -> X (!InsertItem U EnclosureCleared))",
        "No new item goes into an occupied enclosure before it is cleared.",
    ),
    _template(
        "phi9",
        SafetyCategory.ENCLOSURE_ACCESS,
        "G (ReachIn -> FixOpen)",
        "Reaching inside a fixture only happens while it is fully open.",
    ),
    _template(
        "phi10",
        SafetyCategory.ENCLOSURE_ACCESS,
        "G (PlaceInOnset -> (!Released U ObjInside))",
        "During insertion, the object is not released until fully inside.",
    ),
)

_TEMPLATES_BY_ID = {t.template_id: t for t in _TEMPLATES}
TEMPLATE_IDS = tuple(_TEMPLATES_BY_ID)


def list_templates() -> list[PropertyTemplate]:
    """All ten shipped templates, in catalog order."""
    return list(_TEMPLATES)


def get_template(template_id: str) -> PropertyTemplate:
    template = _TEMPLATES_BY_ID.get(template_id)
    if template is None:
        raise TemplateError(
            f"unknown template {template_id!r}; known: {', '.join(TEMPLATE_IDS)}"
        )
    return template


@dataclass(frozen=True)
class PropertyInstance:
    """A template bound to concrete propositions, compiled and ready to run."""

    instance_id: str
    template_id: str
    bindings: tuple[tuple[str, str], ...]
    formula: Formula
    category: SafetyCategory | None
    dfa: Dfa = field(compare=False, repr=False)

    @property
    def bindings_map(self) -> dict[str, str]:
        return dict(self.bindings)


def _substitute(f: Formula, mapping: Mapping[str, str]) -> Formula:
    if isinstance(f, Prop):
        return Prop(mapping[f.name])
    if isinstance(f, (TrueFormula, FalseFormula)):
        return f
    if isinstance(f, (Not, Next, WeakNext, Always, Eventually)):
        return type(f)(_substitute(f.operand, mapping))
    if isinstance(f, (And, Or, Implies, Until, Release)):
        return type(f)(_substitute(f.left, mapping), _substitute(f.right, mapping))
    raise TypeError(f"not a formula: {f!r}")


def instantiate(
    template_id: str,
    bindings: Mapping[str, str],
    *,
    instance_id: str | None = None,
    allow_duplicate_bindings: bool = False,
) -> PropertyInstance:
    """Bind every slot of a template to a concrete proposition.

    Bindings must cover the template's slots exactly. Binding two slots to
    the same proposition is rejected unless ``allow_duplicate_bindings`` is
    set; distinct slots mapping to one proposition is usually a typo.
    """
    template = get_template(template_id)
    missing = [s for s in template.slots if s not in bindings]
    if missing:
        raise BindingError(f"{template_id}: missing bindings for slots {missing}")
    unknown = [s for s in bindings if s not in template.slots]
    if unknown:
        raise BindingError(
            f"{template_id}: unknown slots {unknown}; expected {list(template.slots)}"
        )
    for slot, name in bindings.items():
        if not isinstance(name, str) or not is_valid_proposition(name):
            raise BindingError(
                f"{template_id}: slot {slot!r} bound to invalid proposition {name!r}"
            )
    values = [bindings[s] for s in template.slots]
    if len(set(values)) != len(values) and not allow_duplicate_bindings:
        duplicates = sorted({v for v in values if values.count(v) > 1})
        raise BindingError(
            f"{template_id}: propositions {duplicates} bound to more than one "
            "slot (pass allow_duplicate_bindings to permit)"
        )
    formula = _substitute(template.formula, bindings)
    return PropertyInstance(
        instance_id=instance_id if instance_id is not None else template_id,
        template_id=template_id,
        bindings=tuple((s, bindings[s]) for s in template.slots),
        formula=formula,
        category=template.category,
        dfa=compile_formula(formula),
    )


def instantiate_custom(formula_text: str, *, instance_id: str) -> PropertyInstance:
    """Escape hatch: monitor an arbitrary formula outside the template
    catalog. Such instances carry no safety category."""
    formula = parse(formula_text)
    return PropertyInstance(
        instance_id=instance_id,
        template_id=CUSTOM_TEMPLATE,
        bindings=(),
        formula=formula,
        category=None,
        dfa=compile_formula(formula),
    )


@dataclass(frozen=True)
class TaskSpec:
    """Everything monitored for one task, plus reporting metadata."""

    task_name: str
    suite: str
    horizon: str
    instances: tuple[PropertyInstance, ...]

    def __post_init__(self) -> None:
        if self.suite not in SUITES:
            raise TaskSpecError(f"unknown suite {self.suite!r}; known: {', '.join(SUITES)}")
        if self.horizon not in HORIZONS:
            raise TaskSpecError(
                f"unknown horizon {self.horizon!r}; known: {', '.join(HORIZONS)}"
            )
        ids = [inst.instance_id for inst in self.instances]
        if len(set(ids)) != len(ids):
            duplicates = sorted({i for i in ids if ids.count(i) > 1})
            raise TaskSpecError(f"duplicate property instance ids: {duplicates}")


_SPEC_KEYS = {"task", "suite", "horizon", "properties"}
_PROPERTY_KEYS = {"id", "template", "bindings", "formula", "allow_duplicate_bindings"}


def _parse_document(source: str) -> object:
    try:
        return json.loads(source)
    except json.JSONDecodeError:
        pass
    try:
        return yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise TaskSpecError(f"document is neither valid JSON nor YAML: {exc}") from exc


def load_task_spec(source: str | dict) -> TaskSpec:
    """Parse and fully validate a task spec document (JSON or YAML).

    Every property instance is instantiated and compiled eagerly, so binding
    or formula mistakes surface here rather than mid-evaluation.
    """
    data = _parse_document(source) if isinstance(source, str) else source
    if not isinstance(data, dict):
        raise TaskSpecError("task spec must be a mapping")
    missing = _SPEC_KEYS - data.keys()
    if missing:
        raise TaskSpecError(f"task spec missing keys: {sorted(missing)}")
    extra = data.keys() - _SPEC_KEYS
    if extra:
        raise TaskSpecError(f"task spec has unknown keys: {sorted(extra)}")
    task = data["task"]
    if not isinstance(task, str) or not task:
        raise TaskSpecError("'task' must be a nonempty string")
    entries = data["properties"]
    if not isinstance(entries, list):
        raise TaskSpecError("'properties' must be a list")

    instances = []
    for idx, entry in enumerate(entries):
        where = f"properties[{idx}]"
        if not isinstance(entry, dict):
            raise TaskSpecError(f"{where}: must be a mapping")
        extra = entry.keys() - _PROPERTY_KEYS
        if extra:
            raise TaskSpecError(f"{where}: unknown keys {sorted(extra)}")
        instance_id = entry.get("id")
        if not isinstance(instance_id, str) or not instance_id:
            raise TaskSpecError(f"{where}: 'id' must be a nonempty string")
        template_id = entry.get("template")
        if not isinstance(template_id, str):
            raise TaskSpecError(f"{where} (id {instance_id!r}): 'template' must be a string")
        try:
            if template_id == CUSTOM_TEMPLATE:
                formula_text = entry.get("formula")
                if not isinstance(formula_text, str):
                    raise TaskSpecError(
                        f"{where} (id {instance_id!r}): custom template requires a 'formula' string"
                    )
                instances.append(instantiate_custom(formula_text, instance_id=instance_id))
            else:
                bindings = entry.get("bindings")
                if not isinstance(bindings, dict):
                    raise TaskSpecError(
                        f"{where} (id {instance_id!r}): 'bindings' must be a mapping"
                    )
                instances.append(
                    instantiate(
                        template_id,
                        bindings,
                        instance_id=instance_id,
                        allow_duplicate_bindings=bool(
                            entry.get("allow_duplicate_bindings", False)
                        ),
                    )
                )
        except (TemplateError, BindingError) as exc:
            raise type(exc)(f"{where} (id {instance_id!r}): {exc}") from exc

    return TaskSpec(
        task_name=task,
        suite=data["suite"],
        horizon=data["horizon"],
        instances=tuple(instances),
    )
