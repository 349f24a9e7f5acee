"""Rollout ingestion, validation, and scripted synthetic scenarios.

A rollout is one finite policy execution: a symbolic trace (per step, the set
of true propositions) plus a task-success flag and labels. The on-disk form
is JSON::

    {
      "rollout_id": "clean_pick_place-0003",
      "task": "place_mug_on_shelf",
      "policy": "scripted",
      "success": true,
      "declared_props": ["collision", "grasped_mug", ...],
      "trace": [["grasped_mug"], ["grasped_mug", "stable_grasp_mug"], ...]
    }

``trace[t]`` lists the propositions true at step ``t`` (sparse form). Dense
boolean maps and explicit ``{"t": ..., "props": [...]}`` step objects are
accepted on input and normalized. When ``declared_props`` is present, any
undeclared proposition in the trace is an error; this guards against binding
typos.

The scenario catalog generates labeled rollouts for every safety category
without any simulator: each scripted scenario provably satisfies or violates
its target property template (verified across seeds in the test suite), and
``random_walk`` produces unlabeled noise traces. ``build_corpus`` writes the
bundled 200-rollout corpus with task specs and a manifest.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import RolloutFormatError, ScenarioError
from .formulas import Trace, is_valid_proposition
from .properties import TaskSpec, load_task_spec

__all__ = [
    "RolloutRecord",
    "Diagnostic",
    "ScenarioParams",
    "ScenarioInfo",
    "SCENARIOS",
    "DETERMINISTIC_SCENARIOS",
    "load_rollout",
    "serialize_rollout",
    "validate_rollout",
    "generate_scenario",
    "scenario_spec_document",
    "scenario_task_spec",
    "corpus_composition",
    "build_corpus",
]


@dataclass(frozen=True)
class RolloutRecord:
    """One rollout: symbolic trace plus success flag and labels."""

    rollout_id: str
    task_name: str
    policy: str
    success: bool
    trace: Trace
    declared_props: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.rollout_id:
            raise RolloutFormatError("rollout_id must be nonempty")
        if self.declared_props is not None:
            declared = set(self.declared_props)
            for t, valuation in enumerate(self.trace):
                undeclared = valuation - declared
                if undeclared:
                    raise RolloutFormatError(
                        f"step {t} uses undeclared propositions: {sorted(undeclared)}"
                    )


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------


def _normalize_step(step, t: int) -> set[str]:
    if isinstance(step, list):
        props = step
    elif isinstance(step, dict):
        props = [p for p, v in step.items() if v is True]
        bad = [p for p, v in step.items() if not isinstance(v, bool)]
        if bad:
            raise RolloutFormatError(f"step {t}: non-boolean values for {sorted(bad)}")
    else:
        raise RolloutFormatError(f"step {t}: expected a list or mapping, got {type(step).__name__}")
    out = set()
    for p in props:
        if not isinstance(p, str) or not is_valid_proposition(p):
            raise RolloutFormatError(f"step {t}: invalid proposition {p!r}")
        out.add(p)
    return out


def _steps_from_document(raw_trace) -> list[set[str]]:
    if not isinstance(raw_trace, list):
        raise RolloutFormatError("'trace' must be a list of steps")
    if not raw_trace:
        raise RolloutFormatError("'trace' must contain at least one step")
    timestep_form = isinstance(raw_trace[0], dict) and "t" in raw_trace[0]
    if not timestep_form:
        return [_normalize_step(step, t) for t, step in enumerate(raw_trace)]

    by_time: dict[int, set[str]] = {}
    for entry in raw_trace:
        if not isinstance(entry, dict) or "t" not in entry:
            raise RolloutFormatError("mixed step forms: every step needs a 't' field here")
        t = entry["t"]
        if not isinstance(t, int) or t < 0:
            raise RolloutFormatError(f"invalid timestep {t!r}")
        if t in by_time:
            raise RolloutFormatError(f"duplicate timestep {t}")
        by_time[t] = _normalize_step(entry.get("props", []), t)
    horizon = max(by_time)
    missing = [t for t in range(horizon + 1) if t not in by_time]
    if missing:
        raise RolloutFormatError(f"missing timesteps: {missing[:5]}")
    return [by_time[t] for t in range(horizon + 1)]


def load_rollout(source: str | dict) -> RolloutRecord:
    """Parse and validate a rollout document (JSON text or parsed mapping)."""
    if isinstance(source, str):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise RolloutFormatError(f"invalid JSON: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise RolloutFormatError("rollout document must be a mapping")
    required = {"rollout_id", "task", "policy", "success", "trace"}
    missing = required - data.keys()
    if missing:
        raise RolloutFormatError(f"rollout missing keys: {sorted(missing)}")
    extra = data.keys() - required - {"declared_props"}
    if extra:
        raise RolloutFormatError(f"rollout has unknown keys: {sorted(extra)}")
    if not isinstance(data["success"], bool):
        raise RolloutFormatError("'success' must be a boolean")
    for key in ("rollout_id", "task", "policy"):
        if not isinstance(data[key], str) or not data[key]:
            raise RolloutFormatError(f"'{key}' must be a nonempty string")
    declared = data.get("declared_props")
    if declared is not None:
        if not isinstance(declared, list) or not all(isinstance(p, str) for p in declared):
            raise RolloutFormatError("'declared_props' must be a list of strings")
        for p in declared:
            if not is_valid_proposition(p):
                raise RolloutFormatError(f"invalid declared proposition {p!r}")
        declared = tuple(sorted(set(declared)))
    steps = _steps_from_document(data["trace"])
    return RolloutRecord(
        rollout_id=data["rollout_id"],
        task_name=data["task"],
        policy=data["policy"],
        success=data["success"],
        trace=Trace(steps),
        declared_props=declared,
    )


def serialize_rollout(r: RolloutRecord) -> str:
    """Canonical JSON rendering: sorted keys, sorted sparse steps, trailing
    newline. Identical records serialize to identical bytes."""
    doc = {
        "rollout_id": r.rollout_id,
        "task": r.task_name,
        "policy": r.policy,
        "success": r.success,
        "trace": [sorted(step) for step in r.trace],
    }
    if r.declared_props is not None:
        doc["declared_props"] = list(r.declared_props)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal finding from cross-checking a rollout against a spec."""

    code: str
    message: str


def validate_rollout(r: RolloutRecord, spec: TaskSpec) -> list[Diagnostic]:
    """Cross-check a rollout against a task spec without mutating either.

    Reports: task-name mismatches, propositions bound in the spec that are
    never observed true (possible grounding gap), and trace propositions no
    monitored instance looks at.
    """
    from .formulas import propositions

    diagnostics = []
    if r.task_name != spec.task_name:
        diagnostics.append(
            Diagnostic(
                "task_mismatch",
                f"rollout task {r.task_name!r} does not match spec task {spec.task_name!r}",
            )
        )
    observed: set[str] = set()
    for valuation in r.trace:
        observed |= valuation
    monitored: set[str] = set()
    for inst in spec.instances:
        monitored |= propositions(inst.formula)
    for p in sorted(monitored - observed):
        diagnostics.append(
            Diagnostic("bound_never_true", f"bound proposition {p!r} never observed true")
        )
    for p in sorted(observed - monitored):
        diagnostics.append(
            Diagnostic("unmonitored_prop", f"trace proposition {p!r} unused by any instance")
        )
    return diagnostics


# ---------------------------------------------------------------------------
# Scenario catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioParams:
    """Parameters for :func:`generate_scenario`.

    ``event_times`` optionally forces propositions on/off at given steps
    after the script runs; this can invalidate the scenario's documented
    label and is meant for hand-tuned test fixtures. ``flip_rate`` only
    affects the ``random_walk`` scenario and the benign noise proposition.
    """

    scenario_id: str
    length: int
    seed: int
    event_times: tuple[tuple[int, str, bool], ...] | None = None
    flip_rate: float = 0.05


@dataclass(frozen=True)
class ScenarioInfo:
    """Catalog entry: script, monitored templates, and the documented label."""

    scenario_id: str
    task_name: str
    suite: str
    horizon: str
    min_length: int
    default_length: int
    success: bool | None  # None: decided per seed (random_walk)
    violates: bool | None  # None: undetermined (random_walk)
    violation_kind: str | None  # "mid" | "end" | None
    target_template: str | None
    properties: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    description: str
    builder: Callable = field(compare=False, repr=False)

    @property
    def categories(self) -> tuple[str, ...]:
        from .properties import get_template

        return tuple(get_template(t).category.value for t, _ in self.properties)


_NOISE_PROP = "arm_moving"


def _noise(rng: random.Random, steps: list[set[str]], rate: float) -> None:
    on = False
    for step in steps:
        if rng.random() < rate:
            on = not on
        if on:
            step.add(_NOISE_PROP)


def _span(steps: list[set[str]], first: int, last: int, prop: str) -> None:
    for t in range(first, last + 1):
        steps[t].add(prop)


def _blank(length: int) -> list[set[str]]:
    return [set() for _ in range(length)]


def _build_clean_pick_place(rng, length, flip_rate):
    steps = _blank(length)
    release_t = length - 4
    settle_t = release_t + 1 + rng.randint(0, 1)
    _span(steps, 2, release_t - 1, "grasped_mug")
    _span(steps, 2, release_t - 1, "stable_grasp_mug")
    steps[release_t].add("released_mug")
    _span(steps, settle_t, length - 1, "settled_mug")
    _noise(rng, steps, flip_rate)
    return steps, True


def _build_grasp_drop(rng, length, flip_rate):
    steps = _blank(length)
    drop_t = 4 + rng.randint(0, 1)
    _span(steps, 2, drop_t, "grasped_bottle")
    _span(steps, 2, drop_t - 1, "stable_grasp_bottle")
    _noise(rng, steps, flip_rate)
    return steps, False


def _build_release_unsettled(rng, length, flip_rate):
    steps = _blank(length)
    release_t = length // 2
    _span(steps, 2, release_t - 1, "grasped_plate")
    steps[release_t].add("released_plate")
    _noise(rng, steps, flip_rate)
    return steps, True


def _build_contamination_then_clean_contact(rng, length, flip_rate):
    steps = _blank(length)
    contact_t = 5 + rng.randint(0, 1)
    _span(steps, 3, length - 1, "contaminated_gripper")
    steps[contact_t].add("clean_contact")
    _noise(rng, steps, flip_rate)
    return steps, True


def _build_contamination_sanitized(rng, length, flip_rate):
    steps = _blank(length)
    sanitize_t = 6 + rng.randint(0, 1)
    _span(steps, 3, sanitize_t - 1, "contaminated_gripper")
    steps[sanitize_t].add("sanitized_gripper")
    steps[sanitize_t + 1].add("clean_contact")
    _noise(rng, steps, flip_rate)
    return steps, True


def _build_onset_unsafe(rng, length, flip_rate):
    steps = _blank(length)
    _span(steps, 1, 2, "burner_clear")
    steps[length // 2].add("place_onset")
    _noise(rng, steps, flip_rate)
    return steps, False


def _build_mechanism_hit_recover(rng, length, flip_rate):
    steps = _blank(length)
    retract_t = 5 + rng.randint(0, 1)
    steps[3].add("mech_hit")
    steps[retract_t].add("retract")
    _span(steps, retract_t + 2, length - 1, "mech_recovered")
    _noise(rng, steps, flip_rate)
    return steps, False


def _build_mechanism_hit_no_recover(rng, length, flip_rate):
    steps = _blank(length)
    steps[3].add("mech_hit")
    steps[5].add("retract")
    _noise(rng, steps, flip_rate)
    return steps, False


def _build_transfer_spill(rng, length, flip_rate):
    steps = _blank(length)
    steps[4].add("transfer_started")
    _span(steps, 5, length - 1, "spilled")
    _noise(rng, steps, flip_rate)
    return steps, False


def _build_transfer_contained(rng, length, flip_rate):
    steps = _blank(length)
    contained_t = 6 + rng.randint(0, 1)
    steps[4].add("transfer_started")
    _span(steps, contained_t, length - 1, "contents_contained")
    _noise(rng, steps, flip_rate)
    return steps, True


def _build_enclosure_double_insert(rng, length, flip_rate):
    steps = _blank(length)
    insert_t = 4 + rng.randint(0, 1)
    steps[2].add("item_in_microwave")
    steps[insert_t].add("insert_new_item")
    _noise(rng, steps, flip_rate)
    return steps, True


def _build_reach_half_open(rng, length, flip_rate):
    steps = _blank(length)
    reach_t = 5 + rng.randint(0, 1)
    _span(steps, 2, 3, "drawer_fully_open")
    steps[reach_t].add("reach_into_drawer")
    _noise(rng, steps, flip_rate)
    return steps, False


def _build_release_outside_enclosure(rng, length, flip_rate):
    steps = _blank(length)
    released_t = 5 + rng.randint(0, 1)
    steps[3].add("insert_onset")
    steps[released_t].add("released_obj")
    _noise(rng, steps, flip_rate)
    return steps, False


_RANDOM_WALK_PROPS = ("collision", "bad_contact", _NOISE_PROP, "gripper_closed", "near_fixture")


def _build_random_walk(rng, length, flip_rate):
    state = {p: False for p in _RANDOM_WALK_PROPS}
    steps = []
    for _ in range(length):
        step = set()
        for p in _RANDOM_WALK_PROPS:
            if rng.random() < flip_rate:
                state[p] = not state[p]
            if state[p]:
                step.add(p)
        steps.append(step)
    return steps, rng.random() < 0.5


def _info(
    scenario_id,
    task_name,
    suite,
    horizon,
    min_length,
    default_length,
    success,
    violates,
    violation_kind,
    target_template,
    properties,
    description,
    builder,
) -> ScenarioInfo:
    return ScenarioInfo(
        scenario_id=scenario_id,
        task_name=task_name,
        suite=suite,
        horizon=horizon,
        min_length=min_length,
        default_length=default_length,
        success=success,
        violates=violates,
        violation_kind=violation_kind,
        target_template=target_template,
        properties=tuple((t, tuple(sorted(b.items()))) for t, b in properties),
        description=description,
        builder=builder,
    )


SCENARIOS: dict[str, ScenarioInfo] = {
    info.scenario_id: info
    for info in (
        _info(
            "clean_pick_place",
            "place_mug_on_shelf",
            "storage_organization",
            "atomic",
            8,
            12,
            True,
            False,
            None,
            None,
            [
                ("phi1", {"Collision": "collision", "BadContact": "bad_contact"}),
                (
                    "phi2",
                    {
                        "ObjGrasped": "grasped_mug",
                        "StableGrasp": "stable_grasp_mug",
                        "ObjReleased": "released_mug",
                    },
                ),
                ("phi3", {"ObjReleased": "released_mug", "Settled": "settled_mug"}),
            ],
            "Nominal pick-and-place: grasp stays stable, release settles, no contact events.",
            _build_clean_pick_place,
        ),
        _info(
            "grasp_drop",
            "carry_bottle",
            "beverage_serving",
            "atomic",
            8,
            12,
            False,
            True,
            "mid",
            "phi2",
            [
                (
                    "phi2",
                    {
                        "ObjGrasped": "grasped_bottle",
                        "StableGrasp": "stable_grasp_bottle",
                        "ObjReleased": "released_bottle",
                    },
                )
            ],
            "Grasp stability breaks before any release: the bottle is dropped mid-carry.",
            _build_grasp_drop,
        ),
        _info(
            "release_unsettled",
            "set_down_plate",
            "plating_serving_portioning",
            "atomic",
            8,
            12,
            True,
            True,
            "end",
            "phi3",
            [("phi3", {"ObjReleased": "released_plate", "Settled": "settled_plate"})],
            "The plate is released but never observed settled before the horizon.",
            _build_release_unsettled,
        ),
        _info(
            "contamination_then_clean_contact",
            "prep_raw_then_plate",
            "cooking_ingredient_prep",
            "medium",
            8,
            20,
            True,
            True,
            "mid",
            "phi4",
            [
                (
                    "phi4",
                    {
                        "Contaminated": "contaminated_gripper",
                        "CleanContact": "clean_contact",
                        "Sanitized": "sanitized_gripper",
                    },
                )
            ],
            "Clean contact happens while the gripper is still contaminated.",
            _build_contamination_then_clean_contact,
        ),
        _info(
            "contamination_sanitized",
            "prep_raw_sanitize_plate",
            "cleaning_washing_sanitation",
            "medium",
            10,
            20,
            True,
            False,
            None,
            "phi4",
            [
                (
                    "phi4",
                    {
                        "Contaminated": "contaminated_gripper",
                        "CleanContact": "clean_contact",
                        "Sanitized": "sanitized_gripper",
                    },
                )
            ],
            "Contamination is sanitized before the next clean contact.",
            _build_contamination_sanitized,
        ),
        _info(
            "onset_unsafe",
            "place_pot_on_burner",
            "cooking_ingredient_prep",
            "atomic",
            8,
            12,
            False,
            True,
            "mid",
            "phi5",
            [("phi5", {"SkillOnset": "place_onset", "PreSafe": "burner_clear"})],
            "The place skill starts while the target burner is occupied.",
            _build_onset_unsafe,
        ),
        _info(
            "mechanism_hit_recover",
            "close_drawer_blocked",
            "atomic_fixture",
            "atomic",
            10,
            12,
            False,
            False,
            None,
            "phi6",
            [
                (
                    "phi6",
                    {"MechHit": "mech_hit", "Retract": "retract", "Recovered": "mech_recovered"},
                )
            ],
            "A blocked drawer motion is retracted and the mechanism recovers; "
            "the task itself is left incomplete.",
            _build_mechanism_hit_recover,
        ),
        _info(
            "mechanism_hit_no_recover",
            "close_cabinet_blocked",
            "atomic_fixture",
            "atomic",
            8,
            12,
            False,
            True,
            "end",
            "phi6",
            [
                (
                    "phi6",
                    {"MechHit": "mech_hit", "Retract": "retract", "Recovered": "mech_recovered"},
                )
            ],
            "After a blocked motion the mechanism retracts but never recovers.",
            _build_mechanism_hit_no_recover,
        ),
        _info(
            "transfer_spill",
            "pour_water_to_cup",
            "beverage_serving",
            "medium",
            8,
            20,
            False,
            True,
            "end",
            "phi7",
            [("phi7", {"Transfer": "transfer_started", "Contained": "contents_contained"})],
            "A transfer starts but the contents never end up contained.",
            _build_transfer_spill,
        ),
        _info(
            "transfer_contained",
            "pour_cereal_to_bowl",
            "bread_breakfast_reheating",
            "medium",
            8,
            20,
            True,
            False,
            None,
            "phi7",
            [("phi7", {"Transfer": "transfer_started", "Contained": "contents_contained"})],
            "A transfer completes with the contents inside the receiver.",
            _build_transfer_contained,
        ),
        _info(
            "enclosure_double_insert",
            "load_microwave",
            "bread_breakfast_reheating",
            "long",
            8,
            30,
            True,
            True,
            "mid",
            "phi8",
            [
                (
                    "phi8",
                    {
                        "ItemInEnclosure": "item_in_microwave",
                        "InsertItem": "insert_new_item",
                        "EnclosureCleared": "microwave_cleared",
                    },
                )
            ],
            "A second item is inserted before the occupied enclosure is cleared.",
            _build_enclosure_double_insert,
        ),
        _info(
            "reach_half_open",
            "fetch_from_drawer",
            "storage_organization",
            "atomic",
            8,
            12,
            False,
            True,
            "mid",
            "phi9",
            [("phi9", {"ReachIn": "reach_into_drawer", "FixOpen": "drawer_fully_open"})],
            "The gripper reaches into a drawer that is no longer fully open.",
            _build_reach_half_open,
        ),
        _info(
            "release_outside_enclosure",
            "stow_in_cabinet",
            "storage_organization",
            "long",
            8,
            30,
            False,
            True,
            "mid",
            "phi10",
            [
                (
                    "phi10",
                    {
                        "PlaceInOnset": "insert_onset",
                        "Released": "released_obj",
                        "ObjInside": "obj_inside_cabinet",
                    },
                )
            ],
            "The object is released halfway in, before being fully inside.",
            _build_release_outside_enclosure,
        ),
        _info(
            "random_walk",
            "random_kitchen_walk",
            "cleaning_washing_sanitation",
            "long",
            1,
            30,
            None,
            None,
            None,
            "phi1",
            [("phi1", {"Collision": "collision", "BadContact": "bad_contact"})],
            "Independent per-step proposition flips at the configured rate; "
            "outcome depends on the seed.",
            _build_random_walk,
        ),
    )
}

#: Scenarios whose satisfy/violate outcome is fixed by the script.
DETERMINISTIC_SCENARIOS = tuple(
    sid for sid, info in SCENARIOS.items() if info.violates is not None
)


def generate_scenario(params: ScenarioParams) -> RolloutRecord:
    """Produce the scripted rollout for a scenario.

    Identical parameters (including the seed) yield byte-identical serialized
    rollouts. Seeds vary benign timing and noise, never the documented
    satisfy/violate outcome.
    """
    info = SCENARIOS.get(params.scenario_id)
    if info is None:
        raise ScenarioError(
            f"unknown scenario {params.scenario_id!r}; known: {', '.join(sorted(SCENARIOS))}"
        )
    if params.length < info.min_length:
        raise ScenarioError(
            f"{params.scenario_id}: length {params.length} too short for the "
            f"scenario's event schedule (minimum {info.min_length})"
        )
    rng = random.Random(f"{params.scenario_id}:{params.seed}")
    steps, success = info.builder(rng, params.length, params.flip_rate)

    declared = {_NOISE_PROP}
    for _, bindings in info.properties:
        declared.update(name for _, name in bindings)
    for step in steps:
        declared.update(step)
    if params.event_times:
        for t, prop, value in params.event_times:
            if not 0 <= t < params.length:
                raise ScenarioError(f"event time {t} outside the trace (length {params.length})")
            if not is_valid_proposition(prop):
                raise ScenarioError(f"invalid event proposition {prop!r}")
            declared.add(prop)
            if value:
                steps[t].add(prop)
            else:
                steps[t].discard(prop)

    return RolloutRecord(
        rollout_id=f"{params.scenario_id}-{params.seed:04d}",
        task_name=info.task_name,
        policy="random-walk" if params.scenario_id == "random_walk" else "scripted",
        success=info.success if info.success is not None else success,
        trace=Trace(steps),
        declared_props=tuple(sorted(declared)),
    )


def scenario_spec_document(scenario_id: str) -> dict:
    """The task spec document (as a plain mapping) matching a scenario."""
    info = SCENARIOS.get(scenario_id)
    if info is None:
        raise ScenarioError(f"unknown scenario {scenario_id!r}")
    return {
        "task": info.task_name,
        "suite": info.suite,
        "horizon": info.horizon,
        "properties": [
            {"id": template_id, "template": template_id, "bindings": dict(bindings)}
            for template_id, bindings in info.properties
        ],
    }


def scenario_task_spec(scenario_id: str) -> TaskSpec:
    """The compiled task spec matching a scenario's generated rollouts."""
    return load_task_spec(scenario_spec_document(scenario_id))


# ---------------------------------------------------------------------------
# Bundled corpus
# ---------------------------------------------------------------------------

_CORPUS_BASE_SEEDS = 15
_CORPUS_EXTRA_CLEAN = 5


def corpus_composition() -> list[tuple[str, int, int]]:
    """The bundled corpus recipe as (scenario_id, seed, length) triples.

    13 label-deterministic scenarios x 15 seeds, plus 5 extra seeds of
    ``clean_pick_place``: 200 rollouts with known per-scenario outcomes.
    """
    triples = []
    for sid in DETERMINISTIC_SCENARIOS:
        info = SCENARIOS[sid]
        for seed in range(_CORPUS_BASE_SEEDS):
            triples.append((sid, seed, info.default_length + seed % 3))
    clean = SCENARIOS["clean_pick_place"]
    for seed in range(_CORPUS_BASE_SEEDS, _CORPUS_BASE_SEEDS + _CORPUS_EXTRA_CLEAN):
        triples.append(("clean_pick_place", seed, clean.default_length + seed % 3))
    return triples


def build_corpus(out_dir: str | Path) -> Path:
    """Write the bundled synthetic corpus under ``out_dir``.

    Layout: ``specs/<scenario>.json``, ``rollouts/<rollout_id>.json``, and a
    ``manifest.json`` pairing each rollout with its task spec (paths relative
    to the manifest). Returns the manifest path. Output is deterministic.
    """
    out = Path(out_dir)
    (out / "specs").mkdir(parents=True, exist_ok=True)
    (out / "rollouts").mkdir(parents=True, exist_ok=True)
    written_specs: set[str] = set()
    pairs = []
    for sid, seed, length in corpus_composition():
        if sid not in written_specs:
            spec_doc = scenario_spec_document(sid)
            (out / "specs" / f"{sid}.json").write_text(
                json.dumps(spec_doc, sort_keys=True, indent=2) + "\n"
            )
            written_specs.add(sid)
        record = generate_scenario(ScenarioParams(scenario_id=sid, length=length, seed=seed))
        rollout_rel = f"rollouts/{record.rollout_id}.json"
        (out / rollout_rel).write_text(serialize_rollout(record))
        pairs.append({"rollout": rollout_rel, "task_spec": f"specs/{sid}.json"})
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"pairs": pairs}, sort_keys=True, indent=2) + "\n")
    return manifest
