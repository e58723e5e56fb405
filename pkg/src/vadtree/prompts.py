"""Prompt texts, built-in prior profiles and prompt rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from .errors import InvalidInput

DESCRIBE_PROMPT = "Please describe the content in the video in detail."

SCORING_CRITERIA = (
    "How would you rate the scene described on a scale from 0 to 1, with 0 representing "
    "a standard scene and 1 denoting a scene with suspicious or potentially criminal activities?"
)
OUTPUT_FORMAT = (
    "Please provide the response in the form of a Python list and respond with only one number "
    "in the provided list below [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0] without "
    "any textual explanation. It should begin with `[' and end with `]'."
)

_PRIOR_HEAD = (
    "To help video anomaly detection agent review the occurrence of abnormal events, it is now "
    "necessary to pre-analyze possible anomalies to establish a prior knowledge base that matches "
    "abnormal events. The video taken has no sound, and may have a long distance or a blurry "
    "picture."
)
_PRIOR_TAIL = (
    "Please carefully analyze these scenes. Then point out the characteristics of each abnormal "
    "event from the following three perspectives: the scene environment, characters or specific "
    "objects, actions or behaviors that occurred."
)
# Not part of the dataset prompts; appended only to custom event lists.
_CUE_CONSTRAINT = (
    "Do not rely on micro-expressions or other details that need a very high image resolution, "
    "and do not rely on sounds or any other audio cues."
)

UCF_EVENTS = ("Abuse", "Arrest", "Arson", "Assault", "Burglary", "Explosion", "Fighting",
              "RoadAccidents", "Robbery", "Shooting", "Shoplifting", "Stealing", "Vandalism")
XD_EVENTS = ("Abuse", "Explosion", "Fighting", "Car Accident", "Shooting", "Riot")


def _event_phrase(events: Sequence[str]) -> str:
    events = list(events)
    if len(events) == 1:
        joined = events[0]
    else:
        joined = ", ".join(events[:-1]) + " and " + events[-1]
    return f"There may be {joined} {len(events)} types of events."


PRIOR_GENERATION_PROMPTS = {
    "ucf-crime": f"{_PRIOR_HEAD} {_event_phrase(UCF_EVENTS)} {_PRIOR_TAIL}",
    "xd-violence": f"{_PRIOR_HEAD} {_event_phrase(XD_EVENTS)} {_PRIOR_TAIL}",
}


@dataclass(frozen=True)
class PriorRow:
    event_type: str
    scene_features: str
    object_features: str
    action_features: str

    def __post_init__(self):
        for name in ("event_type", "scene_features", "object_features", "action_features"):
            if not str(getattr(self, name)).strip():
                raise InvalidInput(f"prior row field '{name}' is empty")


@dataclass(frozen=True)
class PriorProfile:
    name: str
    entries: Tuple[PriorRow, ...] = ()
    notes: Tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "entries": [[r.event_type, r.scene_features, r.object_features, r.action_features]
                        for r in self.entries],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PriorProfile":
        rows = []
        for i, row in enumerate(data.get("entries", [])):
            if isinstance(row, dict):
                row = [row.get(k, "") for k in
                       ("event_type", "scene_features", "object_features", "action_features")]
            if len(row) != 4:
                raise InvalidInput(f"prior entry {i} must have 4 columns, got {len(row)}")
            rows.append(PriorRow(*(str(x) for x in row)))
        return cls(str(data.get("name", "custom")), tuple(rows), tuple(data.get("notes", ())))


def load_prior_profile(path) -> PriorProfile:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"{path}: cannot read prior profile ({exc})") from exc
    return PriorProfile.from_dict(data)


UCF_CRIME_PRIORS = PriorProfile("ucf-crime", (
    PriorRow("Abuse",
             "Secluded spaces (indoors/corners), non-public areas (private locations)",
             "Two parties in physical conflict (perpetrator/victim), dragging tools (ropes/clubs)",
             "Shoving/dragging, repeated hitting, restraining movement (pinning down)"),
    PriorRow("Arrest",
             "Public areas (streets/squares), zones with police vehicles or officers",
             "Uniformed police, handcuffs, batons or firearms",
             "Forced restraint, frisking, escorting to vehicles, lying on the ground"),
    PriorRow("Arson",
             "Areas with flammable materials (warehouses/vehicles), abnormal smoke/flames",
             "Individuals holding flammable containers (gasoline bottles), ignition tools (lighters)",
             "Throwing incendiary objects, fleeing quickly, repeatedly checking the fire"),
    PriorRow("Assault",
             "Narrow passages, crowded areas with sudden dispersion (subway stations/bar entrances)",
             "Armed individuals (knives/blunt weapons), victims struggling on the ground",
             "Sudden lunging, weapon swinging, victims adopting defensive postures"),
    PriorRow("Burglary",
             "Damaged doors/windows, unlit buildings at night, surveillance blind spots (back alleys)",
             "Masked/dark-clothed individuals, lock-picking tools (pliers), backpacks (for loot)",
             "Peering through windows, picking locks, rummaging through items"),
    PriorRow("Explosion",
             "Smoke spreading, flying debris, crowds fleeing outward from a central point",
             "Suspicious packages/vehicles, post-explosion wreckage (metal fragments)",
             "Throwing motions, sudden flash of flames, crowds crouching/running"),
    PriorRow("Fighting",
             "Public spaces (restaurants/stadiums) with concentrated physical conflicts, "
             "overturned furniture",
             "Multiple people entangled, bleeding faces, torn clothing",
             "Punching/kicking, hair-pulling, siege"),
    PriorRow("Road Accidents",
             "Collision points (intersections/curves), skid marks, scattered debris, "
             "traffic congestion",
             "Deformed vehicles, deployed airbags, paramedics (uniforms/stretchers)",
             "Sudden braking, vehicle rollovers, pedestrians being hit"),
    PriorRow("Robbery",
             "Streets/ATM areas, fast-moving vehicles (motorcycles/cars)",
             "Threats with guns/knives, motorcycle helmets (face concealment), stolen items (bags)",
             "Snatching and fleeing, threatening gestures, vehicles abruptly stopping/accelerating"),
    PriorRow("Shooting",
             "Crowds suddenly ducking/fleeing, vehicles braking abruptly, bullet holes in windows",
             "Gun-wielding individuals, gunshot victims falling, spent shell casings",
             "Aiming firearms, continuous firing, seeking cover"),
    PriorRow("Shoplifting",
             "Loitering near shelves, surveillance blind spots (corners), "
             "suspicious concealment (coats)",
             "Frequently observing staff, hiding items (in bags/under clothing)",
             "Concealing items in clothing, glancing around nervously, quickly leaving shelves"),
    PriorRow("Stealing",
             "Crowded areas (subways/markets), sudden disappearance of target items "
             "(wallets/phones)",
             "Close proximity to victims, distractions (e.g., bumping), rapid transfer of "
             "stolen goods",
             "Pickpocketing (hands reaching into pockets), passing loot to accomplices"),
    PriorRow("Vandalism",
             "Graffiti-covered walls, shattered glass, toppled public facilities (trash cans/fences)",
             "Spray paint cans, hammers/stones, targets (cameras/glass)",
             "Smashing motions, spraying walls, kicking facilities"),
), (
    "Table Notes:",
    "1. Scene environment features capture spatial anomalies (e.g., secluded corners) and "
    "physical damage patterns",
    "2. Character/object features focus on suspicious entities and high-risk items",
    "3. Action/behavior features characterize motion dynamics critical for low-quality "
    "video analysis",
    "Recognition Tips:",
    "1. Blurry footage: Track group behavior changes (crowd fleeing patterns)",
    "2. Long-distance: Monitor environmental dynamics (smoke/glass shattering)",
    "3. Silent videos: Analyze action intensity (repeated hitting motions)",
))

XD_VIOLENCE_PRIORS = PriorProfile("xd-violence", (
    PriorRow("Abuse",
             "Secluded or private settings (alleyways, dimly lit rooms), lack of bystanders",
             "Dominant/submissive individuals with indistinct blunt objects (belts, sticks)",
             "Sudden aggressive movements (hitting/grabbing), victim recoiling/fleeing, "
             "prolonged physical contact"),
    PriorRow("Explosion",
             "Sudden bright flash with smoke/fire, structural damage (collapsed walls)",
             "Chaotically moving people, objects near blast source (vehicles, trash bins)",
             "Rapid light/smoke expansion, crowd scattering, lingering smoke/flames"),
    PriorRow("Fighting",
             "Public areas with bystanders (streets, bars), overturned furniture",
             "Aggressive postures, broken objects nearby (bottles, chairs)",
             "Repetitive punching/kicking, high-intensity movements, bystander reactions"),
    PriorRow("Car Accident",
             "Roads with sudden traffic stops, skid marks/debris (broken glass)",
             "Collided vehicles (distorted shapes), injured individuals",
             "Rapid deceleration/impact, post-crash behaviors (crowd gathering, emergency services)"),
    PriorRow("Shooting",
             "Public spaces with visible escape routes (malls, streets)",
             "Shooter's stance (arm extended), collapsing victims",
             "Crowd panic (ducking/sprinting), post-shooting patterns (bodies, law enforcement)"),
    PriorRow("Riot",
             "Large crowds with fires/smoke, broken infrastructure (smashed windows)",
             "Protesters with makeshift weapons, riot police/armored vehicles",
             "Group violence (throwing objects), chaotic dispersal patterns (wave-like movements)"),
), (
    "Low-quality Analysis Guidelines:",
    "- Focus on movement patterns (sudden scattering/aggressive postures)",
    "- Detect environmental changes (smoke/debris) over fine details",
    "- Analyze group dynamics (crowd panic/clustering)",
    "- Prioritize spatiotemporal anomalies (light flashes/vehicle stops)",
))

BUILTIN_PRIORS = {p.name: p for p in (UCF_CRIME_PRIORS, XD_VIOLENCE_PRIORS)}
EMPTY_PRIORS = PriorProfile("none")


def get_prior_profile(name_or_path) -> PriorProfile:
    """Built-in profile by name, ``none`` for no priors, otherwise a JSON file."""
    if name_or_path in (None, "", "none"):
        return EMPTY_PRIORS
    key = str(name_or_path).lower()
    if key in BUILTIN_PRIORS:
        return BUILTIN_PRIORS[key]
    return load_prior_profile(name_or_path)


def render_prior_prompt(request: Union[str, Sequence[str]]) -> str:
    """Prior-generation prompt for a known dataset name or a custom event list."""
    if isinstance(request, str):
        key = request.strip().lower()
        if key in PRIOR_GENERATION_PROMPTS:
            return PRIOR_GENERATION_PROMPTS[key]
        events = [e.strip() for e in request.split(",") if e.strip()]
    else:
        events = [str(e).strip() for e in request if str(e).strip()]
    if not events:
        raise InvalidInput("prior prompt needs a dataset name or at least one event type")
    return f"{_PRIOR_HEAD} {_CUE_CONSTRAINT} {_event_phrase(events)} {_PRIOR_TAIL}"


def render_caption_prompt(priors: PriorProfile = EMPTY_PRIORS) -> str:
    if priors is None or not priors.entries:
        return DESCRIBE_PROMPT
    lines = [
        "Prior knowledge of possible abnormal events:",
        "Abnormal Event Type | Scene Environment Features | Character/Object Features | "
        "Action/Behavior Features",
    ]
    lines += [f"{r.event_type} | {r.scene_features} | {r.object_features} | {r.action_features}"
              for r in priors.entries]
    lines += list(priors.notes)
    return "\n".join(lines) + "\n\n" + DESCRIBE_PROMPT


def render_score_prompt(caption: str) -> str:
    if caption is None or not caption.strip():
        raise InvalidInput("score prompt needs a non-empty caption")
    return f"{caption}\n\n{SCORING_CRITERIA} {OUTPUT_FORMAT}"


def prompt_catalog() -> List[str]:
    return sorted(PRIOR_GENERATION_PROMPTS)
