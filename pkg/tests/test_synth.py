import math

import pytest

from drivekit.errors import ParamError
from drivekit.relations import compute_relations
from drivekit.interactions import InteractionKind, label_interactions
from drivekit.scene import (
    NavigationCommand,
    Pose2,
    ScenarioKind,
    load_scene,
    save_scene,
    wrap_angle,
)
from drivekit.synth import (
    corpus_manifest,
    synth_corpus,
    synth_scene,
    synth_three_point_turn,
    three_point_turn_duration,
)

ALL_KINDS = [
    "NOMINAL",
    "THREE_POINT_TURN",
    "RESUME_FROM_STOP",
    "OVERTAKE_ONCOMING",
    "CONSTRUCTION_ZONE",
]


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_all_kinds_validate_and_roundtrip(kind):
    scene = synth_scene(kind, 0)
    assert scene.scenario_tag is ScenarioKind(kind)
    assert load_scene(save_scene(scene)) == scene


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_determinism_byte_identical(kind):
    a = save_scene(synth_scene(kind, 12))
    b = save_scene(synth_scene(kind, 12))
    assert a == b
    c = save_scene(synth_scene(kind, 13))
    assert c != a


def test_nominal_has_no_events(config):
    scene = synth_scene("NOMINAL", 8)
    rel = compute_relations(scene, config)
    assert set(rel.nav_commands) == {NavigationCommand.KEEP_FORWARD}
    from drivekit.relations import EgoLaneDecision

    assert set(rel.ego_decisions) == {EgoLaneDecision.KEEP_LANE}
    assert label_interactions(scene, rel, config) == []


def test_three_point_turn_net_heading_and_reversal():
    scene = synth_scene("THREE_POINT_TURN", 21)
    headings = [st.pose.heading for st in scene.ego.states]
    net = sum(wrap_angle(b - a) for a, b in zip(headings, headings[1:]))
    assert abs(net - math.pi) < math.radians(5.0)
    assert any(st.speed < -0.2 for st in scene.ego.states)


def test_three_point_turn_primitive_closed_form():
    states = synth_three_point_turn(Pose2(0.0, 0.0, 0.3))
    # net heading change is exactly pi by arc composition
    assert abs(wrap_angle(states[-1][3] - 0.3 - math.pi)) < 1e-2
    speeds = [s[4] for s in states]
    assert any(v < 0 for v in speeds)  # reversal phase present
    assert speeds[0] > 0 and speeds[-1] > 0
    # duration bookkeeping matches the sampled sequence
    assert states[-1][0] <= three_point_turn_duration() + 0.5


def test_three_point_turn_param_validation():
    with pytest.raises(ParamError):
        synth_three_point_turn(Pose2(0, 0, 0), {"radius1": -1.0})
    with pytest.raises(ParamError):
        synth_three_point_turn(Pose2(0, 0, 0), {"v2": 2.0})
    with pytest.raises(ParamError):
        synth_three_point_turn(Pose2(0, 0, 0), {"arc1_deg": 140.0, "arc2_deg": 50.0})
    with pytest.raises(ParamError):
        synth_scene("THREE_POINT_TURN", 0, {"bogus": 1})


def test_nav_closure_on_three_point_turn(config):
    scene = synth_scene("THREE_POINT_TURN", 33)
    rel = compute_relations(scene, config)
    assert NavigationCommand.THREE_POINT_TURN_LEFT in rel.nav_commands


@pytest.mark.parametrize(
    "kind,expected",
    [
        ("CONSTRUCTION_ZONE", InteractionKind.BYPASS_CONES),
        ("RESUME_FROM_STOP", InteractionKind.YIELD_TO_PEDESTRIAN),
        ("OVERTAKE_ONCOMING", InteractionKind.OVERTAKE_LANE_CHANGE),
    ],
)
def test_interaction_closure_per_kind(config, kind, expected):
    for seed in range(5):
        scene = synth_scene(kind, seed)
        rel = compute_relations(scene, config)
        kinds = {l.kind for l in label_interactions(scene, rel, config)}
        assert expected in kinds, (kind, seed)


def test_resume_scene_speed_profile():
    scene = synth_scene("RESUME_FROM_STOP", 4)
    speeds = [st.speed for st in scene.ego.states]
    stopped = [i for i, v in enumerate(speeds) if abs(v) < 0.3]
    assert stopped and stopped[0] > 0 and stopped[-1] < len(speeds) - 1
    assert speeds[stopped[-1] + 1] >= 0.3  # resumes after the hold


def test_corpus_manifest_fractions():
    manifest = corpus_manifest({"THREE_POINT_TURN": 40, "NOMINAL": 33293})
    assert manifest["total"] == 33333
    frac = manifest["kinds"]["THREE_POINT_TURN"]["fraction"]
    assert abs(frac - 0.0012) < 1e-4
    assert manifest["kinds"]["NOMINAL"]["seed_range"] == [0, 33292]
    assert manifest["kinds"]["THREE_POINT_TURN"]["seed_range"] == [33293, 33332]


def test_corpus_manifest_hash_stable():
    a = corpus_manifest({"NOMINAL": 3, "CONSTRUCTION_ZONE": 2}, base_seed=7)
    b = corpus_manifest({"CONSTRUCTION_ZONE": 2, "NOMINAL": 3}, base_seed=7)
    assert a["manifest_hash"] == b["manifest_hash"]
    c = corpus_manifest({"NOMINAL": 3, "CONSTRUCTION_ZONE": 2}, base_seed=8)
    assert c["manifest_hash"] != a["manifest_hash"]


def test_empty_corpus():
    scenes, manifest = synth_corpus({})
    assert scenes == [] and manifest["total"] == 0


def test_corpus_materializes_with_sequential_seeds():
    scenes, manifest = synth_corpus({"NOMINAL": 2, "THREE_POINT_TURN": 1}, base_seed=5)
    assert len(scenes) == 3
    ids = [s.id for s in scenes]
    assert ids == ["nominal-000005", "nominal-000006", "three_point_turn-000007"]
    again, manifest2 = synth_corpus({"NOMINAL": 2, "THREE_POINT_TURN": 1}, base_seed=5)
    assert [save_scene(s) for s in scenes] == [save_scene(s) for s in again]
    assert manifest["manifest_hash"] == manifest2["manifest_hash"]
