import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promogen.errors import BadWidth, InvalidMotion, NonFinite, TooShort
from promogen.motion import (
    AnchorSet,
    MotionSequence,
    Skeleton,
    Trajectory,
    default_skeleton,
    extract_trajectory,
    gather_anchors,
    joint_world_positions,
    load_pmg,
    load_trajectory_csv,
    save_pmg,
    save_trajectory_csv,
    validate,
)


def make_motion(n=8, seed=0, fps=20.0):
    rng = np.random.default_rng(seed)
    skel = default_skeleton()
    feats = rng.normal(size=(n, skel.feature_dim))
    return MotionSequence(features=feats, fps=fps, skeleton=skel)


def test_default_skeleton_shape():
    skel = default_skeleton()
    assert skel.n_joints == 22
    assert skel.feature_dim == 66
    assert skel.parents[0] == -1
    assert set(skel.foot_joints) == {10, 11}
    # every non-root parent precedes its child
    for j, p in enumerate(skel.parents):
        if j > 0:
            assert 0 <= p < j


def test_skeleton_rejects_bad_parents():
    with pytest.raises(InvalidMotion):
        Skeleton(parents=(0, 0))
    with pytest.raises(InvalidMotion):
        Skeleton(parents=(-1, 2, 1))
    with pytest.raises(InvalidMotion):
        Skeleton(parents=(-1, 0), foot_joints=(5,))


def test_motion_validation():
    skel = default_skeleton()
    with pytest.raises(InvalidMotion):
        MotionSequence(features=np.zeros((4, 10)), fps=20.0, skeleton=skel)
    with pytest.raises(InvalidMotion):
        MotionSequence(features=np.zeros((0, 66)), fps=20.0, skeleton=skel)
    with pytest.raises(InvalidMotion):
        MotionSequence(features=np.zeros(66), fps=20.0, skeleton=skel)
    bad = np.zeros((4, 66))
    bad[2, 5] = np.nan
    with pytest.raises(InvalidMotion):
        MotionSequence(features=bad, fps=20.0, skeleton=skel)
    with pytest.raises(InvalidMotion):
        MotionSequence(features=np.zeros((4, 66)), fps=0.0, skeleton=skel)


def test_motion_is_immutable():
    m = make_motion()
    with pytest.raises(ValueError):
        m.features[0, 0] = 1.0


def test_anchor_validation():
    with pytest.raises(InvalidMotion):
        AnchorSet(positions=np.array([3, 3]), poses=np.zeros((2, 63)), n_frames=8)
    with pytest.raises(InvalidMotion):
        AnchorSet(positions=np.array([5, 2]), poses=np.zeros((2, 63)), n_frames=8)
    with pytest.raises(InvalidMotion):
        AnchorSet(positions=np.array([0, 8]), poses=np.zeros((2, 63)), n_frames=8)
    with pytest.raises(InvalidMotion):
        AnchorSet(positions=np.array([-1]), poses=np.zeros((1, 63)), n_frames=8)
    with pytest.raises(InvalidMotion):
        AnchorSet(positions=np.array([0, 1]), poses=np.zeros((3, 63)), n_frames=8)
    empty = AnchorSet(positions=np.array([], dtype=np.int64),
                      poses=np.zeros((0, 63)), n_frames=8)
    assert empty.count == 0


def test_world_positions_small_case():
    # two frames, hand-checked: root is the pelvis, others are pelvis+offset
    skel = default_skeleton()
    feats = np.zeros((2, 66))
    feats[0, :3] = [1.0, 2.0, 3.0]
    feats[0, 3:6] = [0.5, -0.5, 0.25]      # joint 1 offset
    feats[1, :3] = [-1.0, 0.0, 4.0]
    feats[1, 63:66] = [0.0, 1.0, 0.0]      # joint 21 offset
    m = MotionSequence(features=feats, fps=20.0, skeleton=skel)
    w = joint_world_positions(m)
    assert w.shape == (2, 22, 3)
    np.testing.assert_allclose(w[0, 0], [1.0, 2.0, 3.0])
    np.testing.assert_allclose(w[0, 1], [1.5, 1.5, 3.25])
    np.testing.assert_allclose(w[0, 2], [1.0, 2.0, 3.0])  # zero offset
    np.testing.assert_allclose(w[1, 21], [-1.0, 1.0, 4.0])


def test_extract_trajectory_matches_pelvis_track():
    m = make_motion(n=12, seed=1)
    traj = extract_trajectory(m)
    assert traj.n_frames == 12
    np.testing.assert_array_equal(traj.positions, m.features[:, :3])
    np.testing.assert_array_equal(joint_world_positions(m)[:, 0], traj.positions)


def test_gather_anchors_rows():
    m = make_motion(n=10, seed=2)
    anchors = gather_anchors(m, np.array([1, 4, 9]))
    assert anchors.count == 3
    assert anchors.n_frames == 10
    np.testing.assert_array_equal(anchors.poses, m.features[[1, 4, 9], 3:])


@settings(deadline=None, max_examples=25)
@given(
    seed=st.integers(0, 10_000),
    shift=st.tuples(
        st.floats(-50, 50, allow_nan=False),
        st.floats(-50, 50, allow_nan=False),
        st.floats(-50, 50, allow_nan=False),
    ),
)
def test_translation_equivariance(seed, shift):
    # translating the pelvis track translates every joint by the same vector
    # and leaves anchor poses untouched
    m = make_motion(n=6, seed=seed)
    shifted = np.array(m.features)
    shifted[:, :3] += np.asarray(shift)
    m2 = MotionSequence(features=shifted, fps=m.fps, skeleton=m.skeleton)
    w1 = joint_world_positions(m)
    w2 = joint_world_positions(m2)
    np.testing.assert_allclose(w2, w1 + np.asarray(shift)[None, None, :], atol=1e-9)
    pos = np.array([0, 3, 5])
    np.testing.assert_array_equal(
        gather_anchors(m, pos).poses, gather_anchors(m2, pos).poses
    )


def test_pmg_round_trip(tmp_path):
    m = make_motion(n=7, seed=3, fps=20.0)
    p = tmp_path / "a.pmg"
    save_pmg(m, str(p))
    back = load_pmg(str(p))
    assert back.n_frames == 7
    assert back.fps == 20.0
    # storage is float32, so the first round trip quantizes once...
    np.testing.assert_array_equal(
        back.features, m.features.astype(np.float32).astype(np.float64)
    )
    # ...and a second round trip is exact
    p2 = tmp_path / "b.pmg"
    save_pmg(back, str(p2))
    again = load_pmg(str(p2))
    np.testing.assert_array_equal(again.features, back.features)
    assert p.read_bytes() == p2.read_bytes()


def test_pmg_rejects_corrupt_files(tmp_path):
    m = make_motion(n=4)
    p = tmp_path / "a.pmg"
    save_pmg(m, str(p))
    raw = p.read_bytes()
    truncated = tmp_path / "t.pmg"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(InvalidMotion):
        load_pmg(str(truncated))
    bad_header = tmp_path / "h.pmg"
    bad_header.write_bytes(b"not json\n" + raw.split(b"\n", 1)[1])
    with pytest.raises(InvalidMotion):
        load_pmg(str(bad_header))
    wrong_version = tmp_path / "v.pmg"
    header, body = raw.split(b"\n", 1)
    wrong_version.write_bytes(header.replace(b'"version": 1', b'"version": 9') + b"\n" + body)
    with pytest.raises(InvalidMotion):
        load_pmg(str(wrong_version))


def test_trajectory_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    traj = Trajectory(positions=rng.normal(size=(9, 3)), fps=20.0)
    p = tmp_path / "traj.csv"
    save_trajectory_csv(traj, str(p))
    assert p.read_text().splitlines()[0] == "frame,x,y,z"
    back = load_trajectory_csv(str(p), fps=20.0)
    np.testing.assert_array_equal(back.positions, traj.positions)


def test_trajectory_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y,z\n0.0,0.0,0.0\n")
    with pytest.raises(InvalidMotion):
        load_trajectory_csv(str(p), fps=20.0)


class FakeMotion:
    """Duck-typed stand-in so validate() can see data the constructor
    would have rejected."""

    def __init__(self, features, fps=20.0, skeleton=None):
        self.features = features
        self.fps = fps
        self.skeleton = skeleton or default_skeleton()


def test_validate_accepts_valid_motion():
    m = make_motion(n=64)
    assert validate(m) is m


def test_validate_rejects_nan():
    feats = np.zeros((8, default_skeleton().feature_dim))
    feats[3, 5] = np.nan
    with pytest.raises(NonFinite):
        validate(FakeMotion(feats))


def test_validate_rejects_single_frame():
    feats = np.zeros((1, default_skeleton().feature_dim))
    with pytest.raises(TooShort):
        validate(FakeMotion(feats))


def test_validate_rejects_wrong_width():
    with pytest.raises(BadWidth):
        validate(FakeMotion(np.zeros((8, 7))))
