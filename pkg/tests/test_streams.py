import itertools
import math

import pytest

from dexmouse.streams import (
    AlignedSample,
    AlignmentError,
    CameraFrameRef,
    IDENTITY_POSE,
    Pose,
    align,
    aligned_to_csv,
    camera_frame_index,
    grid_time,
    mock_pose_source,
    pose_sample,
)

MS = 1_000_000


class TestPose:
    def test_renormalized_on_ingest(self):
        p = Pose((0, 0, 0), (2.0, 0.0, 0.0, 0.0))
        assert p.orientation == (1.0, 0.0, 0.0, 0.0)
        p = Pose((0, 0, 0), (1.0, 1.0, 1.0, 1.0))
        assert math.isclose(sum(c * c for c in p.orientation), 1.0, abs_tol=1e-12)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            Pose((0, 0, 0), (0.0, 0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            Pose((0, 0, 0), (math.nan, 0.0, 0.0, 1.0))

    def test_flat_round_trip(self):
        p = Pose((0.1, -0.2, 0.3), (0.0, 1.0, 0.0, 0.0), t=55)
        assert Pose.from_flat(p.flat(), t=55) == p
        with pytest.raises(ValueError):
            Pose.from_flat([1.0] * 6)

    def test_camera_ref_validation(self):
        CameraFrameRef(0, 0)
        with pytest.raises(ValueError):
            CameraFrameRef(-1, 0)


class TestMockPoseSource:
    def test_static_is_identity_at_rate(self):
        poses = list(itertools.islice(mock_pose_source(seed=1, path_spec="static"), 41))
        assert all(p.position == IDENTITY_POSE.position for p in poses)
        assert all(p.orientation == IDENTITY_POSE.orientation for p in poses)
        assert poses[20].t == 1_000_000_000  # 20 Hz: sample 20 lands at t=1s

    def test_same_seed_identical_streams(self):
        a = list(itertools.islice(mock_pose_source(7, path_spec="circle"), 100))
        b = list(itertools.islice(mock_pose_source(7, path_spec="circle"), 100))
        assert a == b

    def test_different_seed_differs(self):
        a = pose_sample(1, "circle", 3)
        b = pose_sample(2, "circle", 3)
        assert a.position != b.position

    def test_circle_radius_exact(self):
        for k in range(0, 200, 7):
            p = pose_sample(seed=9, path_spec="circle", k=k)
            in_plane = math.hypot(p.position[0], p.position[1])
            assert abs(in_plane - 0.1) <= 1e-9
            assert p.position[2] == 0.0

    def test_quaternions_unit(self):
        for path_spec in ("circle", "sway"):
            for k in range(50):
                p = pose_sample(3, path_spec, k)
                assert math.isclose(
                    sum(c * c for c in p.orientation), 1.0, abs_tol=1e-9
                )

    def test_unknown_path_spec(self):
        with pytest.raises(ValueError, match="path_spec"):
            next(mock_pose_source(0, path_spec="zigzag"))


class TestCameraIndex:
    def test_thirty_hz_over_a_minute(self):
        # 100 Hz loop: a new frame appears on exactly 1800 of 6000 cycles.
        indices = [camera_frame_index(grid_time(k, 100)) for k in range(6000)]
        assert indices[0] == 0
        assert indices[-1] == camera_frame_index(59_990_000_000)
        changes = sum(1 for a, b in zip(indices, indices[1:]) if b != a)
        assert changes + 1 == 1800
        assert all(b - a in (0, 1) for a, b in zip(indices, indices[1:]))


class TestAlign:
    def test_zoh_at_grid(self):
        joints = [(grid_time(k, 100), ("j", k)) for k in range(101)]  # 1 s @ 100 Hz
        pose = [(grid_time(k, 20), ("p", k)) for k in range(21)]
        rows, dropped = align({"joints": joints, "pose": pose}, rate_hz=20)
        assert dropped == 0
        t, row = rows[2]  # t = 0.10 s
        assert t == 100 * MS
        assert row["joints"] == ("j", 10)
        assert row["pose"] == ("p", 2)

    def test_gap_rows_dropped_and_counted(self):
        joints = [(grid_time(k, 100), k) for k in range(101)]
        # 20 Hz pose with a 300 ms hole after t=350ms (samples at 400..650 missing)
        pose = [(grid_time(k, 20), k) for k in range(21) if not 8 <= k <= 13]
        rows, dropped = align({"joints": joints, "pose": pose}, rate_hz=20, max_gap_ms=150)
        # Grid points 0.40-0.50 use the t=0.35 sample (gap <= 150 ms);
        # 0.55, 0.60, 0.65 exceed the budget.
        dropped_times = {550 * MS, 600 * MS, 650 * MS}
        assert dropped == 3
        assert {t for t, _ in rows}.isdisjoint(dropped_times)

    def test_single_stream_native_rate_is_identity(self):
        stream = [(grid_time(k, 100), k * 11) for k in range(50)]
        rows, dropped = align({"only": stream}, rate_hz=100)
        assert dropped == 0
        assert [(t, r["only"]) for t, r in rows] == stream

    def test_causality(self):
        streams = {
            "a": [(5 * MS, "early"), (25 * MS, "late")],
            "b": [(0, "x"), (30 * MS, "y")],
        }
        rows, dropped = align(streams, rate_hz=100, max_gap_ms=1000)
        for t, row in rows:
            if t < 25 * MS:
                assert row["a"] == "early"
        assert dropped == 1  # t=0: stream 'a' has nothing yet

    def test_empty_stream_is_error(self):
        with pytest.raises(AlignmentError, match="empty"):
            align({"joints": []}, rate_hz=20)
        with pytest.raises(AlignmentError):
            align({}, rate_hz=20)

    def test_unordered_stream_is_error(self):
        with pytest.raises(AlignmentError, match="time-ordered"):
            align({"a": [(10, 1), (5, 2)]}, rate_hz=20)

    def test_grid_is_uniform_integer_ns(self):
        assert [grid_time(k, 20) for k in range(4)] == [0, 50 * MS, 100 * MS, 150 * MS]
        assert grid_time(3, 30) == 100_000_000
        assert isinstance(grid_time(7, 30), int)

    def test_pure(self):
        streams = {"a": [(0, 1), (10 * MS, 2)]}
        assert align(streams, 100) == align(streams, 100)


class TestCsvExport:
    def test_documented_column_order(self):
        sample = AlignedSample(
            t=50 * MS,
            ticks=(1, 2, 3, 4, 5, 6),
            robot_targets=(0.25, 0.5),
            tau_cmd=(0.0, 0.0, 10.5, 0.0, 0.0),
            contact=(False, False, True, False, False),
            pose=(0.0,) * 3 + (1.0, 0.0, 0.0, 0.0),
            frame_index=1,
        )
        text = aligned_to_csv([sample])
        header, row = text.strip().split("\n")
        assert header.startswith("t_ns,q0,q1,q2,q3,q4,q5,robot_targets,tau0")
        assert header.endswith("px,py,pz,qw,qx,qy,qz,frame_index")
        fields = row.split(",")
        assert fields[0] == "50000000"
        assert fields[1:7] == ["1", "2", "3", "4", "5", "6"]
        assert fields[7] == "0.25;0.5"
        assert fields[10] == "10.5"
        assert fields[13:18] == ["0", "0", "1", "0", "0"]
        assert fields[-1] == "1"
