import math

import pytest

from dexmouse.assets import list_profiles, profile_path
from dexmouse.firmware import initial_state
from dexmouse.retarget import (
    ClampDiagnostics,
    DeviceRange,
    HandProfile,
    JointMap,
    ProfileError,
    inverse_map,
    load_profile,
    map_channel,
    normalize,
    retarget_all,
)

FIXTURES = ("bluerobin-8dof", "igrisc-11dof", "adroit-30dof")


@pytest.fixture(scope="module")
def profiles() -> dict[str, HandProfile]:
    return {name: load_profile(profile_path(name)) for name in FIXTURES}


def state_at_u(profile: HandProfile, u: float, aa_u: float | None = None):
    """Device state whose FE ticks sit at flexion u on every channel."""
    fe = inverse_map([u] * 5, profile)
    rng = profile.ranges[5]
    ua = u if aa_u is None else aa_u
    aa = rng.q_min + ua * rng.span if not rng.flexion_decreases else rng.q_max - ua * rng.span
    return initial_state(fe, round(aa))


RANGE = DeviceRange(1000, 3000, flexion_decreases=True)


class TestNormalize:
    def test_endpoints_and_midpoint(self):
        assert normalize(3000, RANGE) == 0.0
        assert normalize(1000, RANGE) == 1.0
        assert normalize(2000, RANGE) == 0.5

    def test_out_of_range_clamps(self):
        assert normalize(3500, RANGE) == 0.0
        assert normalize(500, RANGE) == 1.0

    def test_increasing_axis(self):
        rng = DeviceRange(0, 4095, flexion_decreases=False)
        assert normalize(0, rng) == 0.0
        assert normalize(4095, rng) == 1.0


class TestMapChannel:
    def test_single_map_midpoint(self):
        (theta,) = map_channel(0.5, [JointMap("j", 0.0, math.pi / 2)])
        assert theta == pytest.approx(0.7853981633974483, abs=1e-15)

    def test_two_joint_endpoint(self):
        maps = [JointMap("mcp", 0.0, 1.6), JointMap("pip", 0.0, 1.2)]
        assert map_channel(1.0, maps) == (1.6, 1.2)
        assert map_channel(0.0, maps) == (0.0, 0.0)

    def test_endpoints_exact_with_ugly_limits(self):
        # Limits chosen so the naive lerp would land one ulp off.
        m = JointMap("j", 0.1, 1.7)
        assert map_channel(1.0, [m]) == (1.7,)
        assert map_channel(0.0, [m]) == (0.1,)

    def test_weight_scales_travel(self):
        (theta,) = map_channel(1.0, [JointMap("j", 0.0, 1.0, weight=0.8)])
        assert theta == 0.8
        (theta,) = map_channel(0.5, [JointMap("j", 0.0, 1.0, weight=0.8)])
        assert theta == 0.4

    def test_invert(self):
        m = JointMap("j", -0.5, 0.9, invert=True)
        assert map_channel(1.0, [m]) == (-0.5,)
        assert map_channel(0.0, [m]) == (0.9,)

    def test_output_always_within_limits(self):
        m = JointMap("j", -0.3, 0.7, weight=0.9)
        for k in range(1001):
            (theta,) = map_channel(k / 1000, [m])
            assert -0.3 <= theta <= 0.7


class TestInverseMap:
    def test_examples(self, profiles):
        profile = profiles["bluerobin-8dof"]  # FE ranges [1000, 3000]
        assert inverse_map([0.0] * 5, profile)[0] == 3000
        assert inverse_map([1.0] * 5, profile)[0] == 1000
        assert inverse_map([0.25] * 5, profile)[0] == 2500

    def test_arity(self, profiles):
        with pytest.raises(ValueError):
            inverse_map([0.5] * 4, profiles["bluerobin-8dof"])

    @pytest.mark.parametrize("name", FIXTURES)
    def test_round_trip_within_one_tick(self, profiles, name):
        profile = profiles[name]
        for k in range(1001):
            u = k / 1000
            ticks = inverse_map([u] * 5, profile)
            for ch in range(5):
                back = normalize(ticks[ch], profile.ranges[ch])
                assert abs(back - u) <= 1.0 / profile.ranges[ch].span


class TestRetargetAll:
    def test_extended_endpoints_hit_theta_min(self, profiles):
        profile = profiles["bluerobin-8dof"]  # no inverted maps
        targets = retarget_all(state_at_u(profile, 0.0), profile)
        assert len(targets.joints) == 8
        assert all(angle == 0.0 for _, angle in targets.joints)

    def test_full_flexion_weighted_limits(self, profiles):
        profile = profiles["bluerobin-8dof"]
        angles = retarget_all(state_at_u(profile, 1.0), profile).as_dict()
        assert angles["index_mcp"] == 1.6
        assert angles["index_pip"] == 1.2
        assert angles["thumb_ip"] == pytest.approx(0.8, abs=1e-15)  # weight 0.8 on [0, 1]

    def test_adroit_structure(self, profiles):
        profile = profiles["adroit-30dof"]
        targets = retarget_all(state_at_u(profile, 0.3), profile)
        assert len(targets.joints) == 30
        mapped = [jid for ch in profile.maps for jid in (m.joint_id for m in ch)]
        assert len(mapped) == 22
        held = dict(targets.joints[22:])
        assert held == {n.joint_id: n.angle for n in profile.neutral}
        assert len(profile.neutral) == 8

    def test_igrisc_structure(self, profiles):
        profile = profiles["igrisc-11dof"]
        targets = retarget_all(state_at_u(profile, 0.5), profile)
        assert len(targets.joints) == 11
        # One active joint per device channel, including the abduction map.
        assert all(len(ch) == 1 for ch in profile.maps)

    def test_output_order_is_declaration_order(self, profiles):
        for profile in profiles.values():
            targets = retarget_all(state_at_u(profile, 0.7), profile)
            assert tuple(j for j, _ in targets.joints) == profile.joint_ids

    @pytest.mark.parametrize("name", FIXTURES)
    def test_monotone_for_noninverted_maps(self, profiles, name):
        profile = profiles[name]
        inverted = {
            m.joint_id for ch in profile.maps for m in ch if m.invert
        }
        prev: dict[str, float] = {}
        for k in range(1001):
            angles = retarget_all(state_at_u(profile, k / 1000), profile).as_dict()
            for jid, theta in angles.items():
                if jid in prev and jid not in inverted:
                    assert theta >= prev[jid] - 1e-12, (jid, k)
                prev[jid] = theta

    @pytest.mark.parametrize("name", FIXTURES)
    def test_angles_always_within_limits(self, profiles, name):
        profile = profiles[name]
        limits = {
            m.joint_id: (m.theta_min, m.theta_max)
            for ch in profile.maps
            for m in ch
        }
        for u in (0.0, 0.123, 0.5, 0.999, 1.0):
            for jid, theta in retarget_all(state_at_u(profile, u), profile).joints:
                if jid in limits:
                    lo, hi = limits[jid]
                    assert lo <= theta <= hi

    def test_pure(self, profiles):
        profile = profiles["adroit-30dof"]
        state = state_at_u(profile, 0.37)
        assert retarget_all(state, profile) == retarget_all(state, profile)

    def test_clamp_diagnostics(self, profiles):
        profile = profiles["bluerobin-8dof"]
        diag = ClampDiagnostics()
        state = initial_state([3500, 2000, 2000, 2000, 500], 100)
        retarget_all(state, profile, diagnostics=diag)
        assert diag.per_channel[0] == 1  # above q_max
        assert diag.per_channel[4] == 1  # below q_min
        assert diag.total == 2

    def test_timestamp_passthrough(self, profiles):
        profile = profiles["bluerobin-8dof"]
        targets = retarget_all(state_at_u(profile, 0.0), profile, t=123_000_000)
        assert targets.t == 123_000_000


class TestProfileValidation:
    def base(self) -> dict:
        return load_profile(profile_path("bluerobin-8dof")).to_dict()

    def test_fixture_round_trip(self, profiles):
        for profile in profiles.values():
            assert HandProfile.from_dict(profile.to_dict()) == profile

    def test_fe_channel_requires_map(self):
        data = self.base()
        data["channels"][2]["maps"] = []
        with pytest.raises(ProfileError, match="no joint maps"):
            HandProfile.from_dict(data)

    def test_duplicate_joint_rejected(self):
        data = self.base()
        data["channels"][1]["maps"][0]["joint_id"] = "index_mcp"
        with pytest.raises(ProfileError, match="more than once"):
            HandProfile.from_dict(data)

    def test_bad_ranges_rejected(self):
        with pytest.raises(ProfileError):
            DeviceRange(3000, 1000)
        with pytest.raises(ProfileError):
            JointMap("j", 1.0, 0.5)
        with pytest.raises(ProfileError):
            JointMap("j", 0.0, 1.0, weight=0.0)
        with pytest.raises(ProfileError):
            JointMap("j", 0.0, 1.0, weight=1.5)

    def test_channel_arity_enforced(self):
        data = self.base()
        del data["channels"][5]
        with pytest.raises(ProfileError, match="6 device channels"):
            HandProfile.from_dict(data)

    def test_missing_field(self):
        with pytest.raises(ProfileError, match="missing required field"):
            HandProfile.from_dict({"name": "x"})

    def test_load_errors_wrapped(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ProfileError):
            load_profile(bad)
        with pytest.raises(ProfileError):
            load_profile(tmp_path / "absent.json")

    def test_content_hash_tracks_content(self, profiles):
        profile = profiles["bluerobin-8dof"]
        again = HandProfile.from_dict(profile.to_dict())
        assert profile.content_hash() == again.content_hash()
        changed = profile.to_dict()
        changed["channels"][0]["maps"][0]["theta_max"] = 1.55
        assert HandProfile.from_dict(changed).content_hash() != profile.content_hash()

    def test_shipped_fixture_inventory(self):
        assert set(FIXTURES) <= set(list_profiles())
