"""Feature partitioning schemes and window projection."""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_array_equal

from painfusion import (
    bifurcated_scheme,
    project,
    quadrifurcated_scheme,
    scheme_by_name,
    singular_scheme,
)
from painfusion.data import Window
from painfusion.errors import InvalidJointMap, UnknownModality
from painfusion.modality import (
    JointSegmentMap,
    N_FEATURES,
    default_joint_segment_map,
    parse_joint_segment_map,
)


class TestSchemes:
    def test_singular_covers_everything(self):
        s = singular_scheme()
        assert list(s.modalities) == ["all"]
        assert s.modalities["all"] == tuple(range(70))

    def test_bifurcated_split(self):
        s = bifurcated_scheme()
        assert s.modalities["coords"] == tuple(range(66))
        assert s.modalities["semg"] == (66, 67, 68, 69)

    def test_quadrifurcated_joint_blocks(self):
        """Joint j owns columns j, 22+j, 44+j (its X, Y, Z slots)."""
        s = quadrifurcated_scheme()
        for j in range(6, 14):
            for col in (j, 22 + j, 44 + j):
                assert col in s.modalities["upper_limbs"]
        assert set(s.modalities["upper_limbs"]) & set(s.modalities["trunk"]) == set()

    def test_joint_five_in_trunk_by_default(self):
        s = quadrifurcated_scheme()
        for col in (5, 27, 49):
            assert col in s.modalities["trunk"]

    def test_partition_is_exact(self):
        s = quadrifurcated_scheme()
        seen = sorted(i for idx in s.modalities.values() for i in idx)
        assert seen == list(range(N_FEATURES))

    def test_scheme_by_name(self):
        assert scheme_by_name("singular").name == "singular"
        assert scheme_by_name("bifurcated").name == "bifurcated"
        assert scheme_by_name("quadrifurcated").name == "quadrifurcated"

    def test_custom_joint_map_moves_joint(self):
        """Reassigning joint 5 to upper_limbs must carry its three
        coordinate columns along."""
        assignments = dict(default_joint_segment_map().assignments)
        assignments[5] = "upper_limbs"
        s = quadrifurcated_scheme(JointSegmentMap(assignments))
        for col in (5, 27, 49):
            assert col in s.modalities["upper_limbs"]
            assert col not in s.modalities["trunk"]


class TestJointMapParsing:
    def test_default_round_trip(self):
        d = default_joint_segment_map()
        text = "\n".join(f"{j} {seg}" for j, seg in d.assignments.items())
        assert parse_joint_segment_map(text).assignments == d.assignments

    def test_comments_and_blanks_ignored(self):
        d = default_joint_segment_map()
        lines = ["# layout", ""]
        lines += [f"{j} {seg}" for j, seg in d.assignments.items()]
        assert parse_joint_segment_map("\n".join(lines)).assignments == d.assignments

    def test_duplicate_joint_rejected(self):
        text = "0 trunk\n0 upper_limbs\n" + "\n".join(
            f"{j} trunk" for j in range(1, 22)
        )
        with pytest.raises(InvalidJointMap):
            parse_joint_segment_map(text)

    def test_missing_joint_rejected(self):
        text = "\n".join(f"{j} trunk" for j in range(21))
        with pytest.raises(InvalidJointMap):
            parse_joint_segment_map(text)

    def test_bad_segment_rejected(self):
        text = "\n".join(f"{j} torso" for j in range(22))
        with pytest.raises(InvalidJointMap):
            parse_joint_segment_map(text)


class TestProjection:
    def test_singular_is_identity(self):
        rng = np.random.default_rng(0)
        w = Window("s1", rng.standard_normal((5, 70)), 0)
        assert_array_equal(project(w, singular_scheme(), "all"), w.features)

    def test_unknown_modality(self):
        w = Window("s1", np.zeros((5, 70)), 0)
        with pytest.raises(UnknownModality):
            project(w, bifurcated_scheme(), "torso")

    def test_concatenation_is_column_permutation(self):
        rng = np.random.default_rng(1)
        w = Window("s1", rng.standard_normal((4, 70)), 1)
        for scheme in (bifurcated_scheme(), quadrifurcated_scheme()):
            parts = [project(w, scheme, name) for name in scheme.modalities]
            stacked = np.concatenate(parts, axis=1)
            order = [i for idx in scheme.modalities.values() for i in idx]
            assert_array_equal(stacked, w.features[:, order])

    @given(st.integers(0, 2**32 - 1))
    def test_projection_width_matches_scheme(self, seed):
        rng = np.random.default_rng(seed)
        w = Window("s1", rng.standard_normal((3, 70)), 0)
        scheme = quadrifurcated_scheme()
        for name, idx in scheme.modalities.items():
            assert project(w, scheme, name).shape == (3, len(idx))
