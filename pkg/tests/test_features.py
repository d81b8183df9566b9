import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_obs
from crashcount.errors import DataError
from crashcount.features import (
    FULL_DUMMY,
    REFERENCE_CELL,
    FeatureSchema,
    build_design,
    encode,
    split,
    split_indices,
)

obs_strategy = st.builds(
    make_obs,
    hour=st.integers(0, 23),
    weekday=st.integers(0, 6),
    month=st.integers(1, 12),
    crash_count=st.integers(0, 50),
    precip_in=st.sampled_from([0.0, 0.2, 1.3]),
)


class TestSchema:
    def test_reference_cell_column_count(self):
        assert FeatureSchema().width == 42
        assert len(FeatureSchema().column_names) == 42

    def test_reference_cell_without_precip(self):
        schema = FeatureSchema(include_precip=False)
        assert schema.width == 41

    def test_full_dummy_column_count(self):
        schema = FeatureSchema(coding=FULL_DUMMY)
        assert schema.width == 44
        assert "Intercept" not in schema.column_names

    def test_column_order_stable(self):
        assert FeatureSchema().column_names == FeatureSchema().column_names
        names = FeatureSchema().column_names
        assert names[0] == "Intercept"
        assert names[1] == "Hour_1"
        assert names[-1] == "Precipitation"

    def test_bad_coding_rejected(self):
        with pytest.raises(DataError):
            FeatureSchema(coding="one_hot")


class TestEncode:
    def test_reference_cell_at_reference_levels(self):
        schema = FeatureSchema()  # references Hour_0, MO, JAN
        x = encode(make_obs(hour=0, weekday=0, month=1, precip_in=0.0), schema)
        assert x[0] == 1.0
        assert np.all(x[1:] == 0.0)

    def test_full_dummy_one_hots(self):
        schema = FeatureSchema(coding=FULL_DUMMY)
        x = encode(make_obs(hour=8, weekday=4, month=6, precip_in=0.5), schema)
        names = schema.column_names
        on = {names[i] for i in np.nonzero(x)[0]}
        assert on == {"Hour_8", "FR", "JUN", "Precipitation"}

    @given(obs_strategy)
    @settings(max_examples=200)
    def test_full_dummy_partition_sums(self, obs):
        schema = FeatureSchema(coding=FULL_DUMMY)
        x = encode(obs, schema)
        names = schema.column_names
        hour_sum = sum(x[i] for i, n in enumerate(names) if n.startswith("Hour_"))
        wd_sum = sum(x[i] for i, n in enumerate(names) if n in ("MO", "TU", "WE", "TH", "FR", "SA", "SU"))
        mo_sum = sum(
            x[i]
            for i, n in enumerate(names)
            if n in ("JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC")
        )
        assert hour_sum == wd_sum == mo_sum == 1.0

    @given(obs_strategy)
    @settings(max_examples=200)
    def test_reference_cell_sums_at_most_one(self, obs):
        schema = FeatureSchema()
        x = encode(obs, schema)
        names = schema.column_names
        hour_sum = sum(x[i] for i, n in enumerate(names) if n.startswith("Hour_"))
        assert hour_sum in (0.0, 1.0)
        assert x[0] == 1.0

    @given(obs_strategy)
    @settings(max_examples=200)
    def test_full_dummy_round_trip(self, obs):
        schema = FeatureSchema(coding=FULL_DUMMY)
        x = encode(obs, schema)
        hour = int(np.argmax(x[0:24]))
        weekday = int(np.argmax(x[24:31]))
        month = int(np.argmax(x[31:43])) + 1
        assert (hour, weekday, month) == (obs.hour, obs.weekday, obs.month)

    def test_precip_indicator_vs_inches(self):
        obs = make_obs(precip_in=0.7)
        x_ind = encode(obs, FeatureSchema(precip_mode="indicator"))
        x_in = encode(obs, FeatureSchema(precip_mode="inches"))
        assert x_ind[-1] == 1.0
        assert x_in[-1] == 0.7


class TestBuildDesign:
    def test_single_observation_matches_encode(self):
        schema = FeatureSchema(coding=FULL_DUMMY)
        obs = make_obs(hour=3, weekday=2, month=9, crash_count=5, precip_in=0.1)
        design = build_design([obs], schema)
        np.testing.assert_array_equal(design.x[0], encode(obs, schema))
        assert design.y[0] == 5

    @given(st.lists(obs_strategy, min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_rows_match_encode(self, observations):
        for schema in (FeatureSchema(), FeatureSchema(coding=FULL_DUMMY)):
            design = build_design(observations, schema)
            for i, obs in enumerate(observations):
                np.testing.assert_array_equal(design.x[i], encode(obs, schema))

    def test_empty_list_is_error(self):
        with pytest.raises(DataError):
            build_design([], FeatureSchema())

    def test_reference_no_precip_is_41_columns(self):
        design = build_design([make_obs()], FeatureSchema(include_precip=False))
        assert design.p == 41

    def test_full_rank_when_all_levels_present(self):
        observations = [
            make_obs(hour=h, weekday=w, month=m, precip_in=precip)
            for h in range(24)
            for w in range(7)
            for m in range(1, 13)
            for precip in (0.0, 0.4)
        ]
        design = build_design(observations, FeatureSchema())
        assert np.linalg.matrix_rank(design.x) == design.p


class TestSplit:
    def _design(self, n):
        return build_design([make_obs(hour=i % 24, crash_count=i) for i in range(n)], FeatureSchema())

    def test_10_rows_80_20(self):
        train, test = split(self._design(10), 0.2, seed=42)
        assert train.n == 8 and test.n == 2
        combined = sorted(train.y.tolist() + test.y.tolist())
        assert combined == list(range(10))

    def test_same_seed_same_partition(self):
        d = self._design(50)
        a_train, a_test = split(d, 0.2, seed=7)
        b_train, b_test = split(d, 0.2, seed=7)
        np.testing.assert_array_equal(a_train.y, b_train.y)
        np.testing.assert_array_equal(a_test.y, b_test.y)

    def test_quarter_split(self):
        train, test = split(self._design(100), 0.25, seed=1)
        assert train.n == 75 and test.n == 25

    def test_chrono_split_takes_tail(self):
        train, test = split(self._design(10), 0.3, seed=0, method="chrono")
        assert test.y.tolist() == [7, 8, 9]

    def test_bad_fraction(self):
        with pytest.raises(DataError):
            split(self._design(10), 1.2, seed=0)
        with pytest.raises(DataError):
            split(self._design(10), 0.0, seed=0)

    @given(
        st.integers(min_value=2, max_value=200),
        st.floats(min_value=0.05, max_value=0.95),
        st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=100)
    def test_partition_exact(self, n, fraction, seed):
        train_idx, test_idx = split_indices(n, fraction, seed)
        assert len(train_idx) + len(test_idx) == n
        assert set(train_idx.tolist()).isdisjoint(test_idx.tolist())
        assert sorted(list(train_idx) + list(test_idx)) == list(range(n))
        assert len(test_idx) == min(max(int(round(n * fraction)), 1), n - 1)
