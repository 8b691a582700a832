import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynfsm.analysis import (accessible_mask, builtin_strategy, identifiability, mask_size,
                             model_error, variable_importance)
from dynfsm.dataset import Dataset, from_groups
from dynfsm.fitness import accuracy
from dynfsm.fsm import Fsm
from dynfsm.simulate import MatchConfig, play_match, play_series


@pytest.fixture(scope="module")
def noisy_grim_data():
    cfg = MatchConfig(builtin_strategy("noisy-grim"), builtin_strategy("tft"), 0.1, 0.1, 4000, seed=1)
    return play_series(cfg, 100)[0]


@pytest.fixture(scope="module")
def tft_det_data():
    cfg = MatchConfig(builtin_strategy("tft"), builtin_strategy("tft"), 0.0, 0.0, 50, seed=1)
    return play_match(cfg).player_data


class TestStrategies:
    def test_tft(self):
        f = builtin_strategy("tft")
        assert f.action_vector == (1, 2) and f.state_matrix == ((1, 1, 2, 2), (1, 1, 2, 2))

    def test_grim(self):
        f = builtin_strategy("grim")
        assert f.action_vector == (1, 2) and f.state_matrix == ((1, 2, 2, 2), (2, 2, 2, 2))

    def test_noisy_grim(self):
        f = builtin_strategy("noisy-grim")
        assert f.action_vector == (1, 2) and f.state_matrix == ((1, 2, 2, 2), (1, 2, 2, 2))

    def test_aliases_and_unknown(self):
        assert builtin_strategy("GT") == builtin_strategy("grim")
        with pytest.raises(ValueError, match="known"):
            builtin_strategy("pavlov")


class TestIdentifiability:
    def test_noisy_grim_all_identifiable(self, noisy_grim_data):
        rep = identifiability(builtin_strategy("noisy-grim"), noisy_grim_data)
        assert rep.identifiable.shape == (2, 4)
        assert rep.identifiable.all()

    def test_deterministic_tft_only_cc(self, tft_det_data):
        rep = identifiability(builtin_strategy("tft"), tft_det_data)
        expected = np.zeros((2, 4), bool)
        expected[0, 0] = True
        assert np.array_equal(rep.identifiable, expected)

    def test_single_row(self):
        data = from_groups([([1], [[0, 1]])], ("own_lag", "opp_lag"), ("c", "d"))
        assert not identifiability(builtin_strategy("tft"), data).identifiable.any()

    def test_flip_symmetry(self, tft_noisy_data):
        m = builtin_strategy("grim")
        base = identifiability(m, tft_noisy_data)
        for s in (1, 2):
            for c in range(1, 5):
                flipped = m.with_cell(s, c, 3 - m.state_matrix[s - 1][c - 1])
                other = identifiability(flipped, tft_noisy_data)
                assert base.deltas[s - 1, c - 1, 0] == pytest.approx(-other.deltas[s - 1, c - 1, 0])

    def test_flag_equals_positive_min_delta(self, tft_noisy_data):
        for name in ("tft", "grim", "tf2t", "always-d"):
            rep = identifiability(builtin_strategy(name), tft_noisy_data)
            assert np.array_equal(rep.identifiable, rep.min_delta > 0)

    def test_deltas_match_direct_rescoring(self, tft_noisy_data):
        m = builtin_strategy("tf2t")
        rep = identifiability(m, tft_noisy_data)
        base = accuracy(m, tft_noisy_data).accuracy
        alts = [v for v in (1, 2, 3) if v != m.state_matrix[1][2]]
        for k, v in enumerate(alts):
            direct = base - accuracy(m.with_cell(2, 3, v), tft_noisy_data).accuracy
            assert rep.deltas[1, 2, k] == pytest.approx(direct)


def _swap_predictors(fsm: Fsm) -> Fsm:
    # column (a, b) -> (b, a): cols 1,2,3,4 map to 1,3,2,4
    perm = [0, 2, 1, 3]
    rows = [[row[perm[c]] for c in range(4)] for row in fsm.state_matrix]
    return Fsm(fsm.action_vector, rows, fsm.predictor_names[::-1], fsm.action_labels)


def _swap_data(d: Dataset) -> Dataset:
    return Dataset(d.group_labels, d.starts, d.periods, d.outcomes, d.predictors[:, ::-1],
                   d.predictor_names[::-1], d.action_labels)


class TestImportance:
    def test_tft_opponent_dominates(self, tft_noisy_data):
        rep = variable_importance(builtin_strategy("tft"), tft_noisy_data)
        scores = dict(zip(rep.names, rep.scores))
        assert scores["opp_lag"] == 100
        assert scores["own_lag"] < 100
        assert rep.ranking() == ["opp_lag", "own_lag"]

    def test_identical_pairs_score_zero(self, tft_noisy_data):
        # columns cc=dc and cd=dd in every row: own move has no marginal effect
        m = Fsm((1, 2), [(2, 2, 1, 1), (1, 1, 1, 1)], ("own_lag", "opp_lag"), ("c", "d"))
        rep = variable_importance(m, tft_noisy_data)
        assert rep.scores[0] == 0

    def test_all_zero(self):
        data = from_groups([([1] * 20, [[0, 0]] * 20)], ("a", "b"), ("c", "d"))
        m = Fsm((1, 1), [(1, 1, 1, 1), (1, 1, 1, 1)], ("a", "b"), ("c", "d"))
        assert variable_importance(m, data).scores.tolist() == [0, 0]

    def test_bounds(self, noisy_grim_data):
        rep = variable_importance(builtin_strategy("noisy-grim"), noisy_grim_data)
        assert rep.scores.max() == 100 and rep.scores.min() >= 0

    @pytest.mark.parametrize("name", ["tft", "grim", "noisy-grim"])
    def test_permutation_invariant(self, tft_noisy_data, name):
        m = builtin_strategy(name)
        a = variable_importance(m, tft_noisy_data).scores
        b = variable_importance(_swap_predictors(m), _swap_data(tft_noisy_data)).scores
        assert b == pytest.approx(a[::-1])


def machines_22():
    cell = st.integers(1, 2)
    return st.builds(
        lambda av, sm: Fsm(av, [sm[:4], sm[4:]], ("own_lag", "opp_lag"), ("c", "d")),
        st.tuples(cell, cell), st.tuples(*[cell] * 8),
    )


class TestModelError:
    def test_zero_on_equal(self):
        assert model_error(builtin_strategy("tft"), builtin_strategy("tft")) == 0

    @pytest.mark.parametrize("name", ["tft", "grim"])
    def test_mask_size_six(self, name):
        assert mask_size(builtin_strategy(name)) == 6

    def test_tft_vs_grim(self):
        assert model_error(builtin_strategy("tft"), builtin_strategy("grim")) == 1

    def test_mask_cells(self):
        mask = accessible_mask(builtin_strategy("noisy-grim"))
        assert mask.tolist() == [[True, False, True, False], [False, True, False, True]]

    def test_layout_mismatch(self):
        with pytest.raises(ValueError):
            model_error(builtin_strategy("tf2t"), builtin_strategy("tft"))

    @settings(max_examples=200)
    @given(machines_22(), machines_22(), machines_22())
    def test_metric(self, a, b, c):
        mask = accessible_mask(builtin_strategy("tft"))
        d = lambda x, y: model_error(x, y, mask)
        assert d(a, b) == d(b, a)
        assert d(a, c) <= d(a, b) + d(b, c)
        assert 0 <= d(a, b) <= 6
        same = a.action_vector == b.action_vector and all(
            np.asarray(a.state_matrix)[mask] == np.asarray(b.state_matrix)[mask])
        assert (d(a, b) == 0) == same
