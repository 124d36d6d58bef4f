from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duallens.rerank import ScoreLengthMismatch, fuse_scores, fuse_single, select_chunks
from helpers import oracle_select


def test_fuse_single_weighted_sum():
    assert abs(fuse_single(0.5, 0.8, 0.4, 0.6) - 0.68) <= 1e-12
    assert fuse_single(None, 0.8, 0.4, 0.6) == pytest.approx(0.48)
    assert fuse_single(0.5, None, 0.4, 0.6) == pytest.approx(0.2)
    assert fuse_single(None, None, 0.4, 0.6) == 0.0


def test_fuse_scores_handles_missing_modalities():
    assert fuse_scores([1.0, 0.0], [0.0, 1.0], 0.4, 0.6) == pytest.approx([0.4, 0.6])
    assert fuse_scores(None, [0.5, 1.0], 0.4, 0.6) == pytest.approx([0.3, 0.6])
    assert fuse_scores([0.5, 1.0], None, 0.4, 0.6) == pytest.approx([0.2, 0.4])
    with pytest.raises(ScoreLengthMismatch):
        fuse_scores([0.5], [0.5, 0.6], 0.4, 0.6)
    with pytest.raises(ScoreLengthMismatch):
        fuse_scores(None, None, 0.4, 0.6)


def test_selection_threshold_is_strict():
    fused = [0.6, 0.6000001, 0.59, 0.95]
    keys = [(0, 0), (0, 1), (0, 2), (1, 0)]
    assert select_chunks(fused, keys, 0.6, 10) == [3, 1]


def test_selection_tie_break_order():
    fused = [0.8, 0.8, 0.8, 0.9]
    keys = [(1, 5), (0, 7), (1, 2), (2, 0)]
    # Equal scores fall back to source position, then chunk index.
    assert select_chunks(fused, keys, 0.0, 10) == [3, 1, 2, 0]


def test_selection_truncates_to_top_k():
    fused = [0.9, 0.8, 0.7, 0.65]
    keys = [(i, 0) for i in range(4)]
    assert select_chunks(fused, keys, 0.6, 2) == [0, 1]
    assert select_chunks(fused, keys, 0.6, 0) == []
    with pytest.raises(ValueError):
        select_chunks(fused, keys, 0.6, -1)
    with pytest.raises(ScoreLengthMismatch):
        select_chunks(fused, keys[:3], 0.6, 2)


_grid = st.sampled_from([0.0, 0.25, 0.5, 0.6, 0.65, 0.8, 0.95, 1.0])


@settings(max_examples=120, deadline=None)
@given(
    st.lists(_grid, max_size=40),
    st.sampled_from([0.0, 0.5, 0.6, 0.8]),
    st.integers(0, 12),
    st.randoms(use_true_random=False),
)
def test_selection_matches_brute_force(fused, threshold, top_k, rnd):
    keys = [(rnd.randrange(0, 5), rnd.randrange(0, 8)) for _ in fused]
    assert select_chunks(fused, keys, threshold, top_k) == oracle_select(
        fused, keys, threshold, top_k)
