import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopybp import coding
from loopybp.model import InvalidArgument


def test_hamming_code_has_sixteen_codewords():
    fg = coding.build_hamming74()
    words = coding.codewords(fg)
    assert len(words) == 16
    assert (0,) * 7 in words
    # minimum distance 3
    w = np.array(words)
    dist = (w[:, None, :] != w[None, :, :]).sum(axis=2)
    assert dist[~np.eye(16, dtype=bool)].min() == 3


def test_parity_table():
    t = coding.parity_table(3)
    assert t[0, 0, 0] == 1 and t[1, 1, 0] == 1 and t[1, 0, 0] == 0


def test_degrees():
    fg = coding.build_hamming74()
    assert [fg.degree(v) for v in range(7)] == [2, 2, 3, 2, 1, 1, 1]


def test_channel_validation():
    fg = coding.build_hamming74()
    with pytest.raises(InvalidArgument):
        coding.attach_channel(fg, 0.5, [0] * 7)
    with pytest.raises(InvalidArgument):
        coding.attach_channel(fg, 0.1, [0] * 6)
    with pytest.raises(InvalidArgument):
        coding.single_flip_word(8)


def test_noiseless_word_decodes_to_itself():
    b = coding.decode_beliefs(0.05, [0] * 7, "bp")
    assert np.all(b[:, 0] > 0.99)


@given(st.floats(0.01, 0.45), st.integers(1, 7))
def test_exact_posterior_is_normalized(eps, pos):
    post = coding.decode_beliefs(eps, coding.single_flip_word(pos), "exact")
    np.testing.assert_allclose(post.sum(axis=1), 1.0)


def test_bp_on_tree_component_matches_exact():
    # a single parity check is a tree, so BP is exact there
    fg = coding.FactorGraph(3, (coding.Factor((0, 1, 2), coding.parity_table(3)),))
    fg = coding.attach_channel(fg, 0.2, [1, 0, 0])
    np.testing.assert_allclose(coding.run_factor_bp(fg).beliefs, coding.exact_posterior(fg), atol=1e-12)


def test_bp_converges():
    fg = coding.attach_channel(coding.build_hamming74(), 0.1, coding.single_flip_word(1))
    out = coding.run_factor_bp(fg)
    assert out.converged and out.sweeps < 200


def test_thresholds():
    assert coding.correction_threshold(1, "bp") == pytest.approx(0.13, abs=0.005)
    assert coding.correction_threshold(1, "exact") == pytest.approx(0.21, abs=0.005)
    assert coding.correction_threshold(6, "bp") == 0.0
    with pytest.raises(InvalidArgument):
        coding.decode_beliefs(0.1, [0] * 7, "viterbi")


def test_exact_decoder_dominates_bp():
    for pos in range(1, 8):
        assert coding.correction_threshold(pos, "exact") >= coding.correction_threshold(pos, "bp")


def test_threshold_rows():
    rows = coding.threshold_rows(positions=[1], decoders=["bp"], epsilons=[0.05, 0.3])
    assert [r["corrected"] for r in rows] == [True, False]
    assert list(rows[0]) == ["flip_position", "epsilon", "decoder", "belief_at_flip", "corrected"]
