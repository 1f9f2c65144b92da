from fractions import Fraction

import numpy as np
import pytest

from ssafsim import precoder as pc
from ssafsim.bounds import BoundConfig, build_matryoshka

# Normalised minimum product distance of the 2x2 rotation, radius-4 search.
CYCLOTOMIC_MPD = 0.6687401935837767


def test_cyclotomic_shape():
    s = pc.cyclotomic_2x2()
    c, n = np.cos(4.15881461), np.sin(4.15881461)
    np.testing.assert_array_equal(s.matrix, [[c, n], [n, -c]])
    np.testing.assert_allclose(s.matrix @ s.matrix.T, np.eye(2), atol=1e-15)


def test_cyclotomic_product_distance_regression():
    assert pc.min_product_distance(pc.cyclotomic_2x2().matrix, radius=4) == pytest.approx(CYCLOTOMIC_MPD, abs=1e-12)


def test_identity_product_distance_is_zero():
    assert pc.min_product_distance(np.eye(3), radius=2) == 0.0


def test_kruskemper_orthogonal_and_distance():
    k = pc.kruskemper_4x4()
    assert np.abs(k.matrix @ k.matrix.T - np.eye(4)).max() < 1e-12
    assert np.count_nonzero(k.matrix) == 16
    assert pc.min_product_distance(k.matrix, radius=3) == pytest.approx(0.4389931556, abs=1e-9)


def test_product_distance_invariant_to_signed_permutations():
    rng = np.random.default_rng(0)
    s = pc.cyclotomic_2x2().matrix
    p = np.diag([1, -1]) @ np.eye(2)[[1, 0]]
    assert pc.min_product_distance(s @ p, 3) == pytest.approx(pc.min_product_distance(s, 3))
    q = np.linalg.qr(rng.standard_normal((2, 2)))[0]
    assert pc.min_product_distance(q, 3) >= 0


def test_rotation_data_checksum(tmp_path, monkeypatch):
    text = pc._data_path("kruskemper4").read_text()
    # Flip the last digit of the first matrix entry.
    broken = text.replace("0.31208201907947941", "0.31208201907947942", 1)
    assert broken != text
    (tmp_path / "kruskemper4.txt").write_text(broken)
    monkeypatch.setattr(pc, "_data_path", lambda name: tmp_path / f"{name}.txt")
    with pytest.raises(ValueError, match="checksum"):
        pc.load_rotation("kruskemper4")
    with pytest.raises(FileNotFoundError):
        pc.load_rotation("missing")


def test_precoder_validation():
    with pytest.raises(ValueError):
        pc.Precoder(np.array([[1.0, 1.0], [0.0, 1.0]]), 2)
    with pytest.raises(ValueError):
        pc.Precoder(pc.cyclotomic_2x2().matrix, 1)  # declared spreading too small
    with pytest.raises(ValueError):
        pc.Precoder(np.eye(2), 1, strategy="diagonal")


def test_embed_single_reproduces_s2_of_four():
    rot = pc.cyclotomic_2x2()
    s = pc.embed_single(rot, 4).matrix
    c, n = np.cos(4.15881461), np.sin(4.15881461)
    want = np.eye(4)
    want[0, 0], want[0, 3], want[3, 0], want[3, 3] = c, n, n, -c
    np.testing.assert_array_equal(s, want)


def test_embed_single_three_slots():
    s = pc.embed_single(pc.cyclotomic_2x2(), 3).matrix
    np.testing.assert_array_equal(s[1], [0, 1, 0])
    assert np.count_nonzero(s[[0, 2]][:, [0, 2]]) == 4


def test_embed_full_when_size_matches():
    p = pc.embed_single(pc.cyclotomic_2x2(), 2)
    assert p.strategy == "full"
    np.testing.assert_array_equal(p.matrix, pc.cyclotomic_2x2().matrix)
    np.testing.assert_array_equal(pc.embed_multi(pc.kruskemper_4x4(), 4).matrix, pc.embed_single(pc.kruskemper_4x4(), 4).matrix)


def test_embed_multi_pairs():
    s = pc.embed_multi(pc.cyclotomic_2x2(), 4).matrix
    c, n = np.cos(4.15881461), np.sin(4.15881461)
    want = np.zeros((4, 4))
    for a, b in [(0, 3), (1, 2)]:
        want[a, a], want[a, b], want[b, a], want[b, b] = c, n, n, -c
    np.testing.assert_array_equal(s, want)
    s6 = pc.embed_multi(pc.cyclotomic_2x2(), 6).matrix
    pairs = {tuple(np.flatnonzero(row)) for row in s6}
    assert pairs == {(0, 5), (1, 4), (2, 3)}


def test_embed_errors():
    with pytest.raises(ValueError):
        pc.embed_single(pc.kruskemper_4x4(), 3)
    with pytest.raises(ValueError):
        pc.embed_multi(pc.cyclotomic_2x2(), 3)
    with pytest.raises(ValueError):
        pc.rotation(3)


def test_untouched_coordinates_are_basis_vectors():
    for m in (3, 4, 5):
        s = pc.embed_single(pc.cyclotomic_2x2(), m).matrix
        for k in range(1, m - 1):
            np.testing.assert_array_equal(s[k], np.eye(m)[k])


@pytest.mark.parametrize(
    "beta, alpha, s, strategy",
    [(2, 0, 2, "single_precoder"), (3, 0, 2, "single_precoder"), (3, 0, 2, "multi_precoder"),
     (3, 0, 4, "single_precoder"), (1, 0, 2, "single_precoder"), (2, 2, 2, "single_precoder"),
     (3, 0, 1, "none"), (2, 1, 1, "none")],
)  # fmt: skip
def test_structural_channel_equals_bound_channel(beta, alpha, s, strategy):
    cfg = BoundConfig(beta, Fraction(1, 2), alpha, s, strategy=strategy)
    n = 120 * cfg.m_slots
    structural = pc.equivalent_channel(pc.for_bound_config(cfg), beta, alpha, n)
    assert structural == build_matryoshka(cfg, n)


def test_kruskemper_four_slot_channel():
    ch = pc.equivalent_channel(pc.embed_single(pc.kruskemper_4x4(), 4), 3, 0, 400)
    assert ch.diversities == (4,) and ch.lengths == (400,)
