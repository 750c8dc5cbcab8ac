import numpy as np
import pytest

from topicrefine.backends import EmbeddingBundle
from topicrefine import fusion
from topicrefine.errors import DomainError


def bundle(sentence, tokens):
    tokens = np.asarray(tokens, dtype=np.float64)
    return EmbeddingBundle(sentence_vector=np.asarray(sentence, dtype=np.float64),
                           token_matrix=tokens,
                           tokens=tuple(f"t{i}" for i in range(tokens.shape[0])))


class TestSoftmax:
    def test_sums_to_one(self):
        w = fusion.softmax(np.array([1.0, 2.0, 3.0]))
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert (w > 0).all()

    def test_shift_invariant_and_stable(self):
        a = fusion.softmax(np.array([1.0, 2.0]))
        b = fusion.softmax(np.array([1001.0, 1002.0]))
        assert np.allclose(a, b)
        assert np.isfinite(fusion.softmax(np.array([1e4, -1e4]))).all()


class TestAttention:
    def test_xavier_bound_and_zero_bias(self):
        p = fusion.init_attention(8, 4, seed=0)
        bound = np.sqrt(6.0 / 12.0)
        assert p.weight.shape == (8, 4)
        assert np.abs(p.weight).max() <= bound
        assert np.array_equal(p.bias, np.zeros(4))

    def test_seed_determinism(self):
        a = fusion.init_attention(8, 4, seed=7)
        b = fusion.init_attention(8, 4, seed=7)
        c = fusion.init_attention(8, 4, seed=8)
        assert np.array_equal(a.weight, b.weight)
        assert not np.array_equal(a.weight, c.weight)

    def test_bad_dims(self):
        with pytest.raises(DomainError):
            fusion.init_attention(0, 4, seed=0)


class TestFuseHybrid:
    def test_output_is_concat(self):
        p = fusion.init_attention(3, 2, seed=0)
        b = bundle([1.0, 0.0, 2.0], [[1.0, 0.0], [0.0, 1.0]])
        out = fusion.fuse_hybrid(b, p)
        assert out.shape == (5,)
        assert np.array_equal(out[:3], b.sentence_vector)
        # Attended part is a convex combination of token rows.
        att = out[3:]
        assert att.min() >= -1e-12 and att.max() <= 1.0 + 1e-12
        assert att.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_token_passthrough(self):
        p = fusion.init_attention(3, 2, seed=0)
        b = bundle([0.5, 0.5, 0.5], [[3.0, -1.0]])
        out = fusion.fuse_hybrid(b, p)
        assert np.allclose(out[3:], [3.0, -1.0])


class TestHybridCache:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        ids = ["doc-1", "tøpic", "w"]
        mat = rng.normal(size=(3, 6))
        path = tmp_path / "h.bin"
        fusion.save_hybrids(path, ids, mat, 4, 2)
        rid, rmat, d_s, d_b = fusion.load_hybrids(path)
        assert rid == ids
        assert (d_s, d_b) == (4, 2)
        assert np.array_equal(rmat, mat)

    def test_byte_identical_rewrites(self, tmp_path):
        mat = np.arange(12, dtype=np.float64).reshape(2, 6)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        fusion.save_hybrids(p1, ["x", "y"], mat, 3, 3)
        fusion.save_hybrids(p2, ["x", "y"], mat, 3, 3)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(DomainError):
            fusion.load_hybrids(path)

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.bin"
        fusion.save_hybrids(path, [], np.zeros((0, 6)), 4, 2)
        ids, mat, d_s, d_b = fusion.load_hybrids(path)
        assert ids == [] and mat.shape == (0, 6)
