import math

import numpy as np
import pytest

import hdlrag._kernels as kernels
from hdlrag.errors import IndexFormatError
from hdlrag.index import (
    FORMAT_VERSION,
    MAGIC,
    SQRT2,
    VectorIndex,
    build_index,
    load_index,
    relevance_from_distance,
    save_index,
    search,
)


def _unit_rows(rng, n, dim):
    rows = rng.normal(size=(n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _pairs(rng, n, dim):
    rows = _unit_rows(rng, n, dim)
    return [(f"doc-{i:04d}", rows[i]) for i in range(n)]


def oracle_scan(pairs, query, k):
    """Independent exhaustive reference: float64 end to end, stable sort."""
    dists = [(math.dist(list(vec), list(query)), i) for i, (_, vec) in enumerate(pairs)]
    dists.sort(key=lambda t: (t[0], t[1]))
    return [(pairs[i][0], d) for d, i in dists[:k]]


class TestRelevance:
    def test_zero_distance(self):
        assert relevance_from_distance(0.0) == 1.0

    def test_sqrt2_is_zero(self):
        assert relevance_from_distance(SQRT2) == pytest.approx(0.0, abs=1e-15)

    def test_antipodal(self):
        assert relevance_from_distance(2.0) == pytest.approx(1 - SQRT2, abs=1e-12)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            relevance_from_distance(-0.1)

    def test_strictly_monotone(self):
        rng = np.random.default_rng(7)
        ds = np.sort(rng.uniform(0, 2, size=1000))
        rels = [relevance_from_distance(float(d)) for d in ds]
        for i in range(len(rels) - 1):
            if ds[i + 1] > ds[i]:
                assert rels[i + 1] < rels[i]


class TestBuildIndex:
    def test_three_pairs_searchable(self):
        rng = np.random.default_rng(0)
        idx = build_index(_pairs(rng, 3, 16))
        assert len(idx) == 3
        hits = search(idx, _unit_rows(rng, 1, 16)[0], k=2)
        assert len(hits) == 2

    def test_mixed_dims_rejected_naming_id(self):
        rng = np.random.default_rng(1)
        a = _unit_rows(rng, 1, 384)[0]
        b = _unit_rows(rng, 1, 512)[0]
        with pytest.raises(ValueError, match="'second'"):
            build_index([("first", a), ("second", b)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            build_index([])

    def test_duplicate_id_rejected(self):
        rng = np.random.default_rng(2)
        rows = _unit_rows(rng, 2, 8)
        with pytest.raises(ValueError, match="duplicate"):
            build_index([("same", rows[0]), ("same", rows[1])])

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError, match="unit"):
            build_index([("x", np.ones(8))])

    def test_entry_order_is_input_order(self):
        rng = np.random.default_rng(3)
        pairs = _pairs(rng, 10, 8)
        idx = build_index(pairs)
        assert idx.ids == [p[0] for p in pairs]

    def test_vectors_read_only(self):
        rng = np.random.default_rng(4)
        idx = build_index(_pairs(rng, 3, 8))
        with pytest.raises(ValueError):
            idx.vectors[0, 0] = 5.0


class TestSearch:
    def test_self_match_first(self):
        rng = np.random.default_rng(5)
        pairs = _pairs(rng, 20, 32)
        idx = build_index(pairs)
        query = np.asarray(pairs[7][1], dtype=np.float32).astype(np.float64)
        hits = search(idx, query, k=3)
        assert hits[0].doc_id == "doc-0007"
        assert hits[0].distance == pytest.approx(0.0, abs=1e-6)
        assert hits[0].relevance == pytest.approx(1.0, abs=1e-6)

    def test_matches_oracle_on_50(self):
        rng = np.random.default_rng(6)
        pairs = _pairs(rng, 50, 24)
        idx = build_index(pairs)
        query = _unit_rows(rng, 1, 24)[0]
        hits = search(idx, query, k=10)
        expected = oracle_scan(pairs, query, 10)
        assert [h.doc_id for h in hits] == [doc_id for doc_id, _ in expected]
        for hit, (_, dist) in zip(hits, expected):
            assert hit.distance == pytest.approx(dist, rel=1e-6, abs=1e-9)

    def test_k_larger_than_index(self):
        rng = np.random.default_rng(7)
        idx = build_index(_pairs(rng, 3, 8))
        assert len(search(idx, _unit_rows(rng, 1, 8)[0], k=10)) == 3

    def test_k_zero_rejected(self):
        rng = np.random.default_rng(8)
        idx = build_index(_pairs(rng, 3, 8))
        with pytest.raises(ValueError):
            search(idx, _unit_rows(rng, 1, 8)[0], k=0)

    def test_dim_mismatch_rejected(self):
        rng = np.random.default_rng(9)
        idx = build_index(_pairs(rng, 3, 8))
        with pytest.raises(ValueError, match="shape"):
            search(idx, _unit_rows(rng, 1, 16)[0], k=1)

    def test_exact_tie_breaks_by_entry_order(self):
        base = np.zeros(4)
        base[0] = 1.0
        other = np.zeros(4)
        other[1] = 1.0
        # Entries 0 and 2 are bit-identical: equidistant from any query.
        idx = build_index([("first", base), ("middle", other), ("duplicate", base)])
        query = np.zeros(4)
        query[2] = 1.0
        hits = search(idx, query, k=3)
        tied = [h.doc_id for h in hits if h.doc_id in ("first", "duplicate")]
        assert tied == ["first", "duplicate"]

    def test_hit_relevance_consistent_with_distance(self):
        rng = np.random.default_rng(10)
        idx = build_index(_pairs(rng, 10, 8))
        for hit in search(idx, _unit_rows(rng, 1, 8)[0], k=10):
            assert hit.relevance == relevance_from_distance(hit.distance)


class TestKernelBackends:
    def test_python_backend_always_available(self):
        assert "python" in kernels.available_backends()

    def test_compiled_backend_built(self):
        assert "compiled" in kernels.available_backends()

    def test_backends_agree(self):
        rng = np.random.default_rng(11)
        matrix = np.ascontiguousarray(_unit_rows(rng, 200, 64), dtype=np.float32)
        query = _unit_rows(rng, 1, 64)[0]
        python = kernels.get_backend("python")(matrix, query)
        for name in kernels.available_backends():
            out = kernels.get_backend(name)(matrix, query)
            assert np.allclose(out, python, rtol=1e-12, atol=1e-12), name

    def test_search_identical_under_either_backend(self, monkeypatch):
        rng = np.random.default_rng(12)
        pairs = _pairs(rng, 100, 32)
        idx = build_index(pairs)
        query = _unit_rows(rng, 1, 32)[0]
        results = {}
        for name in kernels.available_backends():
            monkeypatch.setattr(kernels, "BACKEND", name)
            results[name] = search(idx, query, k=10)
        reference = results["python"]
        for name, hits in results.items():
            assert [h.doc_id for h in hits] == [h.doc_id for h in reference], name
            # Summation order differs between backends; distances may move
            # by an ulp but never enough to reorder continuous data.
            assert np.allclose(
                [h.distance for h in hits], [h.distance for h in reference], rtol=1e-12
            ), name

    def test_unknown_backend_rejected(self):
        with pytest.raises(KeyError):
            kernels.get_backend("cuda")


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(13)
        idx = build_index(_pairs(rng, 100, 16))
        path = tmp_path / "idx.bin"
        save_index(idx, path)
        loaded = load_index(path)
        assert loaded.ids == idx.ids
        assert loaded.dim == idx.dim
        assert loaded.vectors.tobytes() == idx.vectors.tobytes()

    def test_loaded_index_searchable(self, tmp_path):
        rng = np.random.default_rng(14)
        pairs = _pairs(rng, 30, 16)
        idx = build_index(pairs)
        path = tmp_path / "idx.bin"
        save_index(idx, path)
        loaded = load_index(path)
        query = _unit_rows(rng, 1, 16)[0]
        assert [h.doc_id for h in search(loaded, query, 5)] == [
            h.doc_id for h in search(idx, query, 5)
        ]

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTANIDX" + b"\x00" * 64)
        with pytest.raises(IndexFormatError, match="magic"):
            load_index(path)

    def test_truncation_detected(self, tmp_path):
        rng = np.random.default_rng(15)
        idx = build_index(_pairs(rng, 10, 8))
        path = tmp_path / "idx.bin"
        save_index(idx, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 9])
        with pytest.raises(IndexFormatError, match="checksum|truncated"):
            load_index(path)

    def test_corruption_detected(self, tmp_path):
        rng = np.random.default_rng(16)
        idx = build_index(_pairs(rng, 10, 8))
        path = tmp_path / "idx.bin"
        save_index(idx, path)
        data = bytearray(path.read_bytes())
        data[len(MAGIC) + 30] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFormatError, match="checksum"):
            load_index(path)

    def test_unsupported_version(self, tmp_path):
        rng = np.random.default_rng(17)
        idx = build_index(_pairs(rng, 3, 8))
        path = tmp_path / "idx.bin"
        save_index(idx, path)
        data = bytearray(path.read_bytes())
        # Bump the version field, then refresh the trailing checksum.
        import struct
        import zlib

        struct.pack_into("<I", data, len(MAGIC), FORMAT_VERSION + 1)
        body = bytes(data[:-4])
        path.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
        with pytest.raises(IndexFormatError, match="version"):
            load_index(path)

    def test_unicode_ids_survive(self, tmp_path):
        rng = np.random.default_rng(18)
        rows = _unit_rows(rng, 2, 8)
        idx = build_index([("модуль-α", rows[0]), ("adder/β#2", rows[1])])
        path = tmp_path / "idx.bin"
        save_index(idx, path)
        assert load_index(path).ids == ["модуль-α", "adder/β#2"]
