"""Viewpoint ambiguity ranking: descent matcher, tables, splits, export."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewrank import ambiguity, so3, synthworld
from viewrank.ambiguity import (
    CSV_COLUMNS,
    AmbiguityTable,
    MatchedPair,
    best_orientation,
    export_sorted_pairs,
    most_similar_view,
    normalize_ambiguity,
    rank_object,
    split_by_threshold,
)
from viewrank.codebook import build_codebook, roll_aligned_cossim


class TestMostSimilarView:
    def test_self_match_is_exact(self, pair, codebooks):
        a, _ = pair
        rng = np.random.default_rng(1)
        for _ in range(5):
            r = so3.random_rotation(rng)
            z = synthworld.render_embedding(a, r)
            r_hat, s = most_similar_view(z, a, codebooks[0])
            assert s == pytest.approx(1.0, abs=1e-6)
            z_hat = synthworld.render_embedding(a, r_hat)
            assert roll_aligned_cossim(z, z_hat) == pytest.approx(1.0, abs=1e-6)

    def test_hidden_view_matches_twin_perfectly(self, pair, codebooks, hidden_rotation):
        a, b = pair
        z = synthworld.render_embedding(a, hidden_rotation)
        _, s = most_similar_view(z, b, codebooks[1])
        assert s == pytest.approx(1.0, abs=1e-6)

    def test_monotone_in_descent_steps(self, pair, codebooks, visible_rotation):
        a, b = pair
        z = synthworld.render_embedding(a, visible_rotation)
        sims = [most_similar_view(z, b, codebooks[1], descent_steps=k)[1] for k in (0, 2, 8, 32)]
        for lo, hi in zip(sims, sims[1:]):
            assert hi >= lo - 1e-12

    def test_zero_steps_returns_codebook_seed(self, pair, codebooks):
        a, b = pair
        z = synthworld.render_embedding(a, so3.look_at([0.0, 1.0, 0.0], 0.3))
        cb = codebooks[1]
        r0, s0 = most_similar_view(z, b, cb, descent_steps=0)
        scores = cb.scores(z)
        i = int(np.argmax(scores))
        assert r0 == cb.rotations[i]
        assert s0 == pytest.approx(float(scores[i]), abs=1e-12)

    def test_descent_beats_seed(self, pair, codebooks, visible_rotation):
        a, b = pair
        z = synthworld.render_embedding(a, visible_rotation)
        _, s0 = most_similar_view(z, b, codebooks[1], descent_steps=0)
        _, s = most_similar_view(z, b, codebooks[1], descent_steps=32)
        assert s >= s0 - 1e-12

    def test_returned_similarity_matches_rendering(self, pair, codebooks):
        a, b = pair
        z = synthworld.render_embedding(a, so3.look_at([0.4, -0.3, 0.86]))
        r_hat, s = most_similar_view(z, b, codebooks[1])
        z_hat = synthworld.render_embedding(b, r_hat)
        assert roll_aligned_cossim(z, z_hat) == pytest.approx(s, abs=1e-9)

    def test_validation(self, pair, codebooks):
        _, b = pair
        z = np.zeros(b.descriptor_dim)
        with pytest.raises(ValueError):
            most_similar_view(z, b, codebooks[1])
        with pytest.raises(ValueError):
            most_similar_view(np.ones(b.descriptor_dim), b, codebooks[1], descent_steps=-1)


class TestNormalizeAmbiguity:
    def test_affine_examples(self):
        out = normalize_ambiguity([0.2, 0.6, 1.0])
        assert np.allclose(out, [0.0, 0.5, 1.0])

    def test_all_equal_maps_to_zero(self):
        assert np.array_equal(normalize_ambiguity([0.7, 0.7, 0.7]), np.zeros(3))

    def test_near_equal_degenerate(self):
        assert np.array_equal(normalize_ambiguity([0.5, 0.5 + 1e-13]), np.zeros(2))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            normalize_ambiguity([])

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=30))
    def test_range_and_order_preserved(self, raw):
        out = normalize_ambiguity(raw)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
        v = np.asarray(raw)
        for i in range(len(raw)):
            for j in range(len(raw)):
                if v[i] < v[j]:
                    assert out[i] <= out[j] + 1e-12

    @given(
        st.lists(st.floats(-3, 3), min_size=2, max_size=20),
        st.floats(0.1, 10.0),
        st.floats(-5, 5),
    )
    def test_affine_invariance(self, raw, scale, shift):
        v = np.asarray(raw)
        if np.ptp(v) <= 1e-6:
            return
        out1 = normalize_ambiguity(v)
        out2 = normalize_ambiguity(scale * v + shift)
        assert np.allclose(out1, out2, atol=1e-6)


class TestRankObject:
    def test_table_shape_and_sorting(self, tables, coarse_grid):
        t = tables["A"]
        assert t.object_class == "A"
        assert len(t) == len(coarse_grid)
        raw = t.raw_similarity
        assert np.all(raw[:-1] >= raw[1:])
        assert np.all(t.ambiguity >= 0.0) and np.all(t.ambiguity <= 1.0)
        assert t.ambiguity[0] == pytest.approx(1.0)
        assert t.ambiguity[-1] == pytest.approx(0.0)
        # Normalized ambiguity is the affine rescaling of raw similarity.
        assert np.allclose(t.ambiguity, normalize_ambiguity(raw), atol=1e-12)

    def test_hidden_views_saturate(self, pair, tables):
        # Every orientation hiding the differing patch must sit at the top of
        # the ranking with raw similarity 1.
        t = tables["A"]
        for p in t.pairs:
            if not synthworld.patch_visible(pair, p.r_a):
                assert p.similarity == pytest.approx(1.0, abs=1e-6)

    def test_visible_views_below_one(self, pair, tables):
        t = tables["A"]
        vals = [
            p.similarity
            for p in t.pairs
            if synthworld.patch_visible(pair, p.r_a)
        ]
        assert min(vals) < 0.999

    def test_matched_class_is_other_twin(self, tables):
        assert {p.matched_class for p in tables["A"].pairs} == {"B"}
        assert {p.matched_class for p in tables["B"].pairs} == {"A"}

    def test_grid_meta(self, tables, coarse_grid):
        assert tables["A"].grid_meta == {
            "coarse_dirs": coarse_grid.n_dirs,
            "coarse_inplane": coarse_grid.n_inplane,
            "descent_steps": 16,
        }

    def test_similarity_is_lower_bounded_by_probe(self, pair, tables, codebooks):
        # Raw similarity at each orientation is a maximum, so it must beat any
        # explicit probe view of the other twin.
        a, b = pair
        rng = np.random.default_rng(7)
        for p in tables["A"].pairs[::37]:
            z = synthworld.render_embedding(a, p.r_a)
            probe = synthworld.render_embedding(b, so3.random_rotation(rng))
            assert p.similarity >= roll_aligned_cossim(z, probe) - 1e-6

    def test_identical_twin_saturates(self, coarse_grid_small):
        # Ranking an object against an exact copy matches every orientation
        # to itself: raw similarity ~1 everywhere, limited only by how far
        # the descent converges.
        a, _ = synthworld.make_ambiguous_pair(0, n_blobs=64, d=8)
        clone = synthworld.SynthObject(
            a.positions.copy(), a.descriptors.copy(),
            class_id="B", group_id=a.group_id, meta=dict(a.meta),
        )
        cb = build_codebook(clone, so3.build_view_grid(128, 4))
        t = rank_object(a, [clone], [cb], coarse_grid_small, descent_steps=32)
        assert np.allclose(t.raw_similarity, 1.0, atol=1e-4)

    def test_threads_do_not_change_result(self, pair, codebooks, coarse_grid_small):
        a, b = pair
        t1 = rank_object(a, [b], [codebooks[1]], coarse_grid_small, descent_steps=8, threads=1)
        t4 = rank_object(a, [b], [codebooks[1]], coarse_grid_small, descent_steps=8, threads=4)
        assert np.array_equal(t1.raw_similarity, t4.raw_similarity)
        assert np.array_equal(t1.ambiguity, t4.ambiguity)
        assert all(p1.r_b == p4.r_b for p1, p4 in zip(t1.pairs, t4.pairs))

    def test_validation(self, pair, codebooks, coarse_grid):
        a, b = pair
        with pytest.raises(ValueError):
            rank_object(a, [], [], coarse_grid)
        with pytest.raises(ValueError):
            rank_object(a, [b], [], coarse_grid)

    def test_twin_symmetry_of_raw_values(self, tables):
        # The twins see near-mirror-image ambiguity structure; on a finite
        # coarse grid the sorted raw similarities agree only approximately.
        ra = np.sort(tables["A"].raw_similarity)
        rb = np.sort(tables["B"].raw_similarity)
        assert np.max(np.abs(ra - rb)) < 0.05


class TestTableQueries:
    def test_lookup_matches_nearest_index(self, tables):
        t = tables["A"]
        rng = np.random.default_rng(3)
        for _ in range(20):
            r = so3.random_rotation(rng)
            assert t.lookup(r) == t.ambiguity[t.nearest_index(r)]

    def test_lookup_batch_matches_scalar(self, tables):
        t = tables["A"]
        rng = np.random.default_rng(4)
        rots = [so3.random_rotation(rng) for _ in range(32)]
        batch = t.lookup_batch(np.array([r.q for r in rots]))
        assert np.array_equal(batch, [t.lookup(r) for r in rots])

    def test_exact_grid_point(self, tables):
        t = tables["A"]
        assert t.nearest_index(t.pairs[10].r_a) == 10

    def test_nearest_uses_quaternion_double_cover(self, tables):
        t = tables["A"]
        r = t.pairs[5].r_a
        flipped = so3.Rotation.from_quat(-r.q)
        assert t.nearest_index(flipped) == 5

    def test_json_roundtrip(self, tmp_path, tables):
        t = tables["A"]
        path = tmp_path / "table.json"
        t.save(path)
        back = AmbiguityTable.load(path)
        assert back.object_class == t.object_class
        assert back.grid_meta == t.grid_meta
        assert np.allclose(back.ambiguity, t.ambiguity, atol=1e-15)
        assert np.allclose(back.raw_similarity, t.raw_similarity, atol=1e-15)
        assert all(
            p1.r_a.isclose(p2.r_a, 1e-12) and p1.matched_class == p2.matched_class
            for p1, p2 in zip(back.pairs, t.pairs)
        )

    def test_length_mismatch_rejected(self, tables):
        t = tables["A"]
        with pytest.raises(ValueError):
            AmbiguityTable(
                object_class="A",
                pairs=t.pairs,
                ambiguity=t.ambiguity[:-1],
                grid_meta={},
            )


class TestSplitByThreshold:
    def test_partition(self, tables):
        t = tables["A"]
        split = split_by_threshold(t, 0.5)
        assert split.threshold == 0.5
        assert len(split.train_rotations) + len(split.ambiguous_rotations) == len(t)
        train = set(split.train_rotations)
        for p, v in zip(t.pairs, t.ambiguity):
            assert (p.r_a in train) == (v < 0.5)

    def test_boundaries(self, tables):
        t = tables["A"]
        assert split_by_threshold(t, 0.0).train_rotations == ()
        full = split_by_threshold(t, 1.0)
        # Strict < keeps only the max-ambiguity entries out of train.
        assert len(full.ambiguous_rotations) == int(np.sum(t.ambiguity >= 1.0))

    def test_strictly_below(self, tables):
        t = tables["A"]
        v = float(t.ambiguity[len(t) // 2])
        split = split_by_threshold(t, v)
        assert all(t.lookup(r) < v for r in split.train_rotations)

    def test_train_orientations_hide_patch_at_low_threshold(self, pair, tables):
        split = split_by_threshold(tables["A"], 0.05)
        assert len(split.train_rotations) > 0
        visible = [synthworld.patch_visible(pair, r) for r in split.train_rotations]
        assert np.mean(visible) > 0.9

    def test_monotone_in_threshold(self, tables):
        t = tables["A"]
        sizes = [len(split_by_threshold(t, a).train_rotations) for a in (0.1, 0.3, 0.6, 1.0)]
        assert sizes == sorted(sizes)

    def test_out_of_range_rejected(self, tables):
        with pytest.raises(ValueError):
            split_by_threshold(tables["A"], -0.1)
        with pytest.raises(ValueError):
            split_by_threshold(tables["A"], 1.5)


class TestBestOrientation:
    def test_matches_argmin(self, tables):
        t = tables["A"]
        r = best_orientation(t)
        assert t.lookup(r) == float(np.min(t.ambiguity))
        assert r == t.pairs[int(np.argmin(t.ambiguity))].r_a

    def test_best_orientation_shows_patch(self, pair, tables):
        assert synthworld.patch_visible(pair, best_orientation(tables["A"]))

    def test_empty_rejected(self):
        t = AmbiguityTable(object_class="A", pairs=(), ambiguity=np.zeros(0), grid_meta={})
        with pytest.raises(ValueError):
            best_orientation(t)


class TestExportSortedPairs:
    def test_csv_contents(self, tmp_path, tables):
        t = tables["A"]
        path = tmp_path / "pairs.csv"
        export_sorted_pairs(t, path)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == len(t) + 1
        for i, row in enumerate(rows[1:]):
            assert int(row[0]) == i
            assert float(row[1]) == pytest.approx(t.pairs[i].similarity, abs=1e-15)
            assert float(row[2]) == pytest.approx(float(t.ambiguity[i]), abs=1e-15)
            assert row[11] == t.pairs[i].matched_class
        # Quaternions round-trip through the .17g formatting.
        q = [float(v) for v in rows[1][3:7]]
        assert so3.Rotation.from_quat(q).isclose(t.pairs[0].r_a, 1e-12)

    def test_unwritable_path(self, tables, tmp_path):
        with pytest.raises(OSError, match="sorted pairs"):
            export_sorted_pairs(tables["A"], tmp_path / "no_dir" / "pairs.csv")

    def test_rewrites_identically(self, tmp_path, tables):
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        export_sorted_pairs(tables["A"], p1)
        export_sorted_pairs(tables["A"], p2)
        assert p1.read_bytes() == p2.read_bytes()
