"""Signature distances, raster compare/search, window extraction, clustering."""

import math

import numpy as np
import pytest
from scipy.cluster import hierarchy
from scipy.spatial.distance import jensenshannon, squareform

from landpat.analysis import (ClusterResult, compare_rasters, distance,
                              extract_window, hierarchical_cluster,
                              search_pattern, write_cluster_csv,
                              write_compare_csv, write_merge_tree_csv,
                              write_search_csv)
from landpat.errors import UsageError
from landpat.grid import CategoricalGrid
from landpat.signatures import Signature, WindowGrid, windowed_signatures

from conftest import make_grid, random_grid


def sig(sid, vector):
    v = np.asarray(vector, dtype=float)
    return Signature(sid, 0.0, v, "composition", tuple(range(len(v))))


def random_simplex(rng, n):
    v = rng.random(n) + 1e-6
    return v / v.sum()


class TestDistance:
    def test_identity(self):
        p = [0.2, 0.3, 0.5]
        for kind in ("euclidean", "manhattan", "jensen-shannon"):
            assert distance(p, p, kind) == 0.0

    def test_disjoint_support_reaches_ln2(self):
        assert distance([1, 0], [0, 1]) == pytest.approx(math.log(2))

    def test_euclidean_and_manhattan(self):
        assert distance([0, 3], [4, 0], "euclidean") == 5.0
        assert distance([0, 3], [4, 0], "manhattan") == 7.0

    def test_jsd_matches_scipy(self):
        rng = np.random.default_rng(223)
        for _ in range(50):
            p = random_simplex(rng, int(rng.integers(2, 12)))
            q = random_simplex(rng, len(p))
            got = distance(p, q)
            assert got == pytest.approx(jensenshannon(p, q) ** 2, abs=1e-12)
            assert got == pytest.approx(distance(q, p), abs=0)
            assert 0.0 <= got <= math.log(2) + 1e-12

    def test_jsd_entropy_formula(self):
        # independent route: mean of the two Kullback-Leibler halves
        rng = np.random.default_rng(227)
        for _ in range(20):
            p = random_simplex(rng, 6)
            q = random_simplex(rng, 6)
            m = (p + q) / 2
            kl = lambda a: float(np.sum(a * np.log(a / m)))
            assert distance(p, q) == pytest.approx((kl(p) + kl(q)) / 2,
                                                   abs=1e-12)

    def test_zero_vector_is_nan(self):
        assert math.isnan(distance([0, 0], [0.5, 0.5]))
        assert math.isnan(distance([0.5, 0.5], [0, 0]))

    def test_length_mismatch(self):
        with pytest.raises(UsageError, match="lengths differ"):
            distance([1], [0.5, 0.5])

    def test_unknown_kind(self):
        with pytest.raises(UsageError, match="euclidean"):
            distance([1], [1], "cosine")


class TestCompareRasters:
    def test_self_comparison_is_zero(self):
        rng = np.random.default_rng(229)
        grid = random_grid(rng, 9, 9, missing_frac=0.0)
        result = compare_rasters(grid, grid, window=3)
        assert all(d == 0.0 for d in result.dist)
        assert result.ids == list(range(1, 10))
        assert result.na_prop_x == result.na_prop_y

    def test_swapped_arguments(self):
        rng = np.random.default_rng(233)
        x = random_grid(rng, 9, 9)
        y = random_grid(rng, 9, 9)
        ab = compare_rasters(x, y, window=3)
        ba = compare_rasters(y, x, window=3)
        assert ab.na_prop_x == ba.na_prop_y
        assert ab.na_prop_y == ba.na_prop_x
        for d1, d2 in zip(ab.dist, ba.dist):
            assert d1 == pytest.approx(d2, abs=1e-15) or \
                (math.isnan(d1) and math.isnan(d2))

    def test_union_class_basis(self):
        x = make_grid([[1, 1], [1, 1]])
        y = make_grid([[2, 2], [2, 2]])
        result = compare_rasters(x, y, kind="composition", window="whole")
        assert result.dist[0] == pytest.approx(math.log(2))

    def test_zero_window_distance_missing(self):
        x = make_grid([[1, 1, -9999, -9999]] * 2)
        y = make_grid([[1, 2, -9999, -9999]] * 2)
        result = compare_rasters(x, y, window=2)
        assert not math.isnan(result.dist[0])
        assert math.isnan(result.dist[1])

    def test_output_grids_on_window_lattice(self):
        rng = np.random.default_rng(239)
        x = random_grid(rng, 7, 8, missing_frac=0.0)
        y = random_grid(rng, 7, 8, missing_frac=0.0)
        result = compare_rasters(x, y, window=3)
        dist = result.grids["dist"]
        assert dist.data.shape == (3, 3)
        assert dist.cellsize == 300
        assert dist.data.ravel().tolist() == pytest.approx(result.dist)
        assert set(result.grids) == {"na_prop_x", "na_prop_y", "dist"}

    def test_geometry_mismatch(self):
        x = make_grid([[1, 1]])
        y = make_grid([[1], [1]])
        with pytest.raises(UsageError, match="co-registered"):
            compare_rasters(x, y)
        shifted = make_grid([[1, 1]], xll=50)
        with pytest.raises(UsageError, match="co-registered"):
            compare_rasters(x, shifted)

    def test_incove_rejected(self):
        grid = make_grid([[1]])
        with pytest.raises(UsageError, match="incove"):
            compare_rasters(grid, grid, kind="incove")


class TestSearchPattern:
    def test_self_match_is_exact(self):
        rng = np.random.default_rng(241)
        target = random_grid(rng, 12, 12, missing_frac=0.0)
        query = extract_window(target, 4, 5)
        result = search_pattern(query, target, window=4)
        assert result.dist[4] == 0.0
        assert int(np.nanargmin(result.dist)) == 4

    def test_gradient_monotonicity(self):
        # class-2 share grows block by block; distance from the pure
        # class-1 query must grow with it
        cols = []
        for j in range(4):
            block = np.ones((4, 4), dtype=int)
            block[:j, :] = 2
            cols.append(block)
        target = make_grid(np.hstack(cols).tolist())
        query = make_grid(np.ones((4, 4), dtype=int).tolist())
        result = search_pattern(query, target, kind="composition", window=4)
        dists = result.dist
        assert dists[0] == 0.0
        assert all(b > a for a, b in zip(dists, dists[1:]))
        expect = [jensenshannon([1, 0], [1 - j / 4, j / 4]) ** 2
                  for j in range(4)]
        assert dists == pytest.approx(expect, abs=1e-12)

    def test_output_grids(self):
        rng = np.random.default_rng(251)
        target = random_grid(rng, 6, 6, missing_frac=0.0)
        query = random_grid(rng, 4, 4, missing_frac=0.0)
        result = search_pattern(query, target, window=3)
        assert result.grids["id"].data.tolist() == [[1, 2], [3, 4]]
        assert result.grids["dist"].data.ravel().tolist() == \
            pytest.approx(result.dist, nan_ok=True)

    def test_empty_query_rejected(self):
        query = make_grid([[-9999]])
        target = make_grid([[1, 2]])
        with pytest.raises(UsageError, match="empty signature"):
            search_pattern(query, target)

    def test_incove_rejected(self):
        grid = make_grid([[1]])
        with pytest.raises(UsageError, match="incove"):
            search_pattern(grid, grid, kind="incove")


class TestExtractWindow:
    def test_whole(self):
        grid = make_grid([[1, 2], [3, 4]])
        out = extract_window(grid, "whole", 1)
        assert np.array_equal(out.data, grid.data)
        assert (out.xll, out.yll) == (grid.xll, grid.yll)

    def test_first_block(self):
        grid = make_grid([[1, 2, 3, 4],
                          [5, 6, 7, 8],
                          [9, 10, 11, 12],
                          [13, 14, 15, 16]])
        out = extract_window(grid, 2, 1)
        assert out.data.tolist() == [[1, 2], [5, 6]]
        assert (out.xll, out.yll) == (0.0, 200.0)  # top-left block sits north

    def test_full_size_block_arithmetic(self):
        wg = WindowGrid("block", 2860, 2333, k=50)
        assert wg.count == 2726
        assert wg.block_extent(2107) == (2200, 2250, 1900, 1950)

    def test_signature_of_extracted_window_matches(self):
        rng = np.random.default_rng(257)
        grid = random_grid(rng, 10, 10)
        sigs = windowed_signatures(grid, "cove", window=4,
                                   class_basis=grid.classes)
        for wid in (1, 2, 5, 9):
            sub = extract_window(grid, 4, wid)
            (direct,) = windowed_signatures(sub, "cove", window="whole",
                                            class_basis=grid.classes)
            assert np.array_equal(direct.vector, sigs[wid - 1].vector)

    def test_bad_ids_and_zone_windows(self):
        grid = make_grid([[1, 1], [1, 1]])
        with pytest.raises(UsageError, match="outside"):
            extract_window(grid, 2, 5)
        zones = make_grid([[1, 2], [1, 2]])
        with pytest.raises(UsageError, match="block"):
            extract_window(grid, zones, 1)


class TestHierarchicalCluster:
    def planted(self):
        # two tight bundles on opposite simplex corners
        vecs = [(0.97, 0.02, 0.01), (0.95, 0.03, 0.02), (0.96, 0.01, 0.03),
                (0.01, 0.97, 0.02), (0.03, 0.95, 0.02), (0.02, 0.96, 0.02)]
        return [sig(i + 1, v) for i, v in enumerate(vecs)]

    def test_planted_partition_all_linkages(self):
        for linkage in ("single", "complete", "average"):
            result = hierarchical_cluster(self.planted(), linkage=linkage, k=2)
            assert result.labels == [1, 1, 1, 2, 2, 2]
            assert result.k == 2
            assert result.linkage == linkage

    def test_k_extremes(self):
        sigs = self.planted()
        assert hierarchical_cluster(sigs, k=1).labels == [1] * 6
        assert hierarchical_cluster(sigs, k=6).labels == [1, 2, 3, 4, 5, 6]

    def test_duplicates_merge_first_at_zero(self):
        sigs = [sig(1, (0.5, 0.5)), sig(2, (0.9, 0.1)), sig(3, (0.5, 0.5))]
        result = hierarchical_cluster(sigs, k=2)
        step, left, right, height = result.merges[0]
        assert (step, left, right, height) == (1, 1, 3, 0.0)
        assert result.labels == [1, 2, 1]

    def test_merge_tree_shape(self):
        sigs = self.planted()
        result = hierarchical_cluster(sigs, k=2)
        m = len(sigs)
        assert len(result.merges) == m - 1
        used = set()
        for step, left, right, height in result.merges:
            assert left not in used and right not in used
            used.update((left, right))
            assert 1 <= left <= m + step - 1
            assert 1 <= right <= m + step - 1
        heights = [h for _, _, _, h in result.merges]
        assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))

    def test_order_invariance(self):
        rng = np.random.default_rng(263)
        vecs = [random_simplex(rng, 5) for _ in range(12)]
        sigs = [sig(i + 1, v) for i, v in enumerate(vecs)]
        base = hierarchical_cluster(sigs, k=4)
        groups = lambda res: frozenset(
            frozenset(i for i, lab in zip(res.ids, res.labels) if lab == g)
            for g in set(res.labels))
        perm = rng.permutation(12)
        shuffled = hierarchical_cluster([sigs[i] for i in perm], k=4)
        assert groups(shuffled) == groups(base)

    def test_matches_scipy_partitions(self):
        rng = np.random.default_rng(269)
        for method in ("single", "complete", "average"):
            vecs = [random_simplex(rng, 6) for _ in range(15)]
            sigs = [sig(i + 1, v) for i, v in enumerate(vecs)]
            X = np.array(vecs)
            D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
            Z = hierarchy.linkage(squareform(D, checks=False), method=method)
            for k in (2, 3, 5):
                mine = hierarchical_cluster(sigs, dist="euclidean",
                                            linkage=method, k=k)
                ref = hierarchy.fcluster(Z, k, criterion="maxclust")
                groups = lambda labels: frozenset(
                    frozenset(np.nonzero(labels == g)[0].tolist())
                    for g in set(labels))
                assert groups(np.array(mine.labels)) == groups(ref)
                heights = sorted(h for _, _, _, h in mine.merges)
                assert heights == pytest.approx(Z[:, 2].tolist(), abs=1e-12)

    def test_tie_break_is_lexicographic(self):
        # equilateral triangle: all pairwise distances equal
        sigs = [sig(1, (1, 0, 0)), sig(2, (0, 1, 0)), sig(3, (0, 0, 1))]
        result = hierarchical_cluster(sigs, dist="euclidean", k=2)
        assert result.merges[0][1:3] == (1, 2)
        assert result.labels == [1, 1, 2]

    def test_zero_signatures_dropped(self):
        sigs = [sig(1, (1, 0)), sig(2, (0, 0)), sig(3, (0, 1)),
                sig(4, (0.5, 0.5))]
        with pytest.warns(UserWarning, match="all-zero"):
            result = hierarchical_cluster(sigs, k=2)
        assert result.dropped == [2]
        assert result.ids == [1, 3, 4]

    def test_nan_distance_rejected(self):
        sigs = [sig(1, (1.0, np.nan)), sig(2, (0.5, 0.5)), sig(3, (0, 1))]
        with pytest.raises(UsageError, match="missing values"):
            hierarchical_cluster(sigs, dist="euclidean", k=2)

    def test_bad_arguments(self):
        sigs = [sig(1, (1, 0)), sig(2, (0, 1))]
        with pytest.raises(UsageError, match="linkage"):
            hierarchical_cluster(sigs, linkage="ward", k=2)
        with pytest.raises(UsageError, match="between 1 and"):
            hierarchical_cluster(sigs, k=3)
        with pytest.raises(UsageError, match="at least 2"):
            hierarchical_cluster(sigs[:1], k=1)


class TestResultCsv:
    def test_compare_csv(self, tmp_path):
        x = make_grid([[1, 1, -9999, -9999]] * 2)
        y = make_grid([[1, 2, -9999, -9999]] * 2)
        result = compare_rasters(x, y, window=2)
        path = tmp_path / "cmp.csv"
        write_compare_csv(result, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "id,na_prop_x,na_prop_y,dist"
        assert lines[1].startswith("1,0,0,")
        assert lines[2] == "2,1,1,NA"

    def test_search_csv(self, tmp_path):
        target = make_grid([[1, 1, 2, 2]] * 2)
        query = make_grid([[1, 1], [1, 1]])
        result = search_pattern(query, target, window=2)
        path = tmp_path / "srch.csv"
        write_search_csv(result, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "id,na_prop,dist"
        assert lines[1] == "1,0,0"

    def test_cluster_and_tree_csv(self, tmp_path):
        sigs = [sig(1, (0.5, 0.5)), sig(2, (0.9, 0.1)), sig(3, (0.5, 0.5))]
        result = hierarchical_cluster(sigs, k=2)
        cl, tree = tmp_path / "cl.csv", tmp_path / "tree.csv"
        write_cluster_csv(result, str(cl))
        write_merge_tree_csv(result, str(tree))
        assert cl.read_text().splitlines() == \
            ["id,cluster", "1,1", "2,2", "3,1"]
        lines = tree.read_text().splitlines()
        assert lines[0] == "step,left,right,height"
        assert lines[1] == "1,1,3,0"
