"""Quantile windows and the windowed relative-shift diagnostic."""

import numpy as np
import pytest

from schro_gsp.errors import (
    ContractError,
    DegenerateFeatureError,
    DegenerateSignalError,
)
from schro_gsp.diagnose import (
    WindowSet,
    build_windows,
    relative_shift,
    window_signal,
)
from schro_gsp.graph_core import (
    FeatureLocations,
    Signal,
    cluster_graph,
    ring_graph,
)
from schro_gsp.operators import modulation, schrodinger_laplacian
from schro_gsp.propagate import DensePropagator

from conftest import make_instance


class TestBuildWindows:
    @pytest.mark.parametrize("n_bins", [2, 3, 5])
    def test_partition_of_unity(self, rng, n_bins):
        f = FeatureLocations(rng.normal(size=(40, 1)))
        ws = build_windows(f, 0, n_bins)
        assert ws.weights.shape == (n_bins, 40)
        assert ws.weights.min() >= 0.0
        assert ws.weights.max() <= 1.0
        assert np.abs(ws.weights.sum(axis=0) - 1.0).max() <= 1e-10
        assert ws.window_ids == tuple((b,) for b in range(n_bins))
        assert ws.coordinates == (0,)

    def test_two_bins_make_complementary_ramps(self):
        col = np.linspace(0.0, 1.0, 9)
        ws = build_windows(FeatureLocations.single(col), 0, 2)
        # quantile centers 0.25 and 0.75 land on grid values
        assert np.allclose(ws.centers[0], [0.25, 0.75])
        assert np.array_equal(ws.weights[0], 1.0 - ws.weights[1])
        # apex nodes carry full weight; the far side carries none
        assert ws.weights[0][col == 0.25] == 1.0
        assert ws.weights[1][col == 0.75] == 1.0
        assert np.all(ws.weights[0][col <= 0.25] == 1.0)
        assert np.all(ws.weights[1][col >= 0.75] == 1.0)

    def test_ring_angle_windows_split_evenly(self):
        _, f = ring_graph(100)
        ws = build_windows(f, 2, 4)
        sums = ws.weights.sum(axis=1)
        assert np.all(sums >= 0.8 * 25.0)
        assert np.all(sums <= 1.2 * 25.0)

    def test_constant_column_rejected(self):
        f = FeatureLocations(np.ones((6, 1)))
        with pytest.raises(DegenerateFeatureError):
            build_windows(f, 0, 2)

    def test_tied_centers_rejected(self):
        f = FeatureLocations.single([0.0, 0.0, 0.0, 0.0, 1.0])
        with pytest.raises(DegenerateFeatureError):
            build_windows(f, 0, 3)

    def test_too_few_bins_rejected(self, rng):
        f = FeatureLocations(rng.normal(size=(6, 1)))
        with pytest.raises(ContractError):
            build_windows(f, 0, 1)

    def test_product_windows(self, rng):
        f = FeatureLocations(rng.normal(size=(20, 2)))
        a = build_windows(f, 0, 2)
        b = build_windows(f, 1, 3)
        prod = a.product(b)
        assert prod.n_windows == 6
        assert prod.coordinates == (0, 1)
        assert prod.window_ids[0] == (0, 0)
        assert prod.window_ids[-1] == (1, 2)
        # still a partition of unity: sum over pairs factorizes
        assert np.abs(prod.weights.sum(axis=0) - 1.0).max() <= 1e-10
        with pytest.raises(ContractError):
            prod.product(a)


class TestWindowSignal:
    def test_unit_window_normalizes(self, rng):
        g = rng.normal(size=8) + 1j * rng.normal(size=8)
        out = window_signal(g, np.ones(8))
        assert np.abs(out - g / np.linalg.norm(g)).max() <= 1e-12
        assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)

    def test_zero_window_rejected(self, rng):
        g = rng.normal(size=8) + 1j * rng.normal(size=8)
        with pytest.raises(DegenerateSignalError):
            window_signal(g, np.zeros(8))

    def test_energy_splits_across_partition(self, rng):
        f = FeatureLocations(rng.normal(size=(30, 1)))
        ws = build_windows(f, 0, 4)
        g = rng.normal(size=30) + 1j * rng.normal(size=30)
        total = sum(
            np.linalg.norm(np.sqrt(w) * g) ** 2 for _, w in ws.windows()
        )
        assert total == pytest.approx(np.linalg.norm(g) ** 2, rel=1e-10)

    def test_negative_weights_rejected(self, rng):
        g = rng.normal(size=4)
        with pytest.raises(ContractError):
            window_signal(g, np.array([1.0, -0.1, 1.0, 1.0]))

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ContractError):
            window_signal(rng.normal(size=4), np.ones(5))

    def test_two_dimensional_input_rejected(self, rng):
        with pytest.raises(ContractError):
            window_signal(rng.normal(size=(4, 2)), np.ones(4))


def _full_window(col: np.ndarray) -> WindowSet:
    n = col.size
    return WindowSet(
        coordinates=(0,),
        weights=np.ones((1, n)),
        window_ids=((0,),),
        centers=(np.array([float(np.median(col))]),),
    )


class TestRelativeShift:
    def test_identity_map_has_zero_shifts(self, rng):
        graph, f, _ = make_instance(211)
        g = Signal(rng.normal(size=graph.n_nodes)
                   + 1j * rng.normal(size=graph.n_nodes))
        ws = build_windows(f, 0, 3)
        report = relative_shift(lambda s: s, g, f, ws)
        assert report.mean_shift == 0.0
        assert all(not e.missing and e.shift == 0.0 for e in report.entries)

    def test_pure_phase_map_cannot_move_mass(self, rng):
        graph, f, _ = make_instance(223)
        g = Signal(rng.normal(size=graph.n_nodes)
                   + 1j * rng.normal(size=graph.n_nodes))
        ws = build_windows(f, 0, 3)
        mod = modulation(f.column(0), 2.2)
        report = relative_shift(
            lambda s: Signal(mod.apply(s.values)), g, f, ws)
        assert abs(report.mean_shift) <= 1e-12
        assert all(abs(e.shift) <= 1e-12 for e in report.entries)

    def test_positive_rescaling_is_invisible(self, rng):
        graph, f, _ = make_instance(227)
        g = Signal(rng.normal(size=graph.n_nodes)
                   + 1j * rng.normal(size=graph.n_nodes))
        ws = build_windows(f, 0, 3)
        prop = DensePropagator(schrodinger_laplacian(graph, f))

        def layer(s):
            return Signal(prop.apply(0.5, s.values))

        def scaled(s):
            return Signal(3.7 * prop.apply(0.5, s.values))

        base = relative_shift(layer, g, f, ws)
        other = relative_shift(scaled, g, f, ws)
        for a, b in zip(base.entries, other.entries):
            assert a.shift == pytest.approx(b.shift, abs=1e-12)

    def test_full_window_matches_global_centroid(self, rng):
        graph, f, _ = make_instance(229)
        vals = rng.normal(size=graph.n_nodes) + 1j * rng.normal(size=graph.n_nodes)
        vals = vals / np.linalg.norm(vals)
        g = Signal(vals)
        col = f.column(0)
        prop = DensePropagator(schrodinger_laplacian(graph, f))

        def layer(s):
            return Signal(prop.apply(0.4, s.values))

        report = relative_shift(layer, g, f, _full_window(col))
        out = prop.apply(0.4, vals)
        pre = np.dot(col, np.abs(vals) ** 2)
        post = np.dot(col, np.abs(out) ** 2) / np.linalg.norm(out) ** 2
        expected = (post - pre) / col.std()
        assert report.mean_shift == pytest.approx(expected, abs=1e-10)

    def test_vanishing_output_reports_missing(self, rng):
        graph, f, _ = make_instance(233)
        g = Signal(rng.normal(size=graph.n_nodes)
                   + 1j * rng.normal(size=graph.n_nodes))
        ws = build_windows(f, 0, 3)
        report = relative_shift(
            lambda s: Signal(0.0 * s.values), g, f, ws)
        assert report.mean_shift is None
        assert all(e.missing for e in report.entries)
        rows = report.csv_rows()
        assert all(row[2] == "missing" and row[3] == "" for row in rows)
        assert all(len(row) == 7 for row in rows)

    def test_cluster_modulation_shifts_toward_target(self):
        graph, f, g0 = cluster_graph(17)
        ws = build_windows(f, 0, 4)
        prop = DensePropagator(schrodinger_laplacian(graph, f))
        mod = modulation(f.column(0), 4.4)

        def layer(s):
            return Signal(prop.apply(0.3, mod.apply(s.values)))

        report = relative_shift(layer, g0, f, ws)
        assert report.mean_shift is not None
        assert report.mean_shift > 0.05

    def test_constant_windowed_coordinate_rejected(self, rng):
        graph, _, _ = make_instance(239)
        n = graph.n_nodes
        f = FeatureLocations(np.ones((n, 1)))
        g = Signal(rng.normal(size=n) + 1j * rng.normal(size=n))
        ws = WindowSet(
            coordinates=(0,),
            weights=np.ones((1, n)),
            window_ids=((0,),),
            centers=(np.array([1.0]),),
        )
        with pytest.raises(DegenerateFeatureError):
            relative_shift(lambda s: s, g, f, ws)

    def test_size_mismatch_rejected(self, rng):
        graph, f, _ = make_instance(241)
        g = Signal(np.ones(graph.n_nodes + 1, dtype=complex))
        ws = build_windows(f, 0, 2)
        with pytest.raises(ContractError):
            relative_shift(lambda s: s, g, f, ws)
