import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import remsim as rs
from remsim.ions import (
    CLASS_ANCHORS,
    GridRangeError,
    class_depth_decomposition,
    validate_structure,
)

# independent enumeration oracle: all 9x9 transition offsets of each class,
# computed from raw splittings without going through HyperfineStructure
GROUND = [0.0, 29.54, 86.78]
EXCITED = [0.0, 62.36, 169.28]


def oracle_offsets(class_index):
    gi, ej = (class_index - 1) // 3, 2 - (class_index - 1) % 3
    base = EXCITED[ej] - GROUND[gi]
    return sorted(EXCITED[k] - GROUND[l] - base for l in range(3) for k in range(3))


class TestHyperfineStructure:
    def test_anchor_assignments(self, default_ensemble):
        # class-I anchors |1/2>g -> |5/2>e, class-IX |5/2>g -> |1/2>e
        assert CLASS_ANCHORS[1] == (0, 2)
        assert CLASS_ANCHORS[9] == (2, 0)
        assert CLASS_ANCHORS[5] == (1, 1)

    def test_transition_offsets_match_enumeration(self, default_ensemble):
        st_ = default_ensemble.structure
        for c in range(1, 10):
            got = st_.transition_offsets(c)
            assert np.allclose(got, oracle_offsets(c), atol=1e-9)

    def test_anchor_offset_is_exact_zero(self, default_ensemble):
        for c in range(1, 10):
            offs = default_ensemble.structure.transition_offsets(c)
            assert np.count_nonzero(offs == 0.0) == 1

    def test_degenerate_structure_all_zero(self):
        st_ = rs.HyperfineStructure(
            [0.0, 0.0, 0.0], [0.0, 0.0, 0.0],
            np.full((3, 3), 1 / 3),
            {"H": np.ones((3, 3)), "V": np.ones((3, 3))},
            {"H": 1.46, "V": 1.64},
        )
        assert np.allclose(st_.transition_offsets(3), 0.0)
        assert st_.useful_bandwidth(5) == 0.0

    def test_useful_bandwidths(self, default_ensemble):
        st_ = default_ensemble.structure
        assert st_.useful_bandwidth(8) == pytest.approx(5.12, abs=1e-9)
        assert st_.useful_bandwidth(5) == pytest.approx(32.82, abs=1e-9)

    def test_class_v_left_neighbor_is_32_82(self, default_ensemble):
        offs = default_ensemble.structure.transition_offsets(5)
        below = offs[offs < 0]
        assert -below.max() == pytest.approx(32.82, abs=1e-9)

    def test_class_index_validation(self, default_ensemble):
        for bad in (0, 10, -1):
            with pytest.raises(ValueError):
                default_ensemble.structure.transition_offsets(bad)


class TestValidateStructure:
    def test_default_material_passes(self, default_ensemble):
        report = validate_structure(default_ensemble.structure)
        assert report["all_passed"][0], report

    def test_unnormalized_branching_flagged(self):
        cfg = rs.default_material()
        cfg["branching"][0] = [0.3, 0.3, 0.3]
        report = validate_structure(rs.structure_from_config(cfg))
        assert not report["branching_rows_normalized"][0]
        assert not report["all_passed"][0]

    def test_unordered_offsets_flagged(self):
        cfg = rs.default_material()
        cfg["ground_offsets_mhz"] = [0.0, 86.78, 29.54]
        report = validate_structure(rs.structure_from_config(cfg))
        assert not report["ground_offsets_ordered"][0]

    def test_antihole_constraint_value(self, default_ensemble):
        report = validate_structure(default_ensemble.structure)
        ok, value = report["antihole_57.24"]
        assert ok and value == pytest.approx(57.24, abs=0.05)


class TestAbsorption:
    def test_unpumped_flat_h(self, default_ensemble):
        sp = rs.absorption(default_ensemble, "H")
        assert np.allclose(sp.depth, 1.46, atol=1e-12)

    def test_unpumped_flat_v(self, default_ensemble):
        sp = rs.absorption(default_ensemble, "V")
        assert np.allclose(sp.depth, 1.64, atol=1e-12)

    def test_zero_population_zero_depth(self, small_ensemble):
        small_ensemble.pop[:] = 0.0
        sp = rs.absorption(small_ensemble, "H")
        # out-of-window reservoir still contributes near the edges only
        mid = np.abs(sp.detunings) < 50.0
        assert np.all(sp.depth[mid] >= 0.0)
        core = np.abs(sp.detunings) < 1.0
        # every contributing reference bin for the core sits inside the
        # zeroed window except the farthest family
        assert sp.depth[core].max() < 1.46

    def test_probe_outside_grid_raises(self, small_ensemble):
        with pytest.raises(GridRangeError):
            rs.absorption(small_ensemble, "H", detunings=np.array([500.0]))

    def test_depth_nonnegative_after_pumping(self, prepared_ensemble):
        sp = rs.absorption(prepared_ensemble, "H")
        assert sp.depth.min() >= 0.0

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(0.0, 1.0))
    def test_linearity_in_populations(self, a):
        cfg = rs.default_material()
        cfg["grid"] = {"min_mhz": -120.0, "max_mhz": 120.0, "bin_mhz": 0.05}
        small_ensemble = rs.ensemble_from_config(cfg)
        ens1 = small_ensemble.copy()
        ens2 = small_ensemble.copy()
        r = np.random.default_rng(42)
        for ens in (ens1, ens2):
            p = r.random((ens.pop.shape[0], 3))
            ens.pop = p / p.sum(axis=1, keepdims=True)
        mix = small_ensemble.copy()
        mix.pop = a * ens1.pop + (1 - a) * ens2.pop
        d_mix = rs.absorption(mix, "H").depth
        d_lin = a * rs.absorption(ens1, "H").depth + (1 - a) * rs.absorption(ens2, "H").depth
        assert np.allclose(d_mix, d_lin, atol=1e-9)

    def test_class_decomposition_sums_to_total(self, prepared_ensemble):
        nu = np.linspace(-6.0, 6.0, 301)
        dec = class_depth_decomposition(prepared_ensemble, "H", nu)
        total = rs.absorption(prepared_ensemble, "H", nu).depth
        assert np.allclose(dec.sum(axis=0), total, atol=1e-9)

    def test_class_ensemble_equivalence(self, default_ensemble):
        # contributing (g, e) sets from the grid model match the 9-class
        # enumeration at random probe frequencies
        st_ = default_ensemble.structure
        r = np.random.default_rng(7)
        probes = r.uniform(-100, 100, 120)
        T = st_.transition_table
        for nu in probes:
            grid_pairs = set()
            for g, e in itertools.product(range(3), range(3)):
                if default_ensemble.population_at(np.array([nu - T[g, e]]), g)[0] > 0:
                    grid_pairs.add((g, e))
            oracle_pairs = {CLASS_ANCHORS[c] for c in range(1, 10)}
            assert grid_pairs == oracle_pairs  # unpumped: every class contributes


class TestEnsembleState:
    def test_initial_conservation(self, default_ensemble):
        assert default_ensemble.check_conservation()

    def test_reset_restores_uniform(self, prepared_ensemble):
        ens = prepared_ensemble.copy()
        ens.reset()
        assert np.allclose(ens.pop, 1 / 3)

    def test_out_of_window_reservoir(self, small_ensemble):
        vals = small_ensemble.population_at(np.array([-500.0, 500.0]), 0)
        assert np.allclose(vals, 1 / 3)

    def test_spectrum_csv_roundtrip(self, small_ensemble, tmp_path):
        sp = rs.absorption(small_ensemble, "H")
        path = tmp_path / "s.csv"
        sp.to_csv(path)
        back = rs.AbsorptionSpectrum.from_csv(path)
        assert np.allclose(back.depth, sp.depth, atol=1e-6)
        assert np.allclose(back.detunings, sp.detunings, atol=1e-6)
