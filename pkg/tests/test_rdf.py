import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eelm_mrfo.harness import fixture_corpus_path
from eelm_mrfo.rdf import (
    FeatureDataset,
    RdfConfig,
    enumerate_neighbors,
    featurize,
    formation_energy,
    partial_rdf,
    read_feature_csv,
    reference_energies,
    rdf_values,
    structure_formation_energy,
    write_feature_csv,
)
from eelm_mrfo.structure import CrystalStructure, StructureParseError, format_xyz, parse_xyz, read_xyz
from oracles import brute_force_neighbors, gaussian_rdf_point

CORPUS = read_xyz(fixture_corpus_path())


def cubic(edge, species, frac, energy=None):
    return CrystalStructure(np.eye(3) * edge, species, frac, energy)


def random_structure(seed, n_sites=4):
    rng = np.random.default_rng(seed)
    lattice = np.diag(rng.uniform(3.0, 6.0, 3)) + rng.uniform(-0.8, 0.8, (3, 3)) * (1 - np.eye(3))
    species = list(rng.choice(["Li", "Ge"], n_sites))
    return CrystalStructure(lattice, species, rng.random((n_sites, 3)), -3.0)


class TestStructure:
    def test_wraps_fractional(self):
        s = cubic(2.0, ["A"], [[1.25, -0.5, 3.0]])
        np.testing.assert_allclose(s.frac_coords, [[0.25, 0.5, 0.0]])
        assert np.all((s.frac_coords >= 0) & (s.frac_coords < 1))

    def test_degenerate_lattice(self):
        with pytest.raises(ValueError, match="degenerate"):
            CrystalStructure([[1, 0, 0], [2, 0, 0], [0, 0, 1]], ["A"], [[0, 0, 0]])

    def test_label_count(self):
        with pytest.raises(ValueError):
            CrystalStructure(np.eye(3), ["A", "B"], [[0, 0, 0]])

    def test_composition(self):
        s = cubic(4.0, ["Li", "Ge", "Li"], np.zeros((3, 3)))
        assert s.composition() == {"Li": 2, "Ge": 1}
        assert s.molar_fraction("Li") == pytest.approx(2 / 3)
        assert s.volume == pytest.approx(64.0)

    def test_supercell(self):
        s = cubic(3.0, ["Li", "Ge"], [[0, 0, 0], [0.5, 0.5, 0.5]]).supercell((2, 1, 1))
        assert s.n_sites == 4 and s.volume == pytest.approx(54.0)


class TestXyz:
    def test_corpus(self):
        assert len(CORPUS) == 20
        assert all(s.n_sites <= 8 and s.energy_per_atom is not None for s in CORPUS)

    def test_round_trip(self):
        again = parse_xyz(format_xyz(CORPUS))
        for a, b in zip(CORPUS, again):
            np.testing.assert_allclose(a.lattice, b.lattice, rtol=1e-15)
            np.testing.assert_allclose(a.frac_coords, b.frac_coords, atol=1e-14)
            assert a.species == b.species and a.energy_per_atom == b.energy_per_atom

    def test_case_insensitive_keys_and_optional_energy(self):
        text = '1\nLattice="2 0 0 0 2 0 0 0 2" Config_type=x\nLi 1 1 1\n'
        (s,) = parse_xyz(text)
        assert s.energy_per_atom is None
        np.testing.assert_allclose(s.frac_coords, [[0.5, 0.5, 0.5]])

    def test_empty(self):
        assert parse_xyz("\n\n") == []

    @pytest.mark.parametrize("text, line, fragment", [
        ('x\nlattice="1 0 0 0 1 0 0 0 1"\nLi 0 0 0\n', 1, "atom count"),
        ('1\nenergy=1\nLi 0 0 0\n', 2, "lattice"),
        ('1\nlattice="1 0 0 0 1 0 0 0"\nLi 0 0 0\n', 2, "9 numbers"),
        ('1\nlattice="1 0 0 0 one 0 0 0 1"\nLi 0 0 0\n', 2, "malformed lattice"),
        ('1\nlattice="1 0 0 0 1 0 0 0 1"\nLi 0 zero 0\n', 3, "malformed coordinates"),
        ('2\nlattice="1 0 0 0 1 0 0 0 1"\nLi 0 0 0\n', 4, "file ended"),
        ('1\nlattice="1 0 0 2 0 0 0 0 1"\nLi 0 0 0\n', 2, "degenerate"),
        ('1\nlattice="1 0 0 0 1 0 0 0 1" energy=abc\nLi 0 0 0\n', 2, "energy"),
    ])
    def test_parse_errors_name_line(self, text, line, fragment):
        with pytest.raises(StructureParseError, match=fragment) as info:
            parse_xyz(text, source="f.xyz")
        assert info.value.line == line
        assert f"f.xyz:{line}" in str(info.value)


class TestFormationEnergy:
    def test_endpoints(self):
        assert formation_energy(-1.9, 1.0, 0.0, -1.9, -4.5) == 0.0
        assert formation_energy(-4.5, 0.0, 1.0, -1.9, -4.5) == 0.0

    def test_hand_value(self):
        assert formation_energy(-3.0, 0.5, 0.5, -2.0, -4.0) == 0.0

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            formation_energy(-3.0, 0.5, 0.4, -2.0, -4.0)
        with pytest.raises(ValueError):
            formation_energy(-3.0, 1.1, -0.1, -2.0, -4.0)

    def test_corpus_pure_endpoints_exact(self):
        refs = reference_energies(CORPUS, ["Li", "Ge"])
        pure = [s for s in CORPUS if len(set(s.species)) == 1]
        assert {s.species[0] for s in pure} == {"Li", "Ge"}
        for s in pure:
            el = s.species[0]
            own = dict(refs, **{el: s.energy_per_atom})
            assert structure_formation_energy(s, own) == 0.0
        ground = [s for s in pure if s.energy_per_atom == refs[s.species[0]]]
        assert len(ground) == 2
        for s in ground:
            assert structure_formation_energy(s, refs) == 0.0

    def test_missing_energy(self):
        with pytest.raises(ValueError, match="structure 1"):
            featurize([CORPUS[0], cubic(3.0, ["Li"], [[0, 0, 0]])], references={"Li": -1.0, "Ge": -4.0})


class TestNeighbors:
    def test_isolated_atom(self):
        assert enumerate_neighbors(cubic(10.0, ["A"], [[0, 0, 0]]), "A", "A", 3.0).size == 0

    def test_six_face_images(self):
        d = enumerate_neighbors(cubic(2.0, ["A"], [[0, 0, 0]]), "A", "A", 2.5)
        np.testing.assert_array_equal(np.sort(d), np.full(6, 2.0))

    def test_direct_pair(self):
        s = cubic(4.0, ["A", "B"], [[0, 0, 0], [0.5, 0, 0]])
        # B at +x and its image at -x are both 2 A away
        np.testing.assert_array_equal(enumerate_neighbors(s, "A", "B", 2.1), [2.0, 2.0])
        lone = CrystalStructure(np.diag([4.0, 30.0, 30.0]), ["A", "B"], [[0, 0, 0], [0.25, 0, 0]])
        np.testing.assert_array_equal(enumerate_neighbors(lone, "A", "B", 2.1), [1.0])

    def test_cutoff_inclusive(self):
        d = enumerate_neighbors(cubic(2.0, ["A"], [[0, 0, 0]]), "A", "A", 2.0)
        assert d.size == 6

    def test_matches_brute_force_on_corpus(self):
        for s in CORPUS:
            for a, b in (("Li", "Li"), ("Li", "Ge"), ("Ge", "Li"), ("Ge", "Ge")):
                got = sorted(enumerate_neighbors(s, a, b, 8.0).tolist())
                assert got == brute_force_neighbors(s.lattice, s.species, s.frac_coords, a, b, 8.0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1.0, 9.0))
    def test_matches_brute_force_random(self, seed, cutoff):
        s = random_structure(seed)
        got = sorted(enumerate_neighbors(s, "Li", "Ge", cutoff).tolist())
        assert got == brute_force_neighbors(s.lattice, s.species, s.frac_coords, "Li", "Ge", cutoff)


class TestPartialRdf:
    def config(self, power):
        # grid step 0.2 puts 1.8, 2.0 and 2.2 on the grid
        return RdfConfig(cutoff=2.5, sigma=0.2, power=power, grid_points=50, grid_max=10.0, pairs=(("A", "B"),))

    def test_grid(self):
        grid = self.config(0).grid
        assert grid[0] == pytest.approx(0.2) and grid[-1] == 10.0 and len(grid) == 50

    def test_single_neighbor_analytic(self):
        g0 = rdf_values([2.0], 1, [1.8, 2.0, 2.2], 0.2, 0.0, 2.5)
        assert abs(g0[1] - 1.0) <= 1e-10
        np.testing.assert_allclose(g0[[0, 2]], math.exp(-0.5), rtol=0, atol=1e-10)
        g1 = rdf_values([2.0], 1, [1.8, 2.0, 2.2], 0.2, 1.0, 2.5)
        assert abs(g1[1] - 0.5) <= 1e-10
        assert g1[0] / g1[2] == pytest.approx(2.2 / 1.8, rel=1e-10)

    @pytest.mark.parametrize("power, peak", [(0.0, 1.0), (1.0, 0.5)])
    def test_structure_single_neighbor(self, power, peak):
        # one B neighbor at 2.0 A, every other image beyond the cutoff
        s = CrystalStructure(np.diag([2.0 / 0.3, 30.0, 30.0]), ["A", "B"], [[0, 0, 0], [0.3, 0, 0]])
        cfg = self.config(power)
        np.testing.assert_allclose(enumerate_neighbors(s, "A", "B", cfg.cutoff), [2.0], rtol=1e-15)
        g = partial_rdf(s, ("A", "B"), cfg)
        i = int(np.argmin(np.abs(cfg.grid - 2.0)))
        assert abs(g[i] - peak) <= 1e-10
        assert g[i - 1] / g[i + 1] == pytest.approx((2.2 / 1.8) ** power, rel=1e-10)

    def test_matches_termwise_oracle(self):
        cfg = RdfConfig()
        for s in CORPUS[:6]:
            for a, b in cfg.pairs:
                n_a = s.species.count(a)
                g = partial_rdf(s, (a, b), cfg)
                if n_a == 0:
                    np.testing.assert_array_equal(g, 0.0)
                    continue
                d = brute_force_neighbors(s.lattice, s.species, s.frac_coords, a, b, cfg.cutoff)
                for m in (0, 10, 20, 40, 63):
                    expected = gaussian_rdf_point(cfg.grid[m], d, n_a, cfg.sigma, cfg.power)
                    assert g[m] == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_no_neighbors_zero(self):
        s = cubic(20.0, ["A", "B"], [[0, 0, 0], [0.5, 0.5, 0.5]])
        np.testing.assert_array_equal(partial_rdf(s, ("A", "B"), RdfConfig(cutoff=5.0, pairs=(("A", "B"),))), 0.0)

    def test_absent_center_zero_block(self):
        s = cubic(3.0, ["Li"], [[0, 0, 0]])
        np.testing.assert_array_equal(partial_rdf(s, ("Ge", "Li"), RdfConfig()), np.zeros(64))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
    def test_translation_invariance(self, seed, shift):
        s = random_structure(seed, 5)
        cfg = RdfConfig(cutoff=6.0)
        a = featurize([s], cfg, with_targets=False).features
        b = featurize([s.translated(shift)], cfg, with_targets=False).features
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, seed, rnd):
        s = random_structure(seed, 5)
        order = list(range(5))
        rnd.shuffle(order)
        cfg = RdfConfig(cutoff=6.0)
        np.testing.assert_allclose(featurize([s], cfg, with_targets=False).features,
                                   featurize([s.permuted(order)], cfg, with_targets=False).features,
                                   rtol=1e-8, atol=1e-12)

    @pytest.mark.parametrize("index", [0, 5, 9, 14, 19])
    def test_supercell_consistency(self, index):
        s = CORPUS[index]
        cfg = RdfConfig()
        for reps in ((2, 1, 1), (1, 2, 2)):
            np.testing.assert_allclose(featurize([s.supercell(reps)], cfg, with_targets=False).features,
                                       featurize([s], cfg, with_targets=False).features, rtol=1e-8, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1.0, 5.0), st.floats(0.0, 4.0))
    def test_cutoff_monotone(self, seed, cutoff, extra):
        s = random_structure(seed)
        small = partial_rdf(s, ("Li", "Ge"), RdfConfig(cutoff=cutoff))
        large = partial_rdf(s, ("Li", "Ge"), RdfConfig(cutoff=cutoff + extra))
        # exact in real arithmetic; extra terms can reorder float rounding
        assert np.all(large >= small * (1 - 1e-12))


class TestFeaturize:
    def test_empty(self):
        ds = featurize([], RdfConfig())
        assert ds.features.shape == (0, 192)

    def test_row_length(self):
        cfg = RdfConfig(pairs=(("Li", "Li"), ("Li", "Ge")))
        assert featurize([CORPUS[6]], cfg, with_targets=False).features.shape == (1, 128)

    def test_corpus(self):
        ds = featurize(CORPUS)
        assert ds.features.shape == (20, 192)
        assert np.all(np.isfinite(ds.features)) and np.all(ds.features >= 0)
        assert ds.metadata["target_units"] == "eV/atom"
        assert ds.columns[0] == "Li-Li_00" and ds.columns[-1] == "Ge-Ge_63"

    def test_config_validation(self):
        for kwargs in ({"sigma": 0}, {"grid_points": 1}, {"cutoff": 12.0}, {"power": -1}, {"pairs": ()}):
            with pytest.raises(ValueError):
                RdfConfig(**kwargs)

    def test_csv_round_trip(self, tmp_path):
        ds = featurize(CORPUS[:4])
        write_feature_csv(tmp_path / "f.csv", ds)
        back = read_feature_csv(tmp_path / "f.csv")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.targets, ds.targets)
        assert back.columns == ds.columns

    def test_executor_matches_serial(self):
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(3) as pool:
            par = featurize(CORPUS, executor=pool)
        np.testing.assert_array_equal(par.features, featurize(CORPUS).features)

    def test_dataset_shape_check(self):
        with pytest.raises(ValueError):
            FeatureDataset(np.zeros((2, 2)), ["a", "b"], np.zeros(3))
