"""Model specs, JSON round-trips, and finite path-space construction."""

import json
import math

import numpy as np
import pytest

from doobkit import (
    ModelError,
    ModelSpec,
    ResourceError,
    TimeGrid,
    build_finite_model,
    doob_decompose,
    dump_model,
    dyadic_grid,
    increment_mean_profile,
    load_model,
    model_from_dict,
    target_compensator,
)
from doobkit.models import default_grid, poisson_step_support


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ModelError, match="kind"):
            ModelSpec("brownian")

    def test_unknown_parameter(self):
        with pytest.raises(ModelError, match="unknown parameter"):
            ModelSpec("binary-tree", {"steps": 3, "colour": "red"})

    def test_tree_steps_range(self):
        for bad in (0, 13, -1):
            with pytest.raises(ModelError):
                ModelSpec("binary-tree", {"steps": bad})
        with pytest.raises(ModelError, match="missing"):
            ModelSpec("binary-tree", {})
        with pytest.raises(ModelError, match="integer"):
            ModelSpec("binary-tree", {"steps": 3.0})
        with pytest.raises(ModelError, match="integer"):
            ModelSpec("binary-tree", {"steps": True})

    def test_tree_process_and_std(self):
        with pytest.raises(ModelError, match="process"):
            ModelSpec("binary-tree", {"steps": 3, "process": "brownian"})
        with pytest.raises(ModelError):
            ModelSpec("binary-tree", {"steps": 3, "step_std": 0.0})
        ModelSpec("binary-tree", {"steps": 3, "step_std": 0.5})

    def test_lattice_depth_range(self):
        with pytest.raises(ModelError):
            ModelSpec("recombining-lattice", {"depth": 21})
        with pytest.raises(ModelError):
            ModelSpec("poisson-lattice", {"rate": 1.0, "depth": -1})
        assert default_grid(ModelSpec("recombining-lattice")).n_steps == 8
        assert default_grid(ModelSpec("poisson-lattice", {"rate": 1.0})).n_steps == 4

    def test_poisson_rate(self):
        for bad in ({"rate": 0.0}, {"rate": -2.0}, {}):
            with pytest.raises(ModelError):
                ModelSpec("poisson-lattice", bad)
        with pytest.raises(ModelError):
            ModelSpec("mc-poisson", {"rate": "fast"})

    def test_explicit_requires_all_fields(self):
        with pytest.raises(ModelError, match="values"):
            ModelSpec("explicit", {"probs": [1.0], "times": [0.0, 1.0], "partitions": [[0], [0]]})

    def test_known_compensator(self):
        ok = {"steps": 3}
        ModelSpec("binary-tree", ok, {"form": "identity-time"})
        ModelSpec("binary-tree", ok, {"form": "linear", "rate": 2.0})
        with pytest.raises(ModelError, match="form"):
            ModelSpec("binary-tree", ok, {"rate": 2.0})
        with pytest.raises(ModelError, match="form"):
            ModelSpec("binary-tree", ok, {"form": "quadratic"})
        with pytest.raises(ModelError):
            ModelSpec("binary-tree", ok, {"form": "linear"})  # rate missing
        with pytest.raises(ModelError, match="rate"):
            ModelSpec("binary-tree", ok, {"form": "identity-time", "rate": 1.0})
        with pytest.raises(ModelError, match="unknown"):
            ModelSpec("binary-tree", ok, {"form": "identity-time", "shift": 1.0})

    def test_kind_flags(self):
        assert ModelSpec("mc-poisson", {"rate": 1.0}).is_mc
        assert not ModelSpec("binary-tree", {"steps": 2}).is_mc
        assert ModelSpec("poisson-lattice", {"rate": 1.0}).is_grid_parameterized
        assert not ModelSpec("explicit", _EXPLICIT).is_grid_parameterized


_EXPLICIT = {
    "probs": [0.25, 0.25, 0.5],
    "times": [0.0, 0.5, 1.0],
    "partitions": [[0, 0, 0], [0, 0, 1], [0, 1, 2]],
    "values": [[0.0, 0.0, 0.0], [1.0, 1.0, 3.0], [0.0, 4.0, 3.0]],
}


class TestSerialization:
    def test_round_trip(self, tmp_path):
        spec = ModelSpec("poisson-lattice", {"rate": 2.5, "depth": 3}, {"form": "linear", "rate": 2.5})
        path = tmp_path / "model.json"
        path.write_text(dump_model(spec))
        back = load_model(path)
        assert back.to_dict() == spec.to_dict()

    def test_dump_is_deterministic(self):
        spec = ModelSpec("binary-tree", {"steps": 4, "process": "walk"})
        text = dump_model(spec)
        assert text == dump_model(spec)
        assert text.endswith("\n")
        assert json.loads(text)["kind"] == "binary-tree"

    def test_from_dict_rejects_junk(self):
        with pytest.raises(ModelError, match="top-level"):
            model_from_dict({"kind": "binary-tree", "parameters": {"steps": 2}, "extra": 1})
        with pytest.raises(ModelError, match="kind"):
            model_from_dict({"parameters": {}})
        with pytest.raises(ModelError):
            model_from_dict([1, 2, 3])

    def test_null_parameters_allowed(self):
        spec = model_from_dict({"kind": "recombining-lattice", "parameters": None})
        assert spec.parameters == {}

    def test_load_errors(self, tmp_path):
        with pytest.raises(ModelError, match="cannot read"):
            load_model(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text('{"kind": "binary-tree",,}')
        with pytest.raises(ModelError, match=r"line 1"):
            load_model(bad)


class TestGrids:
    def test_dyadic_times_are_exact(self):
        g = dyadic_grid(3)
        assert g.n_steps == 8
        assert np.array_equal(g.times, np.arange(9) / 8.0)
        assert dyadic_grid(0).times.tolist() == [0.0, 1.0]

    def test_depth_range(self):
        for bad in (-1, 21):
            with pytest.raises(ModelError):
                dyadic_grid(bad)

    def test_default_grid_for_mc_requires_explicit_choice(self):
        with pytest.raises(ModelError):
            default_grid(ModelSpec("mc-poisson", {"rate": 1.0}))


class TestPoissonSupport:
    def test_normalized_and_near_exact_mean(self):
        for rate, dt in ((3.0, 0.25), (0.5, 1.0), (10.0, 0.125)):
            values, probs = poisson_step_support(rate, dt)
            assert abs(probs.sum() - 1.0) <= 1e-14
            assert probs.min() > 0.0
            assert abs(values @ probs - rate * dt) <= 1e-12
            # truncated tail really is negligible
            full_tail = 1.0 - np.exp(-rate * dt) * np.sum(
                (rate * dt) ** values / np.array([math.factorial(int(v)) for v in values])
            )
            assert abs(full_tail) <= 1e-13


class TestBinaryTree:
    def test_structure(self):
        f, x = build_finite_model(ModelSpec("binary-tree", {"steps": 3, "process": "walk"}))
        assert f.space.atom_count == 8
        assert [p.block_count for p in f.partitions] == [1, 2, 4, 8]
        assert np.array_equal(np.unique(x.values[1]), [-1.0, 1.0])
        inc = np.diff(x.values, axis=0)
        assert set(np.unique(inc).tolist()) == {-1.0, 1.0}
        assert np.max(np.abs(x.values[0])) == 0.0

    def test_step_std_scales_increments(self):
        f, x = build_finite_model(
            ModelSpec("binary-tree", {"steps": 2, "process": "walk", "step_std": 0.5})
        )
        assert set(np.unique(np.diff(x.values, axis=0)).tolist()) == {-0.5, 0.5}

    def test_grid_step_count_enforced(self):
        spec = ModelSpec("binary-tree", {"steps": 3})
        with pytest.raises(ModelError, match="3-step"):
            build_finite_model(spec, TimeGrid.uniform(4))

    def test_processes_derive_from_one_walk(self):
        f, w = build_finite_model(ModelSpec("binary-tree", {"steps": 4, "process": "walk"}))
        _, sq = build_finite_model(ModelSpec("binary-tree", {"steps": 4, "process": "walk-squared"}))
        _, ab = build_finite_model(ModelSpec("binary-tree", {"steps": 4, "process": "walk-abs"}))
        assert np.array_equal(sq.values, w.values**2)
        assert np.array_equal(ab.values, np.abs(w.values))

    def test_drift_process_is_time(self):
        f, x = build_finite_model(ModelSpec("binary-tree", {"steps": 4, "process": "drift"}))
        assert np.array_equal(x.values, np.repeat(f.grid.times[:, None], 16, axis=1))


class TestRecombiningLattice:
    def test_scaled_square_compensator_is_time(self):
        # the whole reason for the sqrt(dt) scaling: E(S_t^2) growth matches
        # the grid exactly, so the path-space compensator is t on every atom
        spec = ModelSpec("recombining-lattice", {"depth": 3})
        f, x = build_finite_model(spec)
        a = doob_decompose(x).a
        want = np.repeat(f.grid.times[:, None], f.space.atom_count, axis=1)
        assert np.max(np.abs(a.values - want)) <= 1e-12

    def test_drift_variant_is_single_atom(self):
        f, x = build_finite_model(ModelSpec("recombining-lattice", {"process": "drift", "depth": 4}))
        assert f.space.atom_count == 1
        assert np.array_equal(x.values[:, 0], f.grid.times)

    def test_path_enumeration_budget(self):
        with pytest.raises(ResourceError, match="at most 12 steps"):
            build_finite_model(ModelSpec("recombining-lattice", {"depth": 4}))


class TestPoissonLattice:
    def test_structure_and_compensator(self):
        spec = ModelSpec("poisson-lattice", {"rate": 3.0, "depth": 2})
        grid = default_grid(spec)
        f, x = build_finite_model(spec)
        assert abs(f.space.probs.sum() - 1.0) <= 1e-12
        inc = np.diff(x.values, axis=0)
        assert np.all(inc >= 0.0) and np.array_equal(inc, np.round(inc))
        # independent increments make the compensator deterministic; it must
        # match the closed-form per-step means
        profile = np.concatenate([[0.0], np.cumsum(increment_mean_profile(spec, grid))])
        a = doob_decompose(x).a
        assert np.max(np.abs(a.values - profile[:, None])) <= 1e-12

    def test_atom_budget(self):
        with pytest.raises(ResourceError, match="mc-poisson"):
            build_finite_model(ModelSpec("poisson-lattice", {"rate": 3.0, "depth": 3}))


class TestExplicit:
    def test_build(self):
        f, x = build_finite_model(ModelSpec("explicit", _EXPLICIT))
        assert f.space.atom_count == 3
        assert x.values[1].tolist() == [1.0, 1.0, 3.0]

    def test_rejects_external_grid(self):
        with pytest.raises(ModelError, match="their own"):
            build_finite_model(ModelSpec("explicit", _EXPLICIT), TimeGrid.uniform(2))

    def test_partition_count_checked(self):
        bad = dict(_EXPLICIT, partitions=[[0, 0, 0], [0, 1, 2]])
        with pytest.raises(ModelError, match="partition"):
            build_finite_model(ModelSpec("explicit", bad))


class TestMCKinds:
    def test_no_finite_path_space(self):
        with pytest.raises(ModelError, match="simulate"):
            build_finite_model(ModelSpec("mc-poisson", {"rate": 2.0}))
        with pytest.raises(ModelError, match="simulate"):
            build_finite_model(ModelSpec("mc-gaussian-walk-squared"))


class TestIncrementMeans:
    def test_tree_profiles(self):
        g = TimeGrid.uniform(4)
        sq = ModelSpec("binary-tree", {"steps": 4, "step_std": 1.5})
        assert np.allclose(increment_mean_profile(sq, g), 2.25, atol=1e-15)
        walk = ModelSpec("binary-tree", {"steps": 4, "process": "walk"})
        assert np.max(np.abs(increment_mean_profile(walk, g))) == 0.0
        drift = ModelSpec("binary-tree", {"steps": 4, "process": "drift"})
        assert np.allclose(increment_mean_profile(drift, g), 0.25, atol=1e-15)

    def test_walk_abs_has_no_closed_form(self):
        spec = ModelSpec("binary-tree", {"steps": 4, "process": "walk-abs"})
        with pytest.raises(ModelError, match="state-dependent"):
            increment_mean_profile(spec, TimeGrid.uniform(4))

    def test_explicit_has_no_closed_form(self):
        with pytest.raises(ModelError):
            increment_mean_profile(ModelSpec("explicit", _EXPLICIT), TimeGrid.uniform(2))

    def test_poisson_profile_matches_support_means(self):
        spec = ModelSpec("poisson-lattice", {"rate": 2.0, "depth": 2})
        g = default_grid(spec)
        prof = increment_mean_profile(spec, g)
        for dt, got in zip(g.steps(), prof):
            values, probs = poisson_step_support(2.0, dt)
            assert got == pytest.approx(values @ probs, abs=1e-15)


class TestTargetCompensator:
    def test_forms(self):
        t = np.linspace(0.0, 1.0, 5)
        none = ModelSpec("binary-tree", {"steps": 4})
        assert target_compensator(none, t) is None
        ident = ModelSpec("binary-tree", {"steps": 4}, {"form": "identity-time"})
        assert np.array_equal(target_compensator(ident, t), t)
        lin = ModelSpec("binary-tree", {"steps": 4}, {"form": "linear", "rate": 3.0})
        assert np.array_equal(target_compensator(lin, t), 3.0 * t)
