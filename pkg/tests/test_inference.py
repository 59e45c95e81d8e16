"""Fit pipeline: atom initialization, QP wiring, latent postprocessing."""

import numpy as np
import pytest

from dpme.errors import DegenerateDataError, ParameterError
from dpme.gaussian import GaussianComponent
from dpme.inference import (
    DEFAULT_WEIGHT_FLOOR,
    FitConfig,
    assign_latents,
    effective_components,
    fit,
    init_atoms,
)
from dpme.rkhs_embedding import Dataset, TruncatedDPMM
from dpme.rng import derive_rng, make_rng


def two_cluster_data(seed=0, m=400):
    rng = derive_rng(seed, "testdata")
    z = rng.random(m) < 0.7
    x = np.where(z, rng.normal(-3.0, 1.0, m), rng.normal(3.0, 1.0, m))
    return Dataset(x.reshape(-1, 1))


def test_fit_config_defaults_resolve():
    cfg = FitConfig()
    assert cfg.alpha == 1.0
    assert cfg.trunc == "auto"
    assert cfg.resolve_trunc() >= 1
    d = cfg.as_dict()
    assert d["trunc"] == "auto" and d["bandwidth2"] == "median"


def test_fit_config_validation():
    with pytest.raises(ParameterError):
        FitConfig(alpha=0.0)
    with pytest.raises(ParameterError):
        FitConfig(trunc=0)
    with pytest.raises(ParameterError):
        FitConfig(trunc="sometimes")
    with pytest.raises(ParameterError):
        FitConfig(delta=1.5)
    with pytest.raises(ParameterError):
        FitConfig(atom_strategy="random")
    with pytest.raises(ParameterError):
        FitConfig(epsilon=-1e-9)
    with pytest.raises(ParameterError):
        FitConfig(bandwidth2=0.0)
    with pytest.raises(ParameterError):
        FitConfig(comp_cov_scale=0.0)


def test_resolve_trunc_frozen():
    assert FitConfig(alpha=1.0, delta=1e-4).resolve_trunc() == 10


def test_init_atoms_strategies():
    data = two_cluster_data()
    for strategy in ("sample_g0", "kmeans", "subsample"):
        cfg = FitConfig(trunc=4, atom_strategy=strategy, seed=1)
        atoms = init_atoms(data, cfg)
        assert len(atoms) == 4
        assert all(a.dim == 1 for a in atoms)
        again = init_atoms(data, cfg)
        np.testing.assert_array_equal(atoms[2].mean, again[2].mean)


def test_init_atoms_covariances_scale_with_data():
    data = two_cluster_data()
    var = float(np.var(data.points[:, 0]))
    cfg = FitConfig(trunc=3, atom_strategy="kmeans", comp_cov_scale=0.4, seed=0)
    atoms = init_atoms(data, cfg)
    for a in atoms:
        assert a.cov_diag[0] == pytest.approx(0.4 * var, rel=1e-12)


def test_init_atoms_subsample_rows_are_data_points():
    data = two_cluster_data()
    cfg = FitConfig(trunc=5, atom_strategy="subsample", seed=3)
    atoms = init_atoms(data, cfg)
    rows = {float(p) for p in data.points[:, 0]}
    means = [float(a.mean[0]) for a in atoms]
    assert all(m in rows for m in means)
    assert len(set(means)) == 5  # without replacement


def test_init_atoms_kmeans_needs_enough_rows():
    data = Dataset(np.array([[0.0], [1.0]]))
    with pytest.raises(ParameterError):
        init_atoms(data, FitConfig(trunc=5, atom_strategy="kmeans"))


def test_fit_recovers_two_cluster_weights():
    data = two_cluster_data(seed=2, m=1500)
    atoms = [GaussianComponent([-3.0], [1.0]), GaussianComponent([3.0], [1.0])]
    cfg = FitConfig(alpha=1.0, trunc=2, bandwidth2=1.0, epsilon=1e-8, seed=0)
    res = fit(data, cfg, atoms=atoms)
    assert abs(res.model.weights[0] - 0.7) <= 0.06
    assert res.qp.converged
    assert res.mmd2 >= 0.0
    assert res.truncation_bound == pytest.approx(np.exp(-2.0))


def test_fit_trunc_one_gives_unit_weight():
    data = two_cluster_data(m=60)
    res = fit(data, FitConfig(trunc=1, atom_strategy="kmeans", seed=0))
    np.testing.assert_allclose(res.model.weights, [1.0])


def test_fit_deterministic():
    data = two_cluster_data(m=200)
    cfg = FitConfig(trunc=4, seed=5)
    a = fit(data, cfg)
    b = fit(data, cfg)
    np.testing.assert_array_equal(a.model.weights, b.model.weights)
    assert a.mmd2 == b.mmd2
    assert a.bandwidth2 == b.bandwidth2


def test_fit_explicit_atoms_set_truncation():
    data = two_cluster_data(m=100)
    atoms = [GaussianComponent([0.0], [1.0])] * 3
    res = fit(data, FitConfig(seed=0), atoms=atoms)
    assert res.model.trunc == 3


def test_fit_explicit_atoms_conflict_with_trunc():
    data = two_cluster_data(m=100)
    atoms = [GaussianComponent([0.0], [1.0])] * 3
    with pytest.raises(ParameterError):
        fit(data, FitConfig(trunc=2), atoms=atoms)


def test_fit_auto_epsilon_scales_with_gram():
    data = two_cluster_data(m=300)
    res = fit(data, FitConfig(trunc=5, seed=0))
    expected = 1e-6 * float(np.trace(res.gram.S)) / 5
    assert res.epsilon == pytest.approx(expected, rel=1e-12)


def test_fit_rejects_constant_column():
    pts = np.column_stack([np.linspace(0, 1, 50), np.full(50, 2.0)])
    with pytest.raises(DegenerateDataError) as err:
        fit(Dataset(pts), FitConfig(trunc=3, bandwidth2=1.0, seed=0))
    assert "column 2" in str(err.value)


def test_assign_latents_basic():
    comps = (
        GaussianComponent([-3.0], [1.0]),
        GaussianComponent([3.0], [1.0]),
    )
    model = TruncatedDPMM(1.0, 2, np.array([0.7, 0.3]), comps)
    X = Dataset(np.array([[-3.2], [-2.5], [3.1], [0.1]]))
    assignments, resp, flagged = assign_latents(model, X)
    assert assignments.tolist()[:3] == [0, 0, 1]
    np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-12)
    assert not flagged.any()
    # near the midpoint the prior weight tips the balance toward the
    # heavier component
    assert resp[3, 0] > 0.5


def test_assign_latents_zero_weight_component_excluded():
    comps = (
        GaussianComponent([0.0], [1.0]),
        GaussianComponent([0.1], [1.0]),
    )
    model = TruncatedDPMM(1.0, 2, np.array([1.0, 0.0]), comps)
    X = Dataset(np.array([[0.09], [0.11]]))
    assignments, resp, _ = assign_latents(model, X)
    assert np.all(assignments == 0)
    np.testing.assert_allclose(resp[:, 1], 0.0, atol=1e-300)


def test_assign_latents_log_space_survives_underflow():
    # 1e5 sigma out: densities underflow but log densities stay finite,
    # so the row is assigned normally and not flagged
    comps = (GaussianComponent([0.0], [1.0]), GaussianComponent([4.0], [1.0]))
    model = TruncatedDPMM(1.0, 2, np.array([0.5, 0.5]), comps)
    X = Dataset(np.array([[1e5], [0.2]]))
    assignments, resp, flagged = assign_latents(model, X)
    assert not flagged.any()
    assert assignments[0] == 1
    np.testing.assert_allclose(resp[0], [0.0, 1.0], atol=1e-300)


def test_assign_latents_flags_saturated_rows():
    # beyond ~1e154 the squared distance itself overflows; every log
    # density is -inf, the row is flagged, and it must not land on the
    # zero-weight atom even though all fallback distances saturate
    comps = (GaussianComponent([0.0], [1.0]), GaussianComponent([4.0], [1.0]))
    model = TruncatedDPMM(1.0, 2, np.array([0.0, 1.0]), comps)
    X = Dataset(np.array([[1e160], [0.2]]))
    assignments, resp, flagged = assign_latents(model, X)
    assert flagged.tolist() == [True, False]
    assert assignments[0] == 1
    np.testing.assert_allclose(resp[0], [0.0, 1.0])


def test_effective_components():
    comps = tuple(GaussianComponent([float(i)], [1.0]) for i in range(4))
    model = TruncatedDPMM(1.0, 4, np.array([0.6, 0.39, 0.009, 0.001]), comps)
    assert effective_components(model, 0.02) == 2
    assert effective_components(model, 0.0005) == 4
    assert effective_components(model) == 3  # default floor 1e-3, strict
    with pytest.raises(ParameterError):
        effective_components(model, -0.1)
    with pytest.raises(ParameterError):
        effective_components(model, 1.0)


def test_default_weight_floor_value():
    assert DEFAULT_WEIGHT_FLOOR == 1e-3


def test_fit_result_assignments_cover_all_rows():
    data = two_cluster_data(m=120)
    res = fit(data, FitConfig(trunc=3, seed=1))
    assert res.assignments.shape == (120,)
    assert res.responsibilities.shape == (120, 3)
    assert res.flagged_rows.shape == (120,)
    assert res.effective_T >= 1
