import itertools

import numpy as np
import pytest

from streampca.linalg import SpectralTruth, lyapunov_stationary
from streampca.solver import (
    Frame,
    RunConfig,
    eta_at,
    gha_step,
    init_at_stationary_point,
    init_random,
    oja_step,
    paper_annealing_table,
    run,
    stage_of,
)
from streampca.timeseries import StreamHandle, VarModel, rotated_var_model

D0_MAIN = [0.68, 0.68, 0.69, 0.70, 0.70, 0.70, 0.72, 0.72,
           0.72, 0.72, 0.72, 0.72, 0.80, 0.80, 0.85, 0.90]
NOISE_MAIN = [1.0] * 13 + [3.0] * 3


def main_model(v_seed=7):
    model, _ = rotated_var_model(D0_MAIN, 0.1, NOISE_MAIN, v_seed=v_seed)
    return model


def main_truth(model):
    return SpectralTruth.from_sigma(lyapunov_stationary(model.a, model.noise_cov))


class TestEtaSchedule:
    def test_constant(self):
        cfg = RunConfig(eta=3e-5, h=4, r=3, max_samples=10)
        for k in (0, 10**3, 10**6):
            assert eta_at(cfg, k) == 3e-5

    def test_paper_table_values(self):
        cfg = RunConfig(
            eta=0.5, h=4, r=3, max_samples=10,
            schedule="table-annealing", annealing_table=paper_annealing_table(4),
        )
        assert eta_at(cfg, 10**3) == pytest.approx(0.5 * 4 / 4000, rel=1e-12)
        assert eta_at(cfg, 3 * 10**4) == pytest.approx(0.5 * 4 / 8000, rel=1e-12)
        assert eta_at(cfg, 7 * 10**4) == pytest.approx(0.5 * 4 / 48000, rel=1e-12)
        assert eta_at(cfg, 2 * 10**5) == pytest.approx(0.5 * 4 / 120000, rel=1e-12)

    def test_validation_messages_name_fields(self):
        with pytest.raises(ValueError, match="field eta"):
            RunConfig(eta=0.0, h=1, r=1, max_samples=1)
        with pytest.raises(ValueError, match="field h"):
            RunConfig(eta=1e-3, h=0, r=1, max_samples=1)
        with pytest.raises(ValueError, match="strictly increasing"):
            RunConfig(
                eta=1e-3, h=1, r=1, max_samples=1,
                schedule="table-annealing", annealing_table=((0, 1.0), (0, 0.5)),
            )


class TestInit:
    def test_random_orthonormal(self):
        for m, r in [(5, 2), (6, 6), (16, 3)]:
            f = init_random(m, r, seed=3)
            assert np.linalg.norm(f.u.T @ f.u - np.eye(r)) <= 1e-10

    def test_random_deterministic(self):
        np.testing.assert_array_equal(init_random(5, 2, 9).u, init_random(5, 2, 9).u)

    def test_optimum_init_has_zero_tail(self):
        truth = main_truth(main_model())
        f = init_at_stationary_point(truth, [1, 2, 3])
        u_bar = truth.eigvecs.T @ f.u
        tail = np.sum(u_bar[3:] ** 2)
        assert tail <= 1e-20

    def test_saddle_init_gamma_pattern(self):
        truth = main_truth(main_model())
        f = init_at_stationary_point(truth, [1, 2, 4])
        u_bar = truth.eigvecs.T @ f.u
        gamma_sq = np.einsum("ij,ij->i", u_bar, u_bar)
        assert gamma_sq[2] <= 1e-20          # third direction empty
        assert gamma_sq[3] == pytest.approx(1.0, abs=1e-12)  # fourth carries a column

    def test_jitter_small_angle(self):
        truth = main_truth(main_model())
        f0 = init_at_stationary_point(truth, [1, 2, 4], jitter=0.0)
        f1 = init_at_stationary_point(truth, [1, 2, 4], jitter=1e-3, seed=5)
        sin_max = np.linalg.norm(f1.u - f0.u @ (f0.u.T @ f1.u), 2)
        assert np.arcsin(min(sin_max, 1.0)) <= 1e-2

    def test_duplicate_indices_rejected(self):
        truth = main_truth(main_model())
        with pytest.raises(ValueError, match="duplicate"):
            init_at_stationary_point(truth, [1, 1, 2])


class TestSteps:
    def test_oja_zero_input_fixed(self):
        f = init_random(4, 2, 1)
        out = oja_step(f, np.zeros((4, 4)), 0.1)
        np.testing.assert_allclose(out.u, f.u, atol=1e-12)
        assert out.s == f.s + 1

    def test_oja_saddle_fixed_point(self):
        f = Frame(u=np.array([[1.0], [0.0]]))
        out = oja_step(f, np.diag([0.0, 1.0]), 0.1)
        np.testing.assert_allclose(out.u, f.u, atol=1e-14)

    def test_oja_hand_computation(self):
        c = np.cos(np.pi / 4)
        f = Frame(u=np.array([[c], [c]]))
        out = oja_step(f, np.diag([2.0, 1.0]), 0.1)
        v = np.array([1.2 * c, 1.1 * c])
        v /= np.linalg.norm(v)
        np.testing.assert_allclose(out.u[:, 0], v, atol=1e-14)

    def test_gha_zero_input_fixed(self):
        f = init_random(4, 2, 2)
        out = gha_step(f, np.zeros((4, 4)), 0.1)
        np.testing.assert_allclose(out.u, f.u, atol=1e-15)

    def test_gha_stationary_gradient_zero(self):
        f = Frame(u=np.array([[1.0], [0.0]]))
        out = gha_step(f, np.diag([0.0, 1.0]), 0.1)
        np.testing.assert_allclose(out.u, f.u, atol=1e-15)

    def test_gha_orthonormality_drift_second_order(self):
        rng = np.random.default_rng(6)
        eta = 1e-3
        for _ in range(1000):
            f = Frame(u=init_random(5, 2, rng.integers(0, 2**31)).u)
            z = rng.standard_normal(5)
            x = np.outer(z, z)
            out = gha_step(f, x, eta)
            drift = np.linalg.norm(out.u.T @ out.u - np.eye(2))
            assert drift <= 10.0 * eta**2 * np.linalg.norm(x, 2) ** 2


class TestStageOf:
    def test_cases(self):
        assert stage_of(0.5, 0.0, 1e-4) == 3
        assert stage_of(0.0, 1.0, 1e-4) == 1
        assert stage_of(2e-4, 0.5, 1e-4) == 2
        # larger tail threshold promotes to stage 3 earlier
        assert stage_of(0.5, 0.005, 1e-4, tail_threshold=0.01) == 3


def small_run_setup(seed=0, max_samples=4000, eta=5e-3, r=1, variant="oja", **kw):
    model = VarModel(a=np.zeros((3, 3)), noise_cov=np.diag([3.0, 1.0, 0.5]))
    truth = SpectralTruth.from_sigma(np.diag([3.0, 1.0, 0.5]))
    config = RunConfig(eta=eta, h=1, r=r, max_samples=max_samples,
                       seed=seed, variant=variant, **kw)
    return model, truth, config


class TestRun:
    def test_zero_budget_returns_initial_record(self):
        model, truth, config = small_run_setup(max_samples=0)
        rec = run(StreamHandle(model, 0), truth, config)
        assert rec.n_records == 1
        assert rec.s[0] == 0 and rec.k[0] == 0

    def test_records_on_grid_plus_final(self):
        model, truth, config = small_run_setup(max_samples=250)
        rec = run(StreamHandle(model, 0), truth, config, record_every=100)
        assert list(rec.s) == [0, 100, 200, 250]
        assert list(rec.k) == [0, 100, 200, 250]

    def test_determinism(self):
        model, truth, config = small_run_setup(seed=42)
        r1 = run(StreamHandle(model, 42), truth, config)
        r2 = run(StreamHandle(model, 42), truth, config)
        np.testing.assert_array_equal(r1.tail_sum, r2.tail_sum)
        np.testing.assert_array_equal(r1.final_u, r2.final_u)

    def test_converges_on_iid_gaussian(self):
        model, truth, config = small_run_setup(max_samples=20_000)
        rec = run(StreamHandle(model, 1), truth, config)
        assert rec.tail_sum[-1] < 0.05

    def test_rotational_equivalence(self):
        model, truth, _ = small_run_setup()
        config = RunConfig(eta=5e-3, h=1, r=2, max_samples=3000, seed=8)
        u0 = init_random(3, 2, 11)
        g = np.array([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]])
        rec1 = run(StreamHandle(model, 8), truth, config, u0=u0)
        rec2 = run(StreamHandle(model, 8), truth, config, u0=Frame(u=u0.u @ g))
        # identical sample streams: per-record principal angles to the top
        # eigenspace agree (tail_sum is their squared-cosine aggregate)
        np.testing.assert_allclose(rec1.tail_sum, rec2.tail_sum, atol=1e-6)

    def test_population_mode_stationary_points_fixed(self):
        truth = SpectralTruth.from_sigma(np.diag([4.0, 2.5, 1.5, 0.5]))
        for variant in ("oja", "gha"):
            for idx in itertools.combinations(range(1, 5), 2):
                config = RunConfig(eta=1e-2, h=1, r=2, max_samples=500, variant=variant)
                u0 = init_at_stationary_point(truth, list(idx))
                rec = run(None, truth, config, u0=u0, population=True)
                np.testing.assert_allclose(rec.final_u, u0.u, atol=1e-10)

    def test_population_mode_converges(self):
        truth = SpectralTruth.from_sigma(np.diag([4.0, 2.5, 1.5, 0.5]))
        config = RunConfig(eta=5e-3, h=1, r=2, max_samples=20_000)
        rec = run(None, truth, config, u0=init_random(4, 2, 3), population=True)
        assert rec.tail_sum[-1] < 1e-8

    def test_perturbation_recovers_degenerate_spectrum(self):
        # rank-deficient noise makes Sigma singular; the perturbed run
        # targets Sigma + eps*I, whose top eigenvector matches sym_eig's.
        model = VarModel(a=0.5 * np.eye(3), noise_cov=np.diag([1.0, 0.0, 0.0]))
        sigma = lyapunov_stationary(model.a, model.noise_cov)
        eps = 0.1
        truth_pert = SpectralTruth.from_sigma(sigma + eps * np.eye(3))
        config = RunConfig(
            eta=0.01, h=1, r=1, max_samples=20_000, seed=4, perturbation_eps=eps
        )
        rec = run(StreamHandle(model, 4), None, config, u0=init_random(3, 1, 4))
        top = truth_pert.eigvecs[:, 0]
        overlap = float(np.abs(top @ rec.final_u[:, 0]))
        assert np.arccos(min(overlap, 1.0)) <= 0.15

    def test_oja_gha_trajectories_stay_close(self):
        # identical streams, small step: recorded alignments of the two
        # variants diverge by at most 10*eta per iteration, <= 0.05 total
        eta = 1e-4
        model = VarModel(a=np.zeros((4, 4)), noise_cov=np.diag([1.5, 1.2, 0.8, 0.5]))
        truth = SpectralTruth.from_sigma(np.diag([1.5, 1.2, 0.8, 0.5]))
        u0 = init_random(4, 2, 21)
        recs = {}
        for variant in ("oja", "gha"):
            config = RunConfig(eta=eta, h=1, r=2, max_samples=10_000, seed=21, variant=variant)
            recs[variant] = run(StreamHandle(model, 21), truth, config, u0=u0)
        gap = np.abs(recs["oja"].tail_sum - recs["gha"].tail_sum)
        bound = np.minimum(10.0 * eta * recs["oja"].s.astype(float) + 1e-12, 0.05)
        assert np.all(gap <= bound)

    def test_eps_target_early_stop(self):
        model, truth, _ = small_run_setup()
        config = RunConfig(eta=5e-3, h=1, r=1, max_samples=50_000, seed=2, eps_target=0.02)
        rec = run(StreamHandle(model, 2), truth, config, record_every=50)
        assert rec.k[-1] < 50_000
        assert np.all(rec.tail_sum[-5:] < 0.02)

    def test_r_exceeding_m_named_error(self):
        model, truth, _ = small_run_setup()
        config = RunConfig(eta=1e-3, h=1, r=5, max_samples=10)
        with pytest.raises(ValueError, match="field r"):
            run(StreamHandle(model, 0), truth, config)

    def test_annealed_run_records_eta(self):
        model, truth, _ = small_run_setup()
        config = RunConfig(
            eta=0.5, h=1, r=1, max_samples=25_000, seed=3,
            schedule="table-annealing", annealing_table=paper_annealing_table(1),
        )
        rec = run(StreamHandle(model, 3), truth, config, record_every=5000)
        assert rec.eta[1] == pytest.approx(0.5 / 4000)
        assert rec.eta[-1] == pytest.approx(0.5 / 8000)


class TestTrajectorySerialization:
    def test_csv_round_trip(self, tmp_path):
        import csv as csvmod

        model, truth, config = small_run_setup(max_samples=500)
        rec = run(StreamHandle(model, 5), truth, config, record_every=100)
        path = tmp_path / "traj.csv"
        rec.to_csv(path)
        with open(path, newline="") as fh:
            rows = list(csvmod.reader(fh))
        header = rows[0]
        assert header[:3] == ["s", "k", "eta"]
        assert header[3:] == ["gamma_sq_2", "gamma_sq_3", "sum_tail", "stage"]
        for n, row in enumerate(rows[1:]):
            assert int(row[0]) == rec.s[n]
            assert float(row[2]) == rec.eta[n]
            assert abs(float(row[-2]) - rec.tail_sum[n]) <= 1e-12

    def test_json_round_trip(self, tmp_path):
        import json

        model, truth, config = small_run_setup(max_samples=200)
        rec = run(StreamHandle(model, 5), truth, config)
        path = tmp_path / "traj.json"
        rec.to_json(path)
        payload = json.loads(path.read_text())
        assert payload["s"] == rec.s.tolist()
        np.testing.assert_allclose(payload["tail_sum"], rec.tail_sum, atol=1e-15)
