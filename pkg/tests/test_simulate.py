import math

import numpy as np
import pytest

import jumpsem as js
from jumpsem.errors import ConfigError, DataFormatError
from jumpsem.simulate import simulate_panel


def scalar_ou(a=2.0, mu=1.0, s=1.2, lam=0.0, var=1.0, x0=1.0):
    jumps = [js.JumpChannel(rate=lam, size=js.GaussianJumps(0.0, var))] if lam else []
    return js.OUJumpSpec(
        dim=1,
        drift_rate=[[a]],
        drift_level=[mu],
        diffusion=[[s]],
        jumps=jumps,
        x0=[x0],
    )


class TestSimulateLatent:
    def test_degenerate_dynamics_constant_path(self):
        spec = js.OUJumpSpec(
            dim=2,
            drift_rate=np.zeros((2, 2)),
            drift_level=np.zeros(2),
            diffusion=np.zeros((2, 2)),
            x0=[1.5, -2.0],
        )
        path = js.simulate_latent(spec, 50, 0.01, np.random.default_rng(0))
        np.testing.assert_array_equal(path, np.tile([1.5, -2.0], (51, 1)))

    def test_ou_terminal_variance(self):
        # X' = -2(X-1) + 1.2 dW from X0=1: Var(X_1) = (1.2^2/4)(1 - e^-4)
        spec = scalar_ou()
        rng = np.random.default_rng(123)
        n, h, paths = 1000, 1e-3, 2000
        finals = np.array(
            [js.simulate_latent(spec, n, h, rng)[-1, 0] for _ in range(paths)]
        )
        target = (1.2**2 / 4.0) * (1 - math.exp(-4.0))
        sample_var = finals.var(ddof=1)
        se = target * math.sqrt(2.0 / (paths - 1))
        assert abs(sample_var - target) <= 3 * se
        assert abs(finals.mean() - 1.0) <= 4 * math.sqrt(target / paths)

    def test_poisson_jump_count(self):
        spec = scalar_ou(a=0.0, mu=0.0, s=0.0, lam=3.0, var=5.0, x0=0.0)
        rng = np.random.default_rng(7)
        paths, n, h = 2000, 100, 0.01
        counts = np.empty(paths)
        for k in range(paths):
            path = js.simulate_latent(spec, n, h, rng)
            counts[k] = np.count_nonzero(np.diff(path[:, 0]))
        assert abs(counts.mean() - 3.0) <= 3 * math.sqrt(3.0 / paths)

    def test_nondiagonal_drift_matches_dense_loop(self):
        a = np.array([[1.0, 0.3], [-0.2, 0.8]])
        spec = js.OUJumpSpec(
            dim=2,
            drift_rate=a,
            drift_level=[0.5, -0.5],
            diffusion=np.zeros((2, 2)),
            x0=[1.0, 2.0],
        )
        path = js.simulate_latent(spec, 20, 0.05, np.random.default_rng(0))
        x = np.array([1.0, 2.0])
        for i in range(20):
            x = x - 0.05 * (a @ (x - np.array([0.5, -0.5])))
            np.testing.assert_allclose(path[i + 1], x, rtol=1e-13)

    def test_diagonal_path_matches_naive_recursion(self):
        spec = scalar_ou(lam=2.0, var=1.0)
        rng = np.random.default_rng(11)
        path = js.simulate_latent(spec, 200, 0.01, rng)
        # replay the same draws with an explicit loop
        rng2 = np.random.default_rng(11)
        z = rng2.standard_normal((200, 1))
        counts = rng2.poisson(2.0 * 0.01, size=(200, 1))
        jump = np.zeros(200)
        for i in np.nonzero(counts[:, 0])[0]:
            jump[i] = rng2.normal(0.0, 1.0, counts[i, 0]).sum()
        x = 1.0
        for i in range(200):
            x = x - 0.01 * 2.0 * (x - 1.0) + 1.2 * math.sqrt(0.01) * z[i, 0] + jump[i]
            assert path[i + 1, 0] == pytest.approx(x, rel=1e-10, abs=1e-12)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ConfigError):
            js.simulate_latent(scalar_ou(), 0, 0.1, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            js.simulate_latent(scalar_ou(), 10, -1.0, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            js.OUJumpSpec(
                dim=1,
                drift_rate=[[np.inf]],
                drift_level=[0.0],
                diffusion=[[1.0]],
            )


class TestAssembleObservations:
    def test_zero_noise_rows_constant(self, study_system):
        import copy

        sys_spec = copy.deepcopy(study_system)
        for blk in (sys_spec.xi, sys_spec.delta, sys_spec.eps, sys_spec.zeta):
            blk.diffusion = np.zeros_like(blk.diffusion)
            blk.drift_rate = np.zeros_like(blk.drift_rate)
            blk.jumps = []
        obs = js.assemble_observations(sys_spec, 5, 0.1, 1)
        x1_0 = sys_spec.lambda1 @ sys_spec.xi.x0 + sys_spec.delta.x0
        eta0 = sys_spec.gamma @ sys_spec.xi.x0 + sys_spec.zeta.x0
        x2_0 = sys_spec.lambda2 @ eta0 + sys_spec.eps.x0
        expected = np.concatenate([x1_0, x2_0])
        for row in obs.X:
            np.testing.assert_allclose(row, expected)

    def test_deterministic_given_seed(self, study_system):
        a = js.assemble_observations(study_system, 200, 1e-3, 99)
        b = js.assemble_observations(study_system, 200, 1e-3, 99)
        np.testing.assert_array_equal(a.X, b.X)
        c = js.assemble_observations(study_system, 200, 1e-3, 100)
        assert not np.array_equal(a.X, c.X)

    def test_substream_independence(self, study_system):
        # the four blocks run on separate substreams of the same master
        # seed; their increments must be empirically uncorrelated
        from jumpsem.simulate import _TAG_DELTA, _TAG_EPS, _TAG_XI, _TAG_ZETA, _stream

        n, h, seed = 100000, 1e-5, 3
        paths = {
            "xi": js.simulate_latent(study_system.xi, n, h, _stream(seed, _TAG_XI, 0)),
            "delta": js.simulate_latent(
                study_system.delta, n, h, _stream(seed, _TAG_DELTA, 0)
            ),
            "eps": js.simulate_latent(study_system.eps, n, h, _stream(seed, _TAG_EPS, 0)),
            "zeta": js.simulate_latent(
                study_system.zeta, n, h, _stream(seed, _TAG_ZETA, 0)
            ),
        }
        incs = {k: np.diff(v, axis=0) for k, v in paths.items()}
        pairs = [("xi", "delta"), ("xi", "eps"), ("delta", "eps"), ("eps", "zeta")]
        for a, b in pairs:
            for ca in range(min(2, incs[a].shape[1])):
                for cb in range(min(2, incs[b].shape[1])):
                    corr = np.corrcoef(incs[a][:, ca], incs[b][:, cb])[0, 1]
                    assert abs(corr) < 0.02, (a, b, ca, cb, corr)

    def test_jump_log_counts(self, study_system):
        obs, log = simulate_panel(study_system, 10000, 1e-4, 17)
        assert set(log.events_by_block) == {"xi", "delta", "eps", "zeta"}
        assert log.total_events >= log.jumpy_increment_count
        assert log.displacement_norms.shape == log.increment_indices.shape
        assert log.detectable_count(0.0) == log.jumpy_increment_count
        assert log.detectable_count(np.inf) == 0


class TestObservationIO:
    def test_roundtrip(self, tmp_path, study_system):
        obs = js.assemble_observations(study_system, 3, 0.25, 5)
        path = tmp_path / "obs.csv"
        js.write_observations(obs, path)
        back = js.read_observations(path)
        assert back.n == obs.n and back.h == obs.h
        assert (back.p1, back.p2) == (obs.p1, obs.p2)
        assert back.seed == 0
        np.testing.assert_array_equal(back.X, obs.X)

    def test_roundtrip_is_lossless_for_awkward_floats(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((4, 2)) * 1e-7
        obs = js.ObservationSet(n=3, h=1.0 / 3.0, p1=1, p2=1, X=x)
        path = tmp_path / "obs.csv"
        js.write_observations(obs, path)
        back = js.read_observations(path)
        np.testing.assert_array_equal(back.X, obs.X)
        assert back.h == obs.h

    def test_bad_T_rejected(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("# n=2 h=0.5 T=2.0 p1=1 p2=1\n0,0\n0,0\n0,0\n")
        with pytest.raises(DataFormatError, match="T"):
            js.read_observations(path)

    def test_missing_column_reports_row(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("# n=2 h=0.5 T=1.0 p1=1 p2=1\n0,0\n0\n0,0\n")
        with pytest.raises(DataFormatError, match="row 3"):
            js.read_observations(path)

    def test_wrong_row_count_rejected(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("# n=3 h=0.5 p1=1 p2=1\n0,0\n0,0\n0,0\n")
        with pytest.raises(DataFormatError, match="expected 4 data rows"):
            js.read_observations(path)

    def test_garbled_header_rejected(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("n=3 h=0.5\n0,0\n")
        with pytest.raises(DataFormatError, match="header"):
            js.read_observations(path)
