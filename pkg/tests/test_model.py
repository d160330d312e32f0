import numpy as np
import pytest

import jumpsem as js
from jumpsem.errors import ConfigError, SingularPsi
from jumpsem.model import Fixed, Free, materialize

from conftest import diag_2d_model, saturated_2d_model


def brute_force_sigma(spec, theta):
    """Independent assembly: joint loading matrix on stacked latent vector."""
    m = materialize(spec, theta)
    psi_inv = np.linalg.inv(m.psi)
    top = np.hstack([m.lambda1, np.zeros((spec.p1, spec.k2))])
    bottom = np.hstack([m.lambda2 @ psi_inv @ m.gamma, m.lambda2 @ psi_inv])
    load = np.vstack([top, bottom])
    latent = np.zeros((spec.k1 + spec.k2, spec.k1 + spec.k2))
    latent[: spec.k1, : spec.k1] = m.sig_xixi
    latent[spec.k1 :, spec.k1 :] = m.sig_zetzet
    noise = np.zeros((spec.p, spec.p))
    noise[: spec.p1, : spec.p1] = m.sig_deldel
    noise[spec.p1 :, spec.p1 :] = m.sig_epseps
    return load @ latent @ load.T + noise


class TestModelSpecValidation:
    def test_dims_must_be_positive(self):
        with pytest.raises(ConfigError):
            js.model_spec_from_obj(
                {
                    "dims": {"p1": 0, "p2": 1, "k1": 1, "k2": 1},
                    "Lambda1": [],
                    "Lambda2": [[1.0]],
                    "B0": [[0.0]],
                    "Gamma": [[0.0]],
                    "SigXiXi": [[1.0]],
                    "SigDelDel": [],
                    "SigEpsEps": [[1.0]],
                    "SigZetZet": [[1.0]],
                }
            )

    def test_k1_gt_p1_rejected(self):
        doc = _tiny_doc()
        doc["dims"] = {"p1": 1, "p2": 1, "k1": 2, "k2": 1}
        with pytest.raises(ConfigError, match="k1"):
            js.model_spec_from_obj(doc)

    def test_b0_diagonal_must_be_fixed_zero(self):
        doc = _tiny_doc()
        doc["B0"] = [["theta2"]]
        with pytest.raises(ConfigError, match="B0 diagonal"):
            js.model_spec_from_obj(doc)

    def test_gapped_indices_rejected(self):
        doc = _tiny_doc()
        doc["SigZetZet"] = [["theta5"]]
        with pytest.raises(ConfigError, match="0..q-1"):
            js.model_spec_from_obj(doc)

    def test_asymmetric_grid_rejected(self):
        doc = _tiny_doc()
        doc["dims"] = {"p1": 2, "p2": 1, "k1": 1, "k2": 1}
        doc["Lambda1"] = [[1.0], ["theta2"]]
        doc["SigDelDel"] = [[1.0, 0.5], [0.3, 1.0]]
        with pytest.raises(ConfigError, match="mirror"):
            js.model_spec_from_obj(doc)

    def test_unknown_keys_rejected(self):
        doc = _tiny_doc()
        doc["Extra"] = []
        with pytest.raises(ConfigError, match="unknown keys"):
            js.model_spec_from_obj(doc)

    def test_conflicting_bounds_rejected(self):
        doc = _tiny_doc()
        doc["dims"] = {"p1": 2, "p2": 1, "k1": 1, "k2": 1}
        doc["Lambda1"] = [
            [{"theta": 0, "bounds": [-2.0, 2.0]}],
            [{"theta": 0, "bounds": [-3.0, 3.0]}],
        ]
        doc["SigDelDel"] = [[1.0, 0.0], [0.0, 1.0]]
        with pytest.raises(ConfigError, match="conflicting bounds"):
            js.model_spec_from_obj(doc)


def _tiny_doc():
    return {
        "dims": {"p1": 1, "p2": 1, "k1": 1, "k2": 1},
        "Lambda1": [["theta0"]],
        "Lambda2": [[1.0]],
        "B0": [[0.0]],
        "Gamma": [[0.0]],
        "SigXiXi": [[1.0]],
        "SigDelDel": [[1.0]],
        "SigEpsEps": [[1.0]],
        "SigZetZet": [["theta1"]],
    }


class TestMaterialize:
    def test_study_loadings_at_theta0(self, correct_model, theta0):
        m = materialize(correct_model, theta0)
        np.testing.assert_allclose(m.lambda1.ravel(), [1.0, 0.7, 1.3, 0.9])
        np.testing.assert_allclose(m.gamma.ravel(), [0.7, -0.8])
        np.testing.assert_allclose(m.psi, np.eye(2))
        np.testing.assert_allclose(
            np.diag(m.sig_deldel), [2.56, 0.49, 1.44, 0.81]
        )

    def test_all_fixed_spec_empty_theta(self):
        doc = _tiny_doc()
        doc["Lambda1"] = [[2.5]]
        doc["SigZetZet"] = [[0.7]]
        spec = js.model_spec_from_obj(doc)
        assert spec.q == 0
        m = materialize(spec, np.zeros(0))
        assert m.lambda1[0, 0] == 2.5
        assert m.sig_zetzet[0, 0] == 0.7

    def test_symmetric_grid_shares_index(self):
        spec = js.ModelSpec(
            p1=2, p2=1, k1=2, k2=1,
            lambda1=[[Fixed(1.0), Fixed(0.0)], [Fixed(0.0), Fixed(1.0)]],
            lambda2=[[Fixed(1.0)]],
            b0=[[Fixed(0.0)]],
            gamma=[[Fixed(0.0), Fixed(0.0)]],
            sig_xixi=[[Fixed(1.0), Free(0)], [Free(0), Fixed(1.0)]],
            sig_deldel=[[Fixed(0.1), Fixed(0.0)], [Fixed(0.0), Fixed(0.1)]],
            sig_epseps=[[Fixed(1.0)]],
            sig_zetzet=[[Fixed(1.0)]],
        )
        m = materialize(spec, np.array([5.0]))
        assert m.sig_xixi[0, 1] == 5.0
        assert m.sig_xixi[1, 0] == 5.0

    def test_length_mismatch(self, correct_model):
        with pytest.raises(ValueError):
            materialize(correct_model, np.zeros(3))


class TestImpliedCovariance:
    def test_decoupled_unit_case(self):
        doc = _tiny_doc()
        doc["Lambda1"] = [[1.0]]
        doc["SigZetZet"] = [[1.0]]
        spec = js.model_spec_from_obj(doc)
        sigma = js.implied_covariance(spec, np.zeros(0))
        np.testing.assert_allclose(sigma, np.diag([2.0, 2.0]))

    def test_study_model_entries(self, correct_model, theta0):
        sigma = js.implied_covariance(correct_model, theta0)
        assert sigma[0, 0] == pytest.approx(4.000)
        assert sigma[0, 1] == pytest.approx(1.008)
        assert sigma[0, 8] == pytest.approx(-1.152)
        assert sigma[8, 8] == pytest.approx(4.3816)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force_assembly(self, correct_model, theta0, seed):
        rng = np.random.default_rng(seed)
        theta = theta0 * (1 + rng.uniform(-0.2, 0.2, theta0.size))
        np.testing.assert_allclose(
            js.implied_covariance(correct_model, theta),
            brute_force_sigma(correct_model, theta),
            rtol=1e-12,
            atol=1e-12,
        )

    def test_brute_force_with_nontrivial_b0(self):
        spec = js.model_spec_from_obj(
            {
                "dims": {"p1": 2, "p2": 3, "k1": 1, "k2": 2},
                "Lambda1": [[1.0], ["theta0"]],
                "Lambda2": [[1.0, 0.0], [0.0, 1.0], ["theta1", "theta2"]],
                "B0": [[0.0, "theta3"], ["theta4", 0.0]],
                "Gamma": [["theta5"], ["theta6"]],
                "SigXiXi": [["theta7"]],
                "SigDelDel": [["theta8", 0.0], [0.0, "theta9"]],
                "SigEpsEps": [
                    ["theta10", 0.0, 0.0],
                    [0.0, "theta11", 0.0],
                    [0.0, 0.0, "theta12"],
                ],
                "SigZetZet": [["theta13", 0.0], [0.0, "theta14"]],
            }
        )
        theta = np.array(
            [0.8, 0.5, -0.4, 0.3, -0.2, 0.6, -0.7, 1.2, 0.9, 1.1, 0.8, 1.0, 0.7, 0.9, 1.3]
        )
        np.testing.assert_allclose(
            js.implied_covariance(spec, theta),
            brute_force_sigma(spec, theta),
            rtol=1e-12,
            atol=1e-12,
        )

    def test_singular_psi_raises(self):
        spec = js.model_spec_from_obj(
            {
                "dims": {"p1": 1, "p2": 2, "k1": 1, "k2": 2},
                "Lambda1": [[1.0]],
                "Lambda2": [[1.0, 0.0], [0.0, 1.0]],
                "B0": [[0.0, "theta0"], ["theta1", 0.0]],
                "Gamma": [[0.0], [0.0]],
                "SigXiXi": [[1.0]],
                "SigDelDel": [[1.0]],
                "SigEpsEps": [[1.0, 0.0], [0.0, 1.0]],
                "SigZetZet": [[1.0, 0.0], [0.0, 1.0]],
            }
        )
        with pytest.raises(SingularPsi):
            js.implied_covariance(spec, np.array([1.0, 1.0]))

    def test_invariant_under_index_renumbering(self, theta0):
        base = js.implied_covariance(
            js.model_spec_from_obj(_study_doc()), theta0
        )
        # swap parameter slots 0 and 11 in the document and in theta
        doc = _study_doc()
        doc["Lambda1"][1] = ["theta11"]
        doc["SigXiXi"] = [["theta0"]]
        perm = theta0.copy()
        perm[0], perm[11] = theta0[11], theta0[0]
        renumbered = js.implied_covariance(js.model_spec_from_obj(doc), perm)
        np.testing.assert_allclose(renumbered, base)


def _study_doc():
    from conftest import load_doc

    return load_doc("correct_model.json")["model"]


class TestJacobian:
    def test_additive_variance_parameter_column(self, correct_model, theta0):
        jac = js.jacobian(correct_model, theta0)
        # parameter 12 (0-based) is the (1,1) measurement variance: its
        # column is the indicator of covariance entry (1,1)
        col = jac[:, 12]
        expected = np.zeros(correct_model.p_bar)
        expected[0] = 1.0
        np.testing.assert_allclose(col, expected)

    def test_matches_finite_differences(self, correct_model, theta0):
        jac = js.jacobian(correct_model, theta0)
        fd = np.zeros_like(jac)
        for j in range(correct_model.q):
            step = 1e-6 * max(1.0, abs(theta0[j]))
            tp, tm = theta0.copy(), theta0.copy()
            tp[j] += step
            tm[j] -= step
            fd[:, j] = (
                js.vech(js.implied_covariance(correct_model, tp))
                - js.vech(js.implied_covariance(correct_model, tm))
            ) / (2 * step)
        scale = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(jac - fd) / scale) <= 1e-6

    def test_all_fixed_spec_empty_jacobian(self):
        doc = _tiny_doc()
        doc["Lambda1"] = [[1.0]]
        doc["SigZetZet"] = [[1.0]]
        spec = js.model_spec_from_obj(doc)
        assert js.jacobian(spec, np.zeros(0)).shape == (3, 0)


class TestRankCheck:
    def test_study_model_full_rank(self, correct_model, theta0):
        rep = js.rank_check(correct_model, theta0)
        assert rep.jacobian_rank == 26 == correct_model.q
        assert rep.jacobian_full_rank
        assert rep.lambda1_full_rank and rep.lambda2_full_rank

    def test_duplicated_parameter_flagged(self):
        # one index wired to two loading slots that produce identical
        # derivative columns only if the model is degenerate; here we make
        # a genuinely redundant pattern: free variance split over two
        # parameters that always enter as a sum
        spec = js.ModelSpec(
            p1=1, p2=1, k1=1, k2=1,
            lambda1=[[Fixed(1.0)]],
            lambda2=[[Fixed(1.0)]],
            b0=[[Fixed(0.0)]],
            gamma=[[Fixed(0.0)]],
            sig_xixi=[[Free(0)]],
            sig_deldel=[[Free(1)]],
            sig_epseps=[[Fixed(1.0)]],
            sig_zetzet=[[Fixed(1.0)]],
        )
        rep = js.rank_check(spec, np.array([1.0, 1.0]))
        assert rep.jacobian_rank == 1 < spec.q
        assert not rep.jacobian_full_rank

    def test_all_fixed_trivially_full(self):
        doc = _tiny_doc()
        doc["Lambda1"] = [[1.0]]
        doc["SigZetZet"] = [[1.0]]
        spec = js.model_spec_from_obj(doc)
        rep = js.rank_check(spec, np.zeros(0))
        assert rep.jacobian_rank == 0
        assert rep.jacobian_full_rank

    def test_table_values_all_78(self, correct_model, theta0):
        # frozen 3-decimal reference values for the full implied covariance
        from conftest import TABLE1_TRUE

        sigma = js.implied_covariance(correct_model, theta0)
        assert len(TABLE1_TRUE) == 78
        for (i, j), val in TABLE1_TRUE.items():
            assert sigma[i - 1, j - 1] == pytest.approx(val, abs=5.1e-4)


class TestHelpers:
    def test_diag_model_shape(self):
        spec = diag_2d_model()
        sigma = js.implied_covariance(spec, np.array([2.0, 3.0]))
        np.testing.assert_allclose(sigma, np.diag([2.0, 3.0]))

    def test_saturated_model_bijection(self):
        spec = saturated_2d_model()
        t = np.array([2.0, 0.3, 1.5])
        sigma = js.implied_covariance(spec, t)
        np.testing.assert_allclose(
            sigma, [[2.0, 0.6], [0.6, 2.0 * 0.09 + 1.5]]
        )
