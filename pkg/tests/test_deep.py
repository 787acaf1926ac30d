import warnings

import numpy as np
import pytest

from aecm import autodiff as ad
from aecm.cm import (
    CmParams,
    CmTrainConfig,
    cm_forward,
    cm_loss,
    extract_centroids,
    random_cm_init,
    train_cm,
)
from aecm.cm import predict_labels as cm_predict
from aecm.data import gen_five_gaussians
from aecm.deep import (
    AecmArchitecture,
    AecmParams,
    AecmTrainConfig,
    MlpLayer,
    _aecm_loss_graph,
    _param_dict,
    _structure,
    aecm_forward,
    aecm_loss,
    build_aecm,
    decode_centroid,
    encode,
    interpolate,
    ortho_penalty,
    predict_labels,
    pretrain,
    quadratic_feature_layer,
    train_aecm,
)
from aecm.metrics import ari
from aecm.tensor import make_rng, standardize


def identity_params(d, k, seed=0):
    """d = p, single linear layers with identity weights."""
    cm = CmParams(
        w_enc=0.01 * make_rng(seed).standard_normal((d, k)),
        b_enc=np.zeros((1, k)),
        w_dec=0.01 * make_rng(seed + 1).standard_normal((k, d)),
        b_dec=np.zeros((1, d)),
    )
    return AecmParams(
        encoder=[MlpLayer(np.eye(d), np.zeros((1, d)), "linear")],
        decoder=[MlpLayer(np.eye(d), np.zeros((1, d)), "linear")],
        cm=cm,
    )


class TestForward:
    def test_identity_network(self):
        p = identity_params(3, 2)
        x = make_rng(1).standard_normal((6, 3))
        z, gamma, z_rec, x_rec = aecm_forward(x, p)
        assert np.array_equal(z, x)
        assert np.array_equal(x_rec, x)
        assert gamma.shape == (6, 2)

    def test_one_hot_code_reconstruction(self):
        p = identity_params(3, 2)
        p.cm.w_enc = np.zeros((3, 2))
        p.cm.b_enc = np.array([[1e3, 0.0]])
        x = make_rng(2).standard_normal((4, 3))
        _, gamma, z_rec, _ = aecm_forward(x, p)
        mu = extract_centroids(p.cm)
        assert gamma[:, 0].min() > 1.0 - 1e-12
        assert np.allclose(z_rec, mu[0], atol=1e-9)

    def test_tiny_net_matches_loop_oracle(self):
        rng = make_rng(3)
        arch = AecmArchitecture(d=3, p=2, hidden=(4,))
        p = build_aecm(arch, 2, rng)
        x = rng.standard_normal((5, 3))
        z, gamma, z_rec, x_rec = aecm_forward(x, p)

        def layer_loop(h, layer):
            out = np.zeros((h.shape[0], layer.weights.shape[1]))
            for i in range(h.shape[0]):
                for j in range(layer.weights.shape[1]):
                    acc = layer.bias[0, j]
                    for a in range(h.shape[0 + 1] if False else h.shape[1]):
                        acc += h[i, a] * layer.weights[a, j]
                    out[i, j] = acc if (layer.activation == "linear" or acc > 0) else 0.2 * acc
            return out

        h = x
        for layer in p.encoder:
            h = layer_loop(h, layer)
        assert np.abs(h - z).max() <= 1e-12
        h2 = z
        for layer in p.decoder:
            h2 = layer_loop(h2, layer)
        assert np.abs(h2 - x_rec).max() <= 1e-12


class TestQuadraticFeatures:
    def test_origin(self):
        out = quadratic_feature_layer(np.array([[0.0, 0.0]]))
        assert np.array_equal(out, [[1.0, 0, 0, 0, 0, 0, 0]])

    def test_direct_evaluation(self):
        out = quadratic_feature_layer(np.array([[1.0, 2.0]]))
        assert np.array_equal(out, [[1.0, 1.0, 2.0, 1.0, 2.0, 4.0, 2.0]])

    def test_wrong_width(self):
        with pytest.raises(ValueError):
            quadratic_feature_layer(np.ones((3, 3)))


class TestOrthoPenalty:
    def test_orthonormal_rows_zero(self):
        mu = np.hstack([np.eye(3), np.zeros((3, 2))])
        assert ortho_penalty(mu) == 0.0

    def test_scaled_orthonormal(self):
        k = 4
        mu = 2.0 * np.hstack([np.eye(k), np.zeros((k, 2))])
        # gram = 4I: each diagonal contributes |4 - 1| = 3
        assert ortho_penalty(mu) == pytest.approx(3.0 * k)

    def test_random_against_double_loop(self):
        rng = make_rng(4)
        mu = rng.standard_normal((5, 3))
        expected = 0.0
        for a in range(5):
            for b in range(5):
                expected += abs(float(mu[a] @ mu[b]) - (1.0 if a == b else 0.0))
        assert ortho_penalty(mu) == pytest.approx(expected, abs=1e-12)


class TestLoss:
    def test_ideal_configuration_is_zero(self):
        # one-hot codes, perfect reconstructions, orthonormal centroids, alpha=1
        k, p_dim = 3, 4
        cm = CmParams(
            w_enc=np.zeros((p_dim, k)),
            b_enc=np.zeros((1, k)),
            w_dec=np.hstack([np.eye(k), np.zeros((k, p_dim - k))]),
            b_dec=np.zeros((1, p_dim)),
        )
        params = AecmParams(
            encoder=[MlpLayer(np.eye(p_dim), np.zeros((1, p_dim)), "linear")],
            decoder=[MlpLayer(np.eye(p_dim), np.zeros((1, p_dim)), "linear")],
            cm=cm,
        )
        mu = extract_centroids(cm)
        z = mu[[0, 1, 2, 0]]
        gamma = np.eye(k)[[0, 1, 2, 0]]
        bd = aecm_loss(z, z, gamma, z, z, params, alpha=1.0, beta=2.0, lam=3.0)
        assert bd.total == pytest.approx(0.0, abs=1e-12)

    def test_total_is_weighted_sum(self):
        rng = make_rng(5)
        arch = AecmArchitecture(d=3, p=2, hidden=(4,))
        p = build_aecm(arch, 2, rng)
        x = rng.standard_normal((7, 3))
        z, gamma, z_rec, x_rec = aecm_forward(x, p)
        beta, lam = 0.7, 2.5
        bd = aecm_loss(x, z, gamma, z_rec, x_rec, p, 1.5, beta, lam)
        expected = beta * bd.rec_dae + bd.rec_cm + bd.sparsity + bd.prior + lam * bd.ortho
        assert bd.total == pytest.approx(expected, abs=1e-12)
        assert bd.rec_dae >= 0 and bd.rec_cm >= 0 and bd.sparsity >= 0 and bd.ortho >= 0

    def test_beta_scales_linearly(self):
        rng = make_rng(6)
        arch = AecmArchitecture(d=3, p=2)
        p = build_aecm(arch, 2, rng)
        x = rng.standard_normal((5, 3))
        z, gamma, z_rec, x_rec = aecm_forward(x, p)
        bd1 = aecm_loss(x, z, gamma, z_rec, x_rec, p, 1.0, 1.0, 1.0)
        bd2 = aecm_loss(x, z, gamma, z_rec, x_rec, p, 1.0, 2.0, 1.0)
        assert bd2.total - bd1.total == pytest.approx(bd1.rec_dae, rel=1e-12)
        bd3 = aecm_loss(x, z, gamma, z_rec, x_rec, p, 1.0, 1.0, 2.0)
        assert bd3.total - bd1.total == pytest.approx(bd1.ortho, rel=1e-12)

    def test_beta_zero_kills_decoder_gradient(self):
        rng = make_rng(7)
        arch = AecmArchitecture(d=3, p=2, hidden=(4,))
        p = build_aecm(arch, 2, rng)
        x = rng.standard_normal((6, 3))
        tape = ad.Tape()
        params = _param_dict(p)
        pv = {name: tape.param(v) for name, v in params.items()}
        total, _ = _aecm_loss_graph(
            tape, tape.constant(x), tape.constant(x), pv, _structure(p),
            np.array([1.0, 1.0]), 0.0, 1.0, "symmetric",
        )
        ad.backward(total)
        for name in params:
            if name.startswith("dec"):
                assert np.all(pv[name].grad == 0.0), name

    def test_gradient_flows_everywhere(self):
        rng = make_rng(8)
        arch = AecmArchitecture(d=4, p=3, hidden=(5,))
        p = build_aecm(arch, 2, rng)
        x = rng.standard_normal((10, 4))
        tape = ad.Tape()
        params = _param_dict(p)
        pv = {name: tape.param(v) for name, v in params.items()}
        total, _ = _aecm_loss_graph(
            tape, tape.constant(x), tape.constant(x), pv, _structure(p),
            np.array([2.0, 2.0]), 1.0, 1.0, "symmetric",
        )
        ad.backward(total)
        for name in params:
            assert np.abs(pv[name].grad).max() > 0.0, name

    def test_finite_difference_check_tiny_net(self):
        rng = make_rng(9)
        arch = AecmArchitecture(d=4, p=3, hidden=())
        p = build_aecm(arch, 2, rng)
        # keep the centroid gram entries away from the L1 kinks
        p.cm.w_dec = np.array([[1.2, 0.3, -0.4], [0.2, -1.1, 0.6]])
        x = rng.standard_normal((6, 4))
        params = _param_dict(p)
        structure = _structure(p)
        alpha = np.array([1.5, 1.5])

        def f(tape, vs):
            total, _ = _aecm_loss_graph(
                tape, tape.constant(x), tape.constant(x), vs, structure,
                alpha, 0.8, 1.3, "symmetric",
            )
            return total

        report = ad.finite_diff_check(f, params)
        assert max(report.values()) <= 1e-5, report

    def test_orthonormal_centroids_match_shallow_terms(self):
        # with unit orthonormal centroids the shallow gini term equals the
        # plain sparsity and the cross term vanishes
        rng = make_rng(10)
        k, p_dim = 3, 5
        cm = CmParams(
            w_enc=rng.standard_normal((p_dim, k)),
            b_enc=rng.standard_normal((1, k)),
            w_dec=np.hstack([np.eye(k), np.zeros((k, p_dim - k))]),
            b_dec=np.zeros((1, p_dim)),
        )
        z = rng.standard_normal((20, p_dim))
        gamma, z_rec = cm_forward(z, cm)
        shallow = cm_loss(z, gamma, z_rec, cm, 1.0)
        assert shallow.e_gini == pytest.approx(float((gamma * (1 - gamma)).sum()), abs=1e-10)
        assert shallow.e_cross == pytest.approx(0.0, abs=1e-10)


class TestPretrain:
    def test_zero_epochs_equals_random_init(self):
        rng_data = make_rng(11)
        x = rng_data.standard_normal((40, 3))
        arch = AecmArchitecture(d=3, p=4, hidden=())
        cfg = AecmTrainConfig(alpha=1.0, batch_size=10, seed=5,
                              pretrain_dae_epochs=0, pretrain_cm_epochs=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = pretrain(x, arch, 2, cfg)
        reference = build_aecm(arch, 2, make_rng(5))
        for got, want in zip(p.encoder, reference.encoder):
            assert np.array_equal(got.weights, want.weights)
        # stage 2 still runs: the clustering weights come from the embedding
        assert p.cm.w_enc.shape == (4, 2)

    def test_stage2_separated_blobs(self):
        # needs a nonlinear layer: a linear encoder keeps 2-D data rank 2,
        # which would make 5 embedded centroids rank deficient
        data = gen_five_gaussians(300, 12)
        x, _, _ = standardize(data.features)
        arch = AecmArchitecture(d=2, p=6, hidden=(8,))
        cfg = AecmTrainConfig(alpha=5.0, batch_size=30, seed=2, lr=1e-3,
                              pretrain_dae_epochs=30, pretrain_cm_epochs=0)
        p = pretrain(x, arch, 5, cfg)
        z = encode(p, x)
        centroids = extract_centroids(p.cm)
        gamma, _ = cm_forward(centroids, p.cm)
        assert np.array_equal(gamma.argmax(axis=1), np.arange(5))
        assert z.shape == (300, 6)

    def test_rank_deficient_embedding_warns_and_falls_back(self):
        x = make_rng(13).standard_normal((30, 2))
        arch = AecmArchitecture(d=2, p=1, hidden=())  # K=3 > p=1
        cfg = AecmTrainConfig(alpha=1.0, batch_size=10, seed=0,
                              pretrain_dae_epochs=0, pretrain_cm_epochs=0)
        with pytest.warns(RuntimeWarning):
            p = pretrain(x, arch, 3, cfg)
        assert p.cm.w_enc.shape == (1, 3)

    def test_stage1_reduces_reconstruction(self):
        data = gen_five_gaussians(400, 14)
        x, _, _ = standardize(data.features)
        arch = AecmArchitecture(d=2, p=2, hidden=(8,))
        cfg0 = AecmTrainConfig(alpha=5.0, batch_size=40, seed=3,
                               pretrain_dae_epochs=0, pretrain_cm_epochs=0)
        cfg1 = AecmTrainConfig(alpha=5.0, batch_size=40, seed=3, lr=1e-3,
                               pretrain_dae_epochs=40, pretrain_cm_epochs=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p0 = pretrain(x, arch, 5, cfg0)
            p1 = pretrain(x, arch, 5, cfg1)
        def rec(p):
            _, _, _, x_rec = aecm_forward(x, p)
            return ((x - x_rec) ** 2).sum()
        assert rec(p1) < rec(p0)


class TestTraining:
    def test_identity_frozen_matches_shallow_cm(self):
        # with the autoencoder frozen to identity maps, joint training reduces
        # to the shallow module up to the sparsity weighting difference
        data = gen_five_gaussians(600, 15)
        x, _, _ = standardize(data.features)
        arch = AecmArchitecture(d=2, p=2, hidden=())
        deep_scores, shallow_scores = [], []
        for seed in range(5):
            init = AecmParams(
                encoder=[MlpLayer(np.eye(2), np.zeros((1, 2)), "linear")],
                decoder=[MlpLayer(np.eye(2), np.zeros((1, 2)), "linear")],
                cm=random_cm_init(2, 5, make_rng(seed)),
            )
            acfg = AecmTrainConfig(alpha=5.0, beta=1.0, lam=0.001, batch_size=20,
                                   epochs=50, lr=0.01, optimizer="sgd", seed=seed,
                                   freeze_dae=True)
            p, _ = train_aecm(x, 5, arch, acfg, initial_params=init)
            deep_scores.append(ari(data.labels, predict_labels(x, p)))
            ccfg = CmTrainConfig(alpha=5.0, batch_size=20, epochs=50, lr=0.01,
                                 optimizer="sgd", seed=seed, init="random")
            cp, _ = train_cm(x, 5, ccfg)
            shallow_scores.append(ari(data.labels, cm_predict(x, cp)))
        assert abs(np.mean(deep_scores) - np.mean(shallow_scores)) <= 0.1

    def test_freeze_dae_keeps_layers(self):
        data = gen_five_gaussians(120, 16)
        x, _, _ = standardize(data.features)
        arch = AecmArchitecture(d=2, p=2, hidden=(4,))
        acfg = AecmTrainConfig(alpha=2.0, batch_size=30, epochs=2, seed=1,
                               init="random", freeze_dae=True)
        p, _ = train_aecm(x, 3, arch, acfg)
        reference = build_aecm(arch, 3, make_rng(1))
        for got, want in zip(p.encoder + p.decoder, reference.encoder + reference.decoder):
            assert np.array_equal(got.weights, want.weights)

    def test_averaging_epoch_leaves_dae_unchanged(self):
        data = gen_five_gaussians(150, 17)
        x, _, _ = standardize(data.features)
        arch = AecmArchitecture(d=2, p=3, hidden=(5,))
        base = AecmTrainConfig(alpha=2.0, batch_size=30, epochs=2, seed=4, init="random")
        no_avg = AecmTrainConfig(alpha=2.0, batch_size=30, epochs=2, seed=4,
                                 init="random", averaging_epoch=False)
        p_avg, _ = train_aecm(x, 3, arch, base)
        p_plain, _ = train_aecm(x, 3, arch, no_avg)
        for got, want in zip(p_avg.encoder + p_avg.decoder, p_plain.encoder + p_plain.decoder):
            assert np.array_equal(got.weights, want.weights)
            assert np.array_equal(got.bias, want.bias)
        assert np.array_equal(p_avg.cm.w_enc, p_plain.cm.w_enc)
        assert not np.array_equal(p_avg.cm.w_dec, p_plain.cm.w_dec)

    def test_history_terms_present(self):
        x = make_rng(18).standard_normal((60, 3))
        arch = AecmArchitecture(d=3, p=2, hidden=())
        acfg = AecmTrainConfig(alpha=1.0, batch_size=20, epochs=2, seed=0, init="random")
        _, history = train_aecm(x, 2, arch, acfg)
        assert len(history) == 3
        for key in ("rec_dae", "rec_cm", "sparsity", "prior", "ortho", "total"):
            assert key in history[0]

    def test_validation(self):
        x = np.ones((10, 2))
        arch = AecmArchitecture(d=2, p=2)
        with pytest.raises(ValueError):
            train_aecm(x, 2, arch, AecmTrainConfig(batch_size=100))
        with pytest.raises(ValueError):
            train_aecm(x, 2, arch, AecmTrainConfig(batch_size=5, init="bogus"))


class TestDecoding:
    def make_trained_like_params(self, seed=19):
        rng = make_rng(seed)
        arch = AecmArchitecture(d=4, p=3, hidden=(6,))
        return build_aecm(arch, 3, rng)

    def test_interpolate_endpoints(self):
        p = self.make_trained_like_params()
        path = interpolate(p, 0, 2, steps=2)
        assert np.allclose(path[0], decode_centroid(p, 0), atol=1e-12)
        assert np.allclose(path[1], decode_centroid(p, 2), atol=1e-12)

    def test_same_centroid_constant(self):
        p = self.make_trained_like_params()
        path = interpolate(p, 1, 1, steps=5)
        assert np.abs(path - path[0]).max() <= 1e-12

    def test_bad_indices(self):
        p = self.make_trained_like_params()
        with pytest.raises(IndexError):
            decode_centroid(p, 99)
        with pytest.raises(IndexError):
            interpolate(p, 0, 99, 3)
        with pytest.raises(ValueError):
            interpolate(p, 0, 1, 1)
