import math

import numpy as np
import pytest

from semvib import autodiff as ad
from semvib.errors import NumericError
from semvib.losses import (
    Batch,
    LossConfig,
    StepNoise,
    build_total_loss,
    consistent_contrastive,
    cosine_similarity,
    draw_step_noise,
    entropy_regularizer,
    gaussian_kl,
    ib_loss,
    pair_contrastive,
    reconstruction_loss,
    semantic_loss,
    total_loss,
)
from semvib.model import encode_view, init_model

# ---------------------------------------------------------------------------
# independent scalar-loop oracles
# ---------------------------------------------------------------------------


def oracle_cos(a, b):
    na = max(math.sqrt(sum(x * x for x in a)), 1e-12)
    nb = max(math.sqrt(sum(x * x for x in b)), 1e-12)
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def oracle_pair(qm, qn, tau):
    k = qm.shape[1]
    total = 0.0
    for j in range(k):
        numer = math.exp(oracle_cos(qm[:, j], qn[:, j]) / tau)
        denom = -math.exp(1.0 / tau)
        for kk in range(k):
            for qv in (qm, qn):
                denom += math.exp(oracle_cos(qm[:, j], qv[:, kk]) / tau)
        total += -math.log(numer / denom)
    return total / k


def oracle_consistent(qm, qc, tau):
    k = qm.shape[1]
    total = 0.0
    for j in range(k):
        numer = math.exp(oracle_cos(qm[:, j], qc[:, j]) / tau)
        denom = -math.exp(1.0 / tau)
        for kk in range(k):
            denom += math.exp(oracle_cos(qc[:, j], qm[:, kk]) / tau)
        total += -math.log(numer / denom)
    return total / k


def oracle_reg(q_list):
    total = 0.0
    for q in q_list:
        n, k = q.shape
        for j in range(k):
            p = sum(q[i, j] for i in range(n)) / n
            if p > 0:
                total += p * math.log(p)
    return total


def oracle_semantic(q_list, qc, tau):
    m_views = len(q_list)
    total = 0.0
    for m in range(m_views):
        for n in range(m_views):
            if n != m:
                total += oracle_pair(q_list[m], q_list[n], tau)
        total += oracle_consistent(q_list[m], qc, tau)
    return 0.5 * total + oracle_reg(q_list)


def loop_mlp(mlp, x):
    """Plain-loop forward pass, independent of the autodiff path."""
    out = np.array(x, dtype=float)
    for layer in mlp.layers:
        w, b = layer.W.data, layer.b.data
        nxt = np.zeros((out.shape[0], w.shape[1]))
        for i in range(out.shape[0]):
            for j in range(w.shape[1]):
                acc = b[j]
                for t in range(w.shape[0]):
                    acc += out[i, t] * w[t, j]
                nxt[i, j] = acc
        if layer.activation == "relu":
            nxt = np.where(nxt > 0, nxt, 0.0)
        elif layer.activation == "softmax":
            for i in range(nxt.shape[0]):
                row = nxt[i] - nxt[i].max()
                e = np.exp(row)
                nxt[i] = e / e.sum()
        out = nxt
    return out


def tiny_model(seed=0, n=6, d=3, d_c=3, k=3):
    return init_model(
        [4, 5], n_samples=n, k=k, d=d, d_c=d_c,
        enc_hidden=(5,), dec_hidden=(5,), head_hidden=(4,), fusion_hidden=(4,), seed=seed,
    )


def tiny_batch(model, seed=0, size=None):
    rng = np.random.default_rng(seed)
    size = model.n_samples if size is None else size
    idx = np.arange(size)
    views = [rng.standard_normal((size, dim)) for dim in model.arch["view_dims"]]
    return Batch(views=views, indices=idx)


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


class TestReconstructionLoss:
    def test_perfect_reconstruction_is_zero(self):
        x = [np.ones((3, 2)), np.zeros((3, 4))]
        assert reconstruction_loss(x, x).item() == 0.0

    def test_unit_squared_error(self):
        assert reconstruction_loss(
            [np.array([[1.0, 0.0]])], [np.array([[0.0, 0.0]])]
        ).item() == pytest.approx(1.0)

    def test_duplicating_rows_leaves_value_unchanged(self):
        rng = np.random.default_rng(0)
        x, xh = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
        single = reconstruction_loss([x], [xh]).item()
        double = reconstruction_loss([np.vstack([x, x])], [np.vstack([xh, xh])]).item()
        assert double == pytest.approx(single, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            reconstruction_loss([np.zeros((2, 2))], [np.zeros((2, 3))])


# ---------------------------------------------------------------------------
# Gaussian KL
# ---------------------------------------------------------------------------


class TestGaussianKl:
    def test_standard_normal_is_zero(self):
        assert gaussian_kl(np.zeros((2, 3)), np.ones((2, 3))).item() == 0.0

    def test_unit_mean_closed_form(self):
        assert gaussian_kl(np.ones((1, 1)), np.ones((1, 1))).item() == pytest.approx(0.5)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(7)
        mu = rng.standard_normal((2, 3))
        sigma = np.exp(rng.standard_normal((2, 3)) * 0.3)
        n = 100_000
        estimates, variances = [], []
        for r in range(2):
            z = mu[r] + sigma[r] * rng.standard_normal((n, 3))
            # log p - log q for p = N(mu, sigma^2 I), q = N(0, I)
            log_p = -0.5 * (((z - mu[r]) / sigma[r]) ** 2).sum(axis=1) - np.log(sigma[r]).sum()
            log_q = -0.5 * (z**2).sum(axis=1)
            diff = log_p - log_q
            estimates.append(diff.mean())
            variances.append(diff.var() / n)
        mc = np.mean(estimates)
        se = math.sqrt(sum(variances)) / 2
        assert gaussian_kl(mu, sigma).item() == pytest.approx(mc, abs=3 * se)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            gaussian_kl(np.zeros((1, 2)), np.array([[1.0, 0.0]]))

    def test_nonnegative_with_equality_only_at_standard(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            mu = rng.standard_normal((3, 4))
            sigma = np.exp(rng.standard_normal((3, 4)))
            assert gaussian_kl(mu, sigma).item() >= 0.0


# ---------------------------------------------------------------------------
# cosine similarity
# ---------------------------------------------------------------------------


class TestCosineSimilarity:
    def test_identical_direction(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_positive_scaling_invariance(self):
        assert cosine_similarity([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0)

    def test_zero_vector_floored_and_warned(self):
        with pytest.warns(RuntimeWarning):
            assert cosine_similarity([0.0, 0.0], [1.0, 0.0]) == 0.0


# ---------------------------------------------------------------------------
# contrastive losses
# ---------------------------------------------------------------------------


class TestPairContrastive:
    def test_identity_matrices_frozen_value(self):
        ident = np.eye(2)
        expected = math.log(1.0 + 2.0 / math.e)  # from the enumeration oracle
        assert pair_contrastive(ident, ident, 1.0).item() == pytest.approx(expected, abs=1e-12)
        assert oracle_pair(ident, ident, 1.0) == pytest.approx(expected, abs=1e-12)

    def test_matches_enumeration_oracle_on_random_inputs(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            qm = rng.random((5, 3)) + 0.01
            qn = rng.random((5, 3)) + 0.01
            tau = rng.uniform(0.3, 3.0)
            assert pair_contrastive(qm, qn, tau).item() == pytest.approx(
                oracle_pair(qm, qn, tau), rel=1e-10
            )

    def test_nonnegative(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            qm = rng.standard_normal((6, 4))
            qn = rng.standard_normal((6, 4))
            assert pair_contrastive(qm, qn, 0.7).item() >= 0.0

    def test_column_scale_invariance(self):
        rng = np.random.default_rng(5)
        qm, qn = rng.random((6, 3)), rng.random((6, 3))
        base = pair_contrastive(qm, qn, 1.0).item()
        scaled = pair_contrastive(qm * 3.0, qn, 1.0).item()
        assert scaled == pytest.approx(base, abs=1e-12)

    def test_k1_rejected(self):
        with pytest.raises(ValueError):
            pair_contrastive(np.ones((3, 1)), np.ones((3, 1)), 1.0)


class TestConsistentContrastive:
    def test_identity_matrices_frozen_value(self):
        # denominator e^1 + e^0 - e^1 = 1 with numerator e: the written
        # formula goes negative here
        ident = np.eye(2)
        assert consistent_contrastive(ident, ident, 1.0).item() == pytest.approx(-1.0, abs=1e-12)
        assert oracle_consistent(ident, ident, 1.0) == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal_columns_enumeration_oracle(self):
        # all columns mutually orthogonal; K=3 keeps the denominator positive
        qm = np.eye(3)
        qc = np.zeros((3, 3))
        qc[0, 1], qc[1, 2], qc[2, 0] = 1.0, 1.0, 1.0  # a permutation: cross-cosines 0 or 1
        qc = np.roll(np.eye(3), 1, axis=1)
        val = consistent_contrastive(qm, qc, 1.0).item()
        assert math.isfinite(val)
        assert val == pytest.approx(oracle_consistent(qm, qc, 1.0), rel=1e-10)

    def test_matches_enumeration_oracle_on_random_inputs(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            qm = rng.random((5, 3)) + 0.01
            qc = rng.random((5, 3)) + 0.01
            tau = rng.uniform(0.5, 3.0)
            assert consistent_contrastive(qm, qc, tau).item() == pytest.approx(
                oracle_consistent(qm, qc, tau), rel=1e-10
            )

    def test_large_tau_limit(self):
        # tau -> inf: every exponential -> 1, denominator -> K - 1
        rng = np.random.default_rng(7)
        qm, qc = rng.random((6, 4)), rng.random((6, 4))
        val = consistent_contrastive(qm, qc, 1e6).item()
        assert val == pytest.approx(math.log(4 - 1), abs=1e-4)

    def test_column_scale_invariance(self):
        rng = np.random.default_rng(8)
        qm, qc = rng.random((6, 3)), rng.random((6, 3))
        base = consistent_contrastive(qm, qc, 1.0).item()
        scaled = consistent_contrastive(qm, qc * np.array([2.0, 5.0, 0.5]), 1.0).item()
        assert scaled == pytest.approx(base, abs=1e-12)

    def test_nonpositive_denominator_raises_numeric_error(self):
        # K=2 with a consistent column orthogonal to both view columns:
        # denominator 1 + 1 - e < 0, where the written formula is undefined
        qm = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        qc = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(NumericError) as exc:
            consistent_contrastive(qm, qc, 1.0)
        assert exc.value.term == "consistent_contrastive"


class TestEntropyRegularizer:
    def test_uniform_reaches_lower_bound(self):
        q = np.full((10, 3), 1.0 / 3.0)
        assert entropy_regularizer([q, q]).item() == pytest.approx(-2 * math.log(3), abs=1e-12)

    def test_single_cluster_mass_is_zero(self):
        q = np.zeros((5, 3))
        q[:, 1] = 1.0
        assert entropy_regularizer([q, q]).item() == 0.0

    def test_bounds_on_random_stochastic_matrices(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            logits = rng.standard_normal((7, 4)) * 3
            q = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
            val = entropy_regularizer([q]).item()
            assert -math.log(4) - 1e-9 <= val <= 0.0

    def test_matches_oracle(self):
        rng = np.random.default_rng(10)
        qs = [rng.random((6, 3)) for _ in range(3)]
        assert entropy_regularizer(qs).item() == pytest.approx(oracle_reg(qs), rel=1e-12)


class TestSemanticLoss:
    def test_two_view_structure(self):
        rng = np.random.default_rng(11)
        q1, q2, qc = (rng.random((6, 3)) + 0.01 for _ in range(3))
        got = semantic_loss([q1, q2], qc, 1.0).item()
        expected = 0.5 * (
            oracle_pair(q1, q2, 1.0)
            + oracle_pair(q2, q1, 1.0)
            + oracle_consistent(q1, qc, 1.0)
            + oracle_consistent(q2, qc, 1.0)
        ) + oracle_reg([q1, q2])
        assert got == pytest.approx(expected, rel=1e-10)

    def test_single_view_has_no_pair_terms(self):
        rng = np.random.default_rng(12)
        q1, qc = rng.random((5, 3)) + 0.01, rng.random((5, 3)) + 0.01
        got = semantic_loss([q1], qc, 1.0).item()
        expected = 0.5 * oracle_consistent(q1, qc, 1.0) + oracle_reg([q1])
        assert got == pytest.approx(expected, rel=1e-10)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            qs = [rng.random((4, 3)) + 0.01 for _ in range(3)]
            qc = rng.random((4, 3)) + 0.01
            tau = rng.uniform(0.5, 2.0)
            assert semantic_loss(qs, qc, tau).item() == pytest.approx(
                oracle_semantic(qs, qc, tau), rel=1e-10
            )


# ---------------------------------------------------------------------------
# information bottleneck and total
# ---------------------------------------------------------------------------


class TestIbLoss:
    def test_zero_when_fusion_matches_z_and_beta_zero(self):
        # identity fusion, eps=0, Z rows set to the view-1 codes: the view-1
        # residual vanishes and beta=0 removes the KL part
        from semvib.nn import Layer, Mlp

        model = tiny_model()
        batch = tiny_batch(model)
        config = LossConfig(beta=0.0, gamma_scale=0.0)
        model.fusion = Mlp([Layer(ad.Tensor(np.eye(3)), ad.Tensor(np.zeros(3)), "identity")])
        noise = StepNoise(eps=[np.zeros((6, 3))], gamma=[None])
        enc = encode_view(model, 0, batch.views[0], eps=noise.eps[0])
        model.Z.data[batch.indices] = enc.z.data
        batch1 = Batch(views=batch.views[:1], indices=batch.indices)
        val = ib_loss(model, batch1, config, noise=noise, encodings=[enc]).item()
        assert val == pytest.approx(0.0, abs=1e-20)

    def test_beta_zero_reduces_to_fused_error(self):
        model = tiny_model()
        batch = tiny_batch(model)
        noise = draw_step_noise(model, 6, LossConfig(), np.random.default_rng(0))
        base = ib_loss(model, batch, LossConfig(beta=0.0), noise=noise).item()
        with_kl = ib_loss(model, batch, LossConfig(beta=2.0), noise=noise).item()
        encs = [encode_view(model, m, batch.views[m], eps=noise.eps[m]) for m in range(2)]
        kl = sum(gaussian_kl(e.mu, e.sigma).item() for e in encs)
        assert with_kl == pytest.approx(base + 2.0 * kl, rel=1e-12)

    def test_matches_scalar_loop_oracle(self):
        model = tiny_model(seed=21)
        batch = tiny_batch(model, seed=22)
        config = LossConfig(beta=0.37, gamma_scale=0.2)
        noise = draw_step_noise(model, 6, config, np.random.default_rng(23))
        got = ib_loss(model, batch, config, noise=noise).item()

        expected = 0.0
        for m in range(2):
            mu = loop_mlp(model.encoders[m].mu_net, batch.views[m])
            logvar = np.clip(loop_mlp(model.encoders[m].logvar_net, batch.views[m]), -10, 10)
            sigma = np.exp(0.5 * logvar)
            z = mu + sigma * noise.eps[m]
            zhat = loop_mlp(model.fusion, z + config.gamma_scale * noise.gamma[m])
            for i in range(6):
                row = model.Z.data[batch.indices[i]]
                expected += 0.5 * sum((row[j] - zhat[i, j]) ** 2 for j in range(3)) / 6
                kl_row = 0.5 * sum(
                    mu[i, j] ** 2 + sigma[i, j] ** 2 - 1 - 2 * math.log(sigma[i, j])
                    for j in range(3)
                )
                expected += config.beta * kl_row / 6
        assert got == pytest.approx(expected, rel=1e-10)

    def test_out_of_range_indices_rejected(self):
        model = tiny_model()
        batch = Batch(views=[np.zeros((1, 4)), np.zeros((1, 5))], indices=np.array([99]))
        with pytest.raises(IndexError):
            ib_loss(model, batch, LossConfig())


class TestTotalLoss:
    def test_lambda_zero_isolates_reconstruction(self):
        model = tiny_model()
        batch = tiny_batch(model)
        config = LossConfig(lambda1=0.0, lambda2=0.0)
        noise = draw_step_noise(model, 6, config, np.random.default_rng(1))
        bd = total_loss(model, batch, config, noise=noise)
        assert bd.total == pytest.approx(bd.rec, abs=1e-15)

    def test_breakdown_identity(self):
        model = tiny_model(seed=2)
        batch = tiny_batch(model, seed=3)
        config = LossConfig(lambda1=0.7, lambda2=1.3)
        noise = draw_step_noise(model, 6, config, np.random.default_rng(4))
        bd = total_loss(model, batch, config, noise=noise)
        assert abs(bd.total - (bd.rec + 0.7 * bd.ib + 1.3 * bd.sem)) <= 1e-12

    def test_degenerate_perfect_model(self):
        # identity autoencoder on matching dims, fusion output copied into Z,
        # beta=0: rec and ib vanish, so total = lambda2 * sem
        from semvib.nn import Layer, Mlp

        model = init_model([3, 3], n_samples=4, k=3, d=3, d_c=3, seed=0)
        ident = lambda: Mlp([Layer(ad.Tensor(np.eye(3)), ad.Tensor(np.zeros(3)), "identity")])
        for m in range(2):
            model.encoders[m].mu_net = ident()
            model.decoders[m] = ident()
        model.fusion = ident()
        rng = np.random.default_rng(5)
        x = rng.standard_normal((4, 3))
        batch = Batch(views=[x, x], indices=np.arange(4))
        model.Z.data[:] = x
        config = LossConfig(beta=0.0, gamma_scale=0.0, lambda2=2.0)
        noise = StepNoise(eps=[np.zeros((4, 3))] * 2, gamma=[None, None])
        bd = total_loss(model, batch, config, noise=noise)
        assert bd.rec == pytest.approx(0.0, abs=1e-20)
        assert bd.ib == pytest.approx(0.0, abs=1e-20)
        assert bd.total == pytest.approx(2.0 * bd.sem, rel=1e-12)

    def test_sem_matches_oracle_through_model(self):
        model = tiny_model(seed=31)
        batch = tiny_batch(model, seed=32)
        config = LossConfig(tau=0.8)
        noise = draw_step_noise(model, 6, config, np.random.default_rng(33))
        bd = total_loss(model, batch, config, noise=noise)
        qs = []
        for m in range(2):
            mu = loop_mlp(model.encoders[m].mu_net, batch.views[m])
            logvar = np.clip(loop_mlp(model.encoders[m].logvar_net, batch.views[m]), -10, 10)
            z = mu + np.exp(0.5 * logvar) * noise.eps[m]
            qs.append(loop_mlp(model.semantic_heads[m], z))
        qc = loop_mlp(model.consistent_head, model.Z.data[batch.indices])
        assert bd.sem == pytest.approx(oracle_semantic(qs, qc, 0.8), rel=1e-8)
