import numpy as np
import pytest

from seisdecon import nn
from seisdecon.errors import InvalidArgumentError, InvalidStateError, NumericError
from seisdecon.nn import functional as F

from gradcheck import check_grads, weighted_sum


def naive_conv1d(x, w, b, pad):
    B, C, n = x.shape
    O, _, k = w.shape
    xp = np.zeros((B, C, n + 2 * pad))
    xp[:, :, pad:pad + n] = x
    out = np.zeros((B, O, n + 2 * pad - k + 1))
    for bi in range(B):
        for o in range(O):
            for t in range(out.shape[2]):
                s = b[o]
                for c in range(C):
                    for j in range(k):
                        s += w[o, c, j] * xp[bi, c, t + j]
                out[bi, o, t] = s
    return out


def naive_conv2d(x, w, b, pad):
    B, C, n, m = x.shape
    O, _, k, _ = w.shape
    xp = np.zeros((B, C, n + 2 * pad, m + 2 * pad))
    xp[:, :, pad:pad + n, pad:pad + m] = x
    out = np.zeros((B, O, n + 2 * pad - k + 1, m + 2 * pad - k + 1))
    for bi in range(B):
        for o in range(O):
            for t in range(out.shape[2]):
                for u in range(out.shape[3]):
                    out[bi, o, t, u] = b[o] + np.sum(w[o] * xp[bi, :, t:t + k, u:u + k])
    return out


def naive_group_norm(x, groups, scale, shift, eps):
    B, C = x.shape[:2]
    per = C // groups
    out = np.empty_like(x)
    for bi in range(B):
        for g in range(groups):
            block = x[bi, g * per:(g + 1) * per]
            mu = block.mean()
            var = ((block - mu) ** 2).mean()
            out[bi, g * per:(g + 1) * per] = (block - mu) / np.sqrt(var + eps)
    shape = (1, C) + (1,) * (x.ndim - 2)
    return out * scale.reshape(shape) + shift.reshape(shape)


class TestConv:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((2, 1, 9))
        w = np.zeros((1, 1, 3))
        w[0, 0, 1] = 1.0
        np.testing.assert_array_equal(F.conv(x, w, padding=1).data, x)

    def test_ones_kernel_counts_window(self):
        out = F.conv(np.ones((1, 1, 5)), np.ones((1, 1, 3)), padding=1).data
        np.testing.assert_array_equal(out[0, 0], [2, 3, 3, 3, 2])

    def test_ones_kernel_2d(self):
        out = F.conv(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), padding=1).data
        np.testing.assert_array_equal(out[0, 0], [[4, 6, 4], [6, 9, 6], [4, 6, 4]])

    def test_matches_loop_1d(self, rng):
        x = rng.standard_normal((3, 2, 11))
        w = rng.standard_normal((4, 2, 5))
        b = rng.standard_normal(4)
        np.testing.assert_allclose(F.conv(x, w, b, padding=2).data,
                                   naive_conv1d(x, w, b, 2), atol=1e-12)

    def test_matches_loop_2d(self, rng):
        x = rng.standard_normal((2, 3, 7, 6))
        w = rng.standard_normal((2, 3, 3, 3))
        b = rng.standard_normal(2)
        np.testing.assert_allclose(F.conv(x, w, b, padding=1).data,
                                   naive_conv2d(x, w, b, 1), atol=1e-12)

    def test_channel_mismatch(self, rng):
        with pytest.raises(InvalidArgumentError):
            F.conv(rng.standard_normal((1, 2, 8)), rng.standard_normal((1, 3, 3)))

    def test_gradients_1d(self, rng):
        x = nn.Tensor(rng.standard_normal((2, 2, 8)), requires_grad=True)
        w = nn.Tensor(rng.standard_normal((3, 2, 3)), requires_grad=True)
        b = nn.Tensor(rng.standard_normal(3), requires_grad=True)
        weights = rng.standard_normal((2, 3, 8))
        check_grads(lambda: weighted_sum(F.conv(x, w, b, padding=1), weights), [x, w, b])

    def test_gradients_2d(self, rng):
        x = nn.Tensor(rng.standard_normal((2, 2, 5, 4)), requires_grad=True)
        w = nn.Tensor(rng.standard_normal((2, 2, 3, 3)), requires_grad=True)
        b = nn.Tensor(rng.standard_normal(2), requires_grad=True)
        weights = rng.standard_normal((2, 2, 5, 4))
        check_grads(lambda: weighted_sum(F.conv(x, w, b, padding=1), weights), [x, w, b])

    def test_layer_preserves_shape(self, rng):
        for dims, shape in ((1, (2, 3, 17)), (2, (2, 3, 9, 5))):
            layer = nn.Conv(3, 6, 5, dims=dims, rng=rng)
            assert layer(rng.standard_normal(shape)).shape == (2, 6) + shape[2:]

    def test_layer_init(self, rng):
        layer = nn.Conv(4, 8, 5, rng=rng)
        assert np.abs(layer.weight.data).max() <= np.sqrt(6 / 20)
        np.testing.assert_array_equal(layer.bias.data, 0)

    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidArgumentError):
            nn.Conv(1, 1, 4)


class TestGroupNorm:
    def test_matches_loop(self, rng):
        x = rng.standard_normal((3, 8, 10)) * 3 + 1
        scale, shift = rng.standard_normal(8), rng.standard_normal(8)
        got = F.group_norm(x, 4, scale, shift, 1e-5).data
        np.testing.assert_allclose(got, naive_group_norm(x, 4, scale, shift, 1e-5), atol=1e-12)

    def test_group_statistics(self, rng):
        x = rng.standard_normal((2, 6, 4, 5)) * 5 - 2
        out = F.group_norm(x, 3).data.reshape(2, 3, -1)
        np.testing.assert_allclose(out.mean(axis=-1), 0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), 1, atol=1e-4)

    def test_constant_input_gives_shift(self):
        x = np.full((1, 2, 6), 3.7)
        out = F.group_norm(x, 1, np.array([2.0, 2.0]), np.array([0.5, -1.0])).data
        np.testing.assert_allclose(out[0, 0], 0.5)
        np.testing.assert_allclose(out[0, 1], -1.0)

    def test_gradients(self, rng):
        x = nn.Tensor(rng.standard_normal((2, 4, 6)), requires_grad=True)
        layer = nn.GroupNorm(2, 4)
        layer.scale.data = rng.standard_normal(4)
        layer.shift.data = rng.standard_normal(4)
        weights = rng.standard_normal((2, 4, 6))
        check_grads(lambda: weighted_sum(layer(x), weights), [x, layer.scale, layer.shift])

    def test_single_group_gradients(self, rng):
        x = nn.Tensor(rng.standard_normal((3, 1, 7)), requires_grad=True)
        weights = rng.standard_normal((3, 1, 7))
        check_grads(lambda: weighted_sum(F.group_norm(x, 1), weights), [x])

    def test_bad_groups(self):
        with pytest.raises(InvalidArgumentError):
            nn.GroupNorm(3, 8)


class TestElementwise:
    def test_relu(self):
        out = nn.relu(nn.Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0, 0, 2])

    def test_relu_grad_mask(self):
        x = nn.Tensor([-1.0, 0.5, 2.0], requires_grad=True)
        nn.mse_loss(nn.relu(x), np.zeros(3)).backward()
        np.testing.assert_allclose(x.grad, [0.0, 2 * 0.5 / 3, 2 * 2.0 / 3])

    def test_sigmoid_values(self):
        out = nn.sigmoid(nn.Tensor([0.0, 40.0, -40.0])).data
        assert out[0] == 0.5
        assert out[1] == pytest.approx(1.0) and out[2] == pytest.approx(0.0, abs=1e-15)

    def test_sigmoid_grad(self, rng):
        x = nn.Tensor(rng.standard_normal(5), requires_grad=True)
        weights = rng.standard_normal(5)
        check_grads(lambda: weighted_sum(nn.sigmoid(x), weights), [x])

    def test_mse(self):
        assert nn.mse_loss(nn.Tensor([1.0, 3.0]), np.array([0.0, 0.0])).item() == 5.0

    def test_linear_scalar_gradient(self):
        w = nn.Tensor(np.array(3.0), requires_grad=True)
        loss = nn.mse_loss(w * np.array(2.0), np.array(0.0))  # (2w)^2
        loss.backward()
        assert w.grad == pytest.approx(8 * 3.0)

    def test_concat_and_linear_map(self, rng):
        a = nn.Tensor(rng.standard_normal((2, 1, 6)), requires_grad=True)
        b = nn.Tensor(rng.standard_normal((2, 2, 6)), requires_grad=True)
        M = rng.standard_normal((6, 6))
        weights = rng.standard_normal((2, 3, 6))

        def loss():
            z = nn.concat([a, b], axis=1)
            return weighted_sum(nn.linear_map(z, lambda v: v @ M.T, lambda g: g @ M), weights)

        check_grads(loss, [a, b])

    def test_broadcast_grad(self, rng):
        x = nn.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        c = nn.Tensor(np.array(0.7), requires_grad=True)
        weights = rng.standard_normal((3, 4))
        check_grads(lambda: weighted_sum(x * c + c, weights), [x, c])


class TestTape:
    def test_non_scalar_backward(self, rng):
        x = nn.Tensor(rng.standard_normal(3), requires_grad=True)
        with pytest.raises(InvalidArgumentError):
            (x * 2.0).backward()

    def test_unused_parameter_zero_grad(self, rng):
        used = nn.Tensor(rng.standard_normal(3), requires_grad=True)
        unused = nn.Tensor(rng.standard_normal(3), requires_grad=True)
        unused.zero_grad()
        nn.mse_loss(used, np.zeros(3)).backward()
        np.testing.assert_array_equal(unused.grad, 0)

    def test_double_backward_accumulates(self, rng):
        x = nn.Tensor(rng.standard_normal(4), requires_grad=True)
        loss = nn.mse_loss(nn.relu(x) * 3.0, np.ones(4))
        loss.backward()
        first = x.grad.copy()
        loss.backward()
        np.testing.assert_allclose(x.grad, 2 * first)

    def test_shared_subexpression(self):
        x = nn.Tensor(np.array(2.0), requires_grad=True)
        y = x * x + x  # dy/dx = 2x + 1
        nn.mse_loss(y, np.array(0.0)).backward()
        assert x.grad == pytest.approx(2 * 6.0 * 5.0)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_forward(self):
        x = nn.Tensor([1e308], requires_grad=True)
        with pytest.raises(NumericError):
            x * 10.0

    def test_no_graph_without_grad(self, rng):
        out = nn.relu(nn.Tensor(rng.standard_normal(3)))
        assert not out.requires_grad and out._parents == ()


class TestAdam:
    def test_single_step_by_hand(self):
        p = nn.Tensor(np.array([1.0, -2.0]), requires_grad=True)
        p.grad = np.array([0.5, -0.1])
        opt = nn.Adam([p], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        opt.step()
        # after bias correction m_hat = g and v_hat = g^2, so the step is lr * sign(g)
        g = np.array([0.5, -0.1])
        m_hat = (0.1 * g) / (1 - 0.9)
        v_hat = (0.001 * g * g) / (1 - 0.999)
        want = np.array([1.0, -2.0]) - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        np.testing.assert_allclose(p.data, want, rtol=1e-12)
        np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-6)

    def test_two_steps_by_hand(self):
        p = nn.Tensor(np.array([0.0]), requires_grad=True)
        opt = nn.Adam([p], lr=0.01)
        m = v = 0.0
        x = 0.0
        for t, g in enumerate((1.0, -3.0), start=1):
            p.grad = np.array([g])
            opt.step()
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            x -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert p.data[0] == pytest.approx(x, rel=1e-12)

    def test_zero_gradient_no_move(self):
        p = nn.Tensor(np.array([1.5, 2.5]), requires_grad=True)
        p.zero_grad()
        nn.Adam([p]).step()
        np.testing.assert_array_equal(p.data, [1.5, 2.5])

    def test_missing_gradient(self):
        p = nn.Tensor(np.zeros(2), requires_grad=True)
        with pytest.raises(InvalidStateError):
            nn.Adam([p]).step()

    def test_deterministic(self):
        def run():
            p = nn.Tensor(np.array([1.0, 2.0]), requires_grad=True)
            opt = nn.Adam([p], lr=0.05)
            for _ in range(5):
                p.zero_grad()
                nn.mse_loss(p, np.array([0.3, -0.4])).backward()
                opt.step()
            return p.data.copy()

        np.testing.assert_array_equal(run(), run())

    def test_state_round_trip(self):
        p = nn.Tensor(np.array([1.0]), requires_grad=True)
        opt = nn.Adam([p], lr=0.1)
        p.grad = np.array([0.3])
        opt.step()
        other = nn.Adam([nn.Tensor(np.array([1.0]), requires_grad=True)], lr=0.1)
        other.load_state(opt.state())
        assert other.t == 1
        np.testing.assert_array_equal(other.m[0], opt.m[0])

    @pytest.mark.parametrize("kw", [dict(lr=0.0), dict(beta1=1.0), dict(beta2=-0.1)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgumentError):
            nn.Adam([], **kw)
