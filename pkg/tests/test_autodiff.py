import numpy as np
import pytest

from dcr import autodiff as ad
from dcr.errors import DomainError, ShapeMismatchError

from oracles import check_gradients, finite_difference, max_rel_error


def _rand(rng, rows, cols, low=-2.0, high=2.0, avoid_zero=False):
    values = rng.uniform(low, high, size=(rows, cols))
    if avoid_zero:
        # keep clamp inputs away from the kink at 0
        values = np.where(np.abs(values) < 1e-3, np.sign(values + 1e-12) * 0.1, values)
    return values


class TestForward:
    def test_hinge_clamp(self):
        out = ad.hinge_clamp(ad.constant([[-1.0, 2.0]]))
        assert np.array_equal(out.value, [[0.0, 2.0]])

    def test_softmax_uniform(self):
        out = ad.softmax_rows(ad.constant([[0.0, 0.0, 0.0, 0.0]]))
        assert np.allclose(out.value, 0.25)

    def test_matmul_row_sums(self):
        out = ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((3, 1))))
        assert np.array_equal(out.value, [[3.0], [3.0]])

    def test_bias_broadcast(self):
        out = ad.add(ad.constant(np.zeros((3, 2))), ad.constant([[1.0, 2.0]]))
        assert np.array_equal(out.value, [[1.0, 2.0]] * 3)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeMismatchError, match=r"\(2, 3\).*\(2, 1\)"):
            ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 1))))
        with pytest.raises(ShapeMismatchError, match=r"\(2, 2\).*\(3, 2\)"):
            ad.add(ad.constant(np.ones((2, 2))), ad.constant(np.ones((3, 2))))

    def test_log_domain_error(self):
        with pytest.raises(DomainError, match="non-positive"):
            ad.log(ad.constant([[1.0, 0.0]]))

    def test_non_finite_rejected_at_boundary(self):
        with pytest.raises(DomainError, match="NaN or Inf"):
            ad.constant([[np.nan, 1.0]])
        with pytest.raises(DomainError):
            ad.parameter([[np.inf]])

    def test_assign_keeps_shape(self):
        p = ad.parameter(np.zeros((2, 2)))
        p.assign(np.ones((2, 2)))
        assert np.array_equal(p.value, np.ones((2, 2)))
        with pytest.raises(ShapeMismatchError):
            p.assign(np.ones((2, 3)))


class TestBackward:
    def test_mean_of_square(self):
        x = ad.parameter([[1.0, 2.0]])
        grads = ad.backward(ad.mean_all(ad.square(x)))
        assert np.array_equal(grads[x], [[1.0, 2.0]])

    def test_sum_of_product(self):
        rng = np.random.default_rng(0)
        a = ad.parameter(_rand(rng, 3, 2))
        b = ad.parameter(_rand(rng, 3, 2))
        grads = ad.backward(ad.sum_all(ad.multiply(a, b)))
        assert np.array_equal(grads[a], b.value)
        assert np.array_equal(grads[b], a.value)

    def test_non_scalar_root_rejected(self):
        with pytest.raises(ShapeMismatchError, match="scalar"):
            ad.backward(ad.parameter(np.ones((2, 1))))

    def test_three_layer_mlp_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = ad.constant(_rand(rng, 4, 5))
        w1 = ad.parameter(_rand(rng, 5, 6, -0.5, 0.5))
        b1 = ad.parameter(_rand(rng, 1, 6, -0.5, 0.5))
        w2 = ad.parameter(_rand(rng, 6, 4, -0.5, 0.5))
        b2 = ad.parameter(_rand(rng, 1, 4, -0.5, 0.5))
        w3 = ad.parameter(_rand(rng, 4, 1, -0.5, 0.5))

        def build():
            h1 = ad.tanh(ad.add(ad.matmul(x, w1), b1))
            h2 = ad.relu(ad.add(ad.matmul(h1, w2), b2))
            return ad.mean_all(ad.matmul(h2, w3))

        check_gradients(build, [w1, b1, w2, b2, w3])

    def test_repeated_backward_re_zeroes(self):
        x = ad.parameter([[3.0]])
        root = ad.square(x)
        first = ad.backward(root)[x].copy()
        second = ad.backward(root)[x]
        assert np.array_equal(first, second)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = ad.parameter(_rand(rng, 3, 3))
        alpha, beta = 0.7, -1.3

        f = lambda: ad.mean_all(ad.square(x))
        g = lambda: ad.sum_all(ad.tanh(x))
        grad_f = ad.backward(f())[x]
        grad_g = ad.backward(g())[x]
        combined = ad.add(ad.scalar_multiply(f(), alpha), ad.scalar_multiply(g(), beta))
        grad_combined = ad.backward(combined)[x]
        assert np.allclose(grad_combined, alpha * grad_f + beta * grad_g, atol=1e-12)

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(11)
            x = ad.parameter(rng.uniform(-2, 2, size=(4, 4)))
            w = ad.parameter(rng.uniform(-2, 2, size=(4, 2)))
            root = ad.mean_all(ad.square(ad.tanh(ad.matmul(x, w))))
            grads = ad.backward(root)
            return root.value.copy(), grads[x].copy(), grads[w].copy()

        v1, gx1, gw1 = run()
        v2, gx2, gw2 = run()
        assert np.array_equal(v1, v2)
        assert np.array_equal(gx1, gx2)
        assert np.array_equal(gw1, gw2)

    def test_clamp_subgradient_zero_at_zero(self):
        for op in (ad.relu, ad.hinge_clamp):
            x = ad.parameter([[0.0, -1.0, 2.0]])
            grads = ad.backward(ad.sum_all(op(x)))
            assert np.array_equal(grads[x], [[0.0, 0.0, 1.0]])

    def test_grad_reverse_flips_and_scales(self):
        x = ad.parameter([[1.0], [2.0]])
        grads = ad.backward(ad.sum_all(ad.grad_reverse(x, scale=0.5)))
        assert np.array_equal(grads[x], [[-0.5], [-0.5]])
        # value is a pure identity
        assert np.array_equal(ad.grad_reverse(x, 3.0).value, x.value)


# one case per registered mathematical operation (grad_reverse excluded by design)
OP_CASES = {
    "matmul": lambda p: ad.matmul(p["a34"], p["b42"]),
    "add": lambda p: ad.add(p["a34"], p["c34"]),
    "add_bias": lambda p: ad.add(p["a34"], p["bias14"]),
    "subtract": lambda p: ad.subtract(p["a34"], p["c34"]),
    "scalar_multiply": lambda p: ad.scalar_multiply(p["a34"], -1.7),
    "multiply": lambda p: ad.multiply(p["a34"], p["c34"]),
    "square": lambda p: ad.square(p["a34"]),
    "mean_all": lambda p: p["a34"],  # reduced below
    "sum_all": lambda p: p["a34"],
    "relu": lambda p: ad.relu(p["k34"]),
    "hinge_clamp": lambda p: ad.hinge_clamp(p["k34"]),
    "tanh": lambda p: ad.tanh(p["a34"]),
    "log": lambda p: ad.log(p["pos34"]),
    "softmax_rows": lambda p: ad.softmax_rows(p["a34"]),
    "gather_rows": lambda p: ad.gather_rows(p["a34"], [2, 0, 2, 1]),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_finite_difference_every_operation(name):
    rng = np.random.default_rng(list(name.encode()))
    leaves = {
        "a34": ad.parameter(_rand(rng, 3, 4)),
        "b42": ad.parameter(_rand(rng, 4, 2)),
        "c34": ad.parameter(_rand(rng, 3, 4)),
        "bias14": ad.parameter(_rand(rng, 1, 4)),
        "k34": ad.parameter(_rand(rng, 3, 4, avoid_zero=True)),
        "pos34": ad.parameter(_rand(rng, 3, 4, low=0.1, high=2.0)),
    }

    def build():
        out = OP_CASES[name](leaves)
        if name == "mean_all":
            return ad.mean_all(out)
        if name == "sum_all":
            return ad.sum_all(out)
        # probe all output entries with distinct weights before reducing
        weights = ad.constant(np.linspace(0.5, 1.5, out.value.size).reshape(out.shape))
        return ad.sum_all(ad.multiply(out, weights))

    root = build()
    analytic = ad.backward(root)
    numeric = finite_difference(build, list(analytic))
    for leaf, num in numeric.items():
        assert max_rel_error(analytic[leaf], num) < 1e-4
