import numpy as np
import pytest

from symtensor.layer import EquivariantLayer, diagram_index
from symtensor.symidx import SymmetricTensor, multiplicities, num_indices, rank
from symtensor.train import (
    MLP,
    Dataset,
    LayerModel,
    TrainConfig,
    _mse,
    _unrolled,
    benchmark_apply,
    benchmark_csv,
    evaluate_mse,
    gen_equivariant_task,
    gen_invariant_task,
    generalisation_eval,
    init_layer,
    materialized_forward,
    mlp_baseline,
    sgd_train,
    split,
    train_task,
)


def _diag_layer():
    layer = EquivariantLayer(3, 1)
    layer.lambdas[diagram_index(layer, [(3, 1)])] = 1.0
    return layer


class TestTasks:
    def test_invariant_all_ones(self):
        # n^2 terms of value one
        assert np.einsum("biji->b", _unrolled(np.ones((1, num_indices(2, 3))), 2, 3))[0] == 4

    def test_invariant_zero(self):
        assert np.einsum("biji->b", _unrolled(np.zeros((1, num_indices(3, 3))), 3, 3))[0] == 0

    def test_invariant_target(self):
        data = gen_invariant_task(n=3, count=4, seed=1)
        for x, y in zip(data.inputs, data.targets):
            dense = SymmetricTensor(3, 3, x).to_dense()
            assert y[0] == pytest.approx(sum(dense[i, j, i] for i in range(3) for j in range(3)))

    def test_equivariant_target(self):
        data = gen_equivariant_task(n=4, count=3, seed=2)
        for x, y in zip(data.inputs, data.targets):
            np.testing.assert_array_equal(y, [x[rank((i, i, i), 4)] for i in range(1, 5)])

    def test_one_hot_diagonal(self):
        x = np.zeros(num_indices(4, 3))
        x[rank((2, 2, 2), 4)] = 3.0
        layer = _diag_layer()
        np.testing.assert_array_equal(layer.forward(x[None], 4)[0], [0, 3.0, 0, 0])

    def test_deterministic(self):
        a, b = gen_equivariant_task(5, 20, seed=7), gen_equivariant_task(5, 20, seed=7)
        np.testing.assert_array_equal(a.inputs, b.inputs)

    def test_split(self, rng):
        data = gen_equivariant_task(3, 100, 0)
        tr, te = split(data, 0.9, rng)
        assert len(tr) == 90 and len(te) == 10
        with pytest.raises(ValueError):
            split(data, 1.0, rng)


class TestModels:
    def test_mlp_parameter_counts(self):
        assert mlp_baseline((12, 3), (12, 0)).num_params == 1728
        assert mlp_baseline((8, 3), (8, 1)).num_params == 4096

    def test_mlp_zero_weights(self, rng):
        m = MLP(3, 3, 1, weights=np.zeros((3, 27)))
        data = gen_equivariant_task(3, 5, 0)
        xf, _ = m.prepare(data)
        np.testing.assert_array_equal(m.predict(xf), 0.0)

    def test_mlp_shape_checked(self):
        with pytest.raises(ValueError):
            MLP(3, 3, 1, weights=np.zeros((3, 26)))
        with pytest.raises(ValueError):
            mlp_baseline((3, 3), (4, 1))

    @pytest.mark.parametrize("model_kind", ["layer", "mlp"])
    def test_gradient_matches_loss(self, model_kind, rng):
        data = gen_equivariant_task(3, 8, 0)
        model = LayerModel(init_layer(3, 1, rng), 3) if model_kind == "layer" else MLP(3, 3, 1, rng)
        prep = model.prepare(data)
        batch, y = model.take(prep, np.arange(len(data)))
        err = model.predict(batch) - y
        g = model.grad(batch, 2.0 * err / (len(y) * model.norm))
        p = model.params
        h = 1e-6
        flat = p.reshape(-1)
        for j in rng.choice(flat.size, size=min(4, flat.size), replace=False):
            old = flat[j]
            flat[j] = old + h
            up = _mse(model, batch, y)
            flat[j] = old - h
            down = _mse(model, batch, y)
            flat[j] = old
            assert g.reshape(-1)[j] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-9)

    def test_layer_loss_uses_unrolled_entries(self, rng):
        data = gen_equivariant_task(3, 4, 0)
        model = LayerModel(init_layer(3, 1, rng), 3)
        mse = evaluate_mse(model, data)
        pred = model.layer.forward(data.inputs, 3)
        assert mse == pytest.approx(np.mean((pred - data.targets) ** 2))
        assert model.weights.tolist() == multiplicities(3, 1).tolist()


class TestTraining:
    def test_zero_targets_stay_zero(self):
        data = gen_equivariant_task(3, 50, 0)
        data = Dataset(data.inputs, np.zeros_like(data.targets), 3, 3, 1)
        model = LayerModel(EquivariantLayer(3, 1), 3)
        tr, te = split(data, 0.9, np.random.default_rng(0))
        res = sgd_train(model, tr, te, TrainConfig(epochs=3))
        assert all(row[1] == 0 and row[2] == 0 for row in res.curve)

    def test_loss_decreases(self):
        res = train_task("equivariant", "equivariant", 4, 500, TrainConfig(learning_rate=1e-3, epochs=5))
        assert res.curve[-1][1] < res.curve[0][1]
        assert res.curve_csv().splitlines()[0] == "epoch,train_mse,test_mse"
        assert len(res.curve) == 5

    def test_reproducible(self):
        cfg = TrainConfig(learning_rate=1e-3, epochs=2)
        a = train_task("invariant", "equivariant", 4, 200, cfg)
        b = train_task("invariant", "equivariant", 4, 200, cfg)
        assert a.curve == b.curve

    def test_divergence_raises(self):
        with pytest.raises(FloatingPointError):
            train_task("equivariant", "equivariant", 6, 500, TrainConfig(learning_rate=10.0, epochs=5))

    def test_fraction(self):
        res = train_task("invariant", "mlp", 3, 200, TrainConfig(learning_rate=1e-3, epochs=1), fraction=0.25)
        assert np.isfinite(res.test_mse)

    @pytest.mark.parametrize("kwargs", [{"task": "other"}, {"model": "cnn"}, {"fraction": 0.0}])
    def test_bad_arguments(self, kwargs):
        args = {"task": "invariant", "model": "mlp", "n": 3, "count": 20, "cfg": TrainConfig(epochs=1)} | kwargs
        with pytest.raises(ValueError):
            train_task(**args)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)


class TestGeneralisation:
    def test_exact_weights(self):
        res = generalisation_eval(_diag_layer(), [8, 16], count=50)
        assert res == {8: 0.0, 16: 0.0}

    def test_random_weights(self, rng):
        res = generalisation_eval(init_layer(3, 1, rng), [5, 9], count=50)
        assert all(np.isfinite(v) and v > 0 for v in res.values())


class TestBenchmark:
    def test_materialized_matches_layer(self, rng):
        layer = init_layer(3, 1, rng)
        x = rng.standard_normal((4, num_indices(4, 3)))
        np.testing.assert_allclose(materialized_forward(layer.lambdas, x, 4, 3, 1), layer.forward(x, 4), rtol=1e-10)

    def test_smoke(self):
        row = benchmark_apply(1, 1, 4, reps=2)
        assert row["kernel_s"] > 0 and row["dense_s"] > 0
        text = benchmark_csv([row])
        assert text.startswith("k,l,n,batch") and len(text.splitlines()) == 2

    def test_infeasible_dense(self):
        row = benchmark_apply(2, 1, 5, reps=1, max_dense_bytes=10)
        assert row["dense_s"] == "infeasible" and "speedup" not in row
