"""Smoke test for the qgst Python extension.

Build and install with `maturin build --release -m crates/py/Cargo.toml` and
`pip install` of the resulting wheel,
then run `python python/smoke_test.py`.
"""

import math
import os
import tempfile

import qgst


def main():
    truth = qgst.ErrorParams({"Gx": (0.1, 0.01), "Gy": (0.15, 0.01)})
    assert truth.flat() == [0.1, 0.15, 0.01, 0.01]
    assert qgst.gate_kinds(1) == ["Gx", "Gy"]

    rx = qgst.rotation_ptm("x", math.pi / 2)
    assert len(rx) == 4 and abs(rx[0][0] - 1.0) < 1e-12

    probs = qgst.circuit_probabilities("Gx@0:Gx@0", truth, 1)
    assert abs(sum(probs) - 1.0) < 1e-12
    assert qgst.circuit_probabilities("{}", truth, 1)[0] > 0.999

    ds = qgst.Dataset.simulate(1, 4, truth, 2000, seed=3)
    assert len(ds) == len(ds.circuits()) > 0
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.jsonl")
        ds.save(path)
        again = qgst.Dataset.load(path)
        assert again.counts() == ds.counts()

        fit = qgst.fit_baseline(ds, max_iters=300)
        m = qgst.metrics(fit, ds)
        assert set(m) == {"weighted-mse", "kl", "chi2", "neg-log-likelihood"}

        model = qgst.Model(1, ds.max_length, seed=0, d_model=16, n_heads=2, n_layers=1, ff_width=16, group_size=4)
        log = model.train(ds, [1, 1], seed=0)
        assert log.splitlines()[0].startswith("epoch")
        est = model.estimate(ds).to_dict()
        for eps, p in est.values():
            assert -1.0 <= eps <= 1.0 and 0.0 <= p <= 1.0
        ckpt = os.path.join(tmp, "m.json")
        model.save(ckpt)
        assert qgst.Model.load(ckpt).estimate(ds).to_dict() == est

    print("smoke test passed:", fit)


if __name__ == "__main__":
    main()
