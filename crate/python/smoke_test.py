"""Smoke test for the edlseg_py extension module.

Build and install first, e.g.:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/edlseg_py-*.whl
"""

import math
import tempfile

import edlseg_py as e


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    probs, u = e.belief_from_logits([4.0, -1.0, 0.0])
    assert close(u, 3 / 7) and close(sum(probs), 1.0), (probs, u)

    assert close(e.kl_to_prior([1.0, 1.0, 1.0]), 0.0)
    assert e.kl_to_prior([1.0, 1.0, 1.0], 0.25) > 0.0
    assert close(e.kl_weight(44_000, 40_000, 48_000, 0.15), 0.075)

    w = e.LossWeights.mse_only()
    breakdown, grad = e.total_loss([0.0] * 12, [1, 3, 2, 2], [0, 1, 2, 0], w, 1)
    assert close(breakdown.total, 5 / 6), breakdown
    assert grad == [0.0] * 12

    w = e.LossWeights.composite_default()
    breakdown, grad = e.total_loss([0.3, 1.2, -0.4, 2.0, 0.1, 0.7], [1, 3, 1, 2], [1, 2], w, 5, ramp=(2, 8))
    assert close(breakdown.kl_weight_used, 0.15 * 3 / 6), breakdown
    assert len(grad) == 6

    passed, max_err, _ = e.grad_check(trials=10, seed=1)
    assert passed and max_err <= 1e-5, max_err

    assert close(e.auprc([0.9, 0.8, 0.1], [True, True, False]), 1.0)
    assert close(e.fpr_at_95_tpr([0.5] * 4, [True, False, True, False]), 1.0)
    gt = [False, True, True, False]
    assert e.segment_metrics([0.0, 0.9, 0.9, 0.0], gt, 2, 2) == (1.0, 1.0, 1.0)
    assert close(e.ece([0.9] * 10 + [0.6] * 10, [i < 5 for i in range(10)] + [i < 6 for i in range(10)]), 0.2)

    with tempfile.TemporaryDirectory() as d:
        n_train, n_eval = e.generate_dataset(d, height=16, width=16, num_train=2, num_eval=3, radius=(2, 3), shapes=(1, 1))
        assert (n_train, n_eval) == (2, 3)
        ckpt = e.Checkpoint.zeros()
        ckpt.save(f"{d}/zero.edlc")
        ckpt = e.Checkpoint.load(f"{d}/zero.edlc")
        _, unc = ckpt.predict([0.5] * (3 * 4 * 4), 4, 4)
        assert unc == [1.0] * 16
        rows = ckpt.evaluate(d, ["uncertainty", "entropy"])
        assert [r["method"] for r in rows] == ["uncertainty", "entropy"]
        assert 0.0 < rows[0]["auprc"] < 1.0 and math.isfinite(rows[0]["ece"])

    try:
        e.LossWeights(0.0, 0.0, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("all-zero weights accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
