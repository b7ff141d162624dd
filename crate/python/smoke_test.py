"""Smoke test for the ratio_mc_py extension.

Build the module first, e.g. with `maturin develop -m crates/python/Cargo.toml`,
or copy target/release/libratio_mc_py.so to ratio_mc_py.so on PYTHONPATH.
"""

import json
import math

import ratio_mc_py as rm


def main():
    target = rm.Distribution.normal_1d(0.0, 1.0)
    proposal = rm.Distribution.normal_1d(0.0, 4.0)
    assert target.dim == 1 and target.name == "gaussian"
    assert abs(target.log_pdf([0.0]) + 0.5 * math.log(2 * math.pi)) < 1e-12
    again = rm.Distribution.from_json(target.to_json())
    assert again.to_json() == target.to_json()

    ds = rm.Dataset.build(target, proposal, 2000, 2000, seed=1)
    assert (ds.n1, ds.n0, len(ds)) == (2000, 2000, 4000)

    # exact posterior: ratio is p1/p0
    oracle = rm.RatioEstimator.oracle(target, proposal, 2000, 2000)
    x = 0.7
    exact = math.exp(target.log_pdf([x]) - proposal.log_pdf([x]))
    assert abs(oracle.ratio_hat([x]) / exact - 1) < 1e-9

    samples, meta = oracle.ar_sample(proposal, 5000, seed=2, dataset=ds)
    assert len(samples) == 5000 and meta["n_accepted"] == 5000
    assert 0.4 < meta["acceptance_rate"] < 0.6
    reference = target.sample(5000, seed=3)
    stat, p = rm.ks_two_sample([s[0] for s in samples], [r[0] for r in reference])
    assert p > 0.001, (stat, p)

    chain, meta = oracle.imh_chain(proposal, 2000, seed=4)
    assert len(chain) == 2000 - 200
    resampled, proposals, weights, meta = oracle.sir_sample(proposal, 4000, 1000, seed=5, scheme="systematic")
    assert len(resampled) == 1000 and len(proposals) == len(weights) == 4000
    assert 1.0 <= rm.ess(weights) <= 4000.0
    est = oracle.is_estimate(proposal, "x0^2", 20000, seed=6)
    assert abs(est["estimate"] - 1.0) < 4 * est["std_error"] + 1e-3, est

    model, trace = rm.train(ds, json.dumps({"epochs": 20, "hidden_layers": [16], "seed": 7}))
    assert trace and model.layer_sizes == [1, 16, 1]
    assert 0.0 < model.posterior([0.0]) < 1.0
    reloaded = rm.Classifier.from_json(model.to_json())
    assert reloaded.logit([0.3]) == model.logit([0.3])
    learned = rm.RatioEstimator.from_classifier(model, ds.n0, ds.n1)
    assert learned.estimate_c(ds) > 1.0

    report = rm.two_sample_report(samples, reference, n_projections=0)
    assert report["n_tests"] == 1

    try:
        target.log_pdf([0.0, 1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("dimension mismatch not rejected")

    print("smoke test ok", rm.__version__)


if __name__ == "__main__":
    main()
