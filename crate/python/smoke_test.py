"""Smoke test for the pyrpinv extension module."""

import json
import math

import pyrpinv


def main() -> None:
    basis = pyrpinv.JacobiBasis(-0.5, 10)
    nodes, weights = basis.quadrature(40)
    for j in range(11):
        for k in range(11):
            g = sum(w * basis.eval(j, x) * basis.eval(k, x) for x, w in zip(nodes, weights))
            assert abs(g - (1.0 if j == k else 0.0)) < 1e-10, (j, k, g)

    x = pyrpinv.sample_beta(-0.5, 200, seed=3)
    assert x == pyrpinv.sample_beta(-0.5, 200, seed=3)
    y = [math.cos(2.0 * v) for v in x]
    model = pyrpinv.NpregModel.fit(basis, x, y)
    pred = model.predict([0.0, 0.5])
    assert abs(pred[0] - 1.0) < 1e-6 and abs(pred[1] - math.cos(1.0)) < 1e-6, pred
    assert model.report.kappa2 >= 1.0
    again = pyrpinv.NpregModel.from_json(model.to_json())
    assert again.coeffs == model.coeffs

    krr = pyrpinv.KrrModel.fit_cv(x, y, bandwidth=10.0, folds=5, seed=1)
    assert abs(krr.predict([0.0])[0] - 1.0) < 0.05

    fit = pyrpinv.lfr_simulate_fit(300, 50, 2.0, 0.0, seed=42)
    assert fit.e2 <= 1e-10, fit.e2
    assert abs(fit.cumulative_kappa - sum(fit.block_kappas)) < 1e-12

    d = json.loads(pyrpinv.diagnose(-0.5, 5, 25, seed=7))
    assert d["kappa2"] >= 1.0 and d["condition1_ok"] in (True, False)

    out = json.loads(pyrpinv.run_experiment(json.dumps({"experiment": "table4", "trials": 1, "s": 2.0, "n": 300})))
    assert len(out["rows"]) == 4

    try:
        pyrpinv.JacobiBasis(-0.9, 3)
    except pyrpinv.RpinvError:
        pass
    else:
        raise AssertionError("alpha below -1/2 accepted")
    try:
        pyrpinv.NpregModel.fit(pyrpinv.JacobiBasis(0.0, 3), [0.1, 0.1, 0.1, 0.1], [1.0, 2.0, 3.0, 4.0])
    except pyrpinv.NumericalError:
        pass
    else:
        raise AssertionError("singular design accepted")

    print("pyrpinv smoke test passed")


if __name__ == "__main__":
    main()
