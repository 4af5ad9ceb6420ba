import pytest

import csi


def test_fit_recovers_four_groups():
    data = csi.simulate_k4(600, seed=4)
    model = csi.fit(data, K=4, restarts=3, seed=4)
    assert len(model["params"]["components"]) == 4
    assert len(model["labels"]) == len(data.strip().splitlines()) - 1
    trace = model["q_trace"]
    assert all(b >= a - 1e-6 * abs(a) for a, b in zip(trace, trace[1:]))
    weights = [c["weight"] for c in model["params"]["components"]]
    assert sum(weights) == pytest.approx(1.0)


def test_analytics_agree_with_each_other():
    model = csi.fit(csi.simulate_k4(400, seed=1), K=2, restarts=1, seed=1)
    occ = csi.occupancy(model, 0, 50)
    assert occ[0][0] >= 0.0
    transient = model["params"]["num_transient"]
    day0 = sum(occ[j][0] for j in range(transient))
    assert day0 == pytest.approx(1.0)
    assert all(x > 0 for x in csi.mean_los(model, 1))


def test_bad_input_raises():
    with pytest.raises(csi.ParseError):
        csi.fit("", K=2)
    with pytest.raises(ValueError):
        csi.occupancy({"schema": "nope"}, 0, 10)


def test_service_round_trip():
    svc = csi.Service()
    status, body = svc.request("GET", "/model/none")
    assert status == 404
    status, body = svc.request("POST", "/fit", {"dataset": {"synthetic": {"n": 300}}, "config": {"K": 0}})
    assert status == 400 and body["field"] == "config.K"
    status, body = svc.request("POST", "/fit", {"model_id": "a", "dataset": {"synthetic": {"n": 300, "seed": 2}},
                                                "config": {"K": 2, "restarts": 1}})
    assert status == 202
    svc.wait_idle()
    status, body = svc.request("GET", "/model/a")
    assert status == 200 and len(body["weights"]) == 2
