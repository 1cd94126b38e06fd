import pytest
from httpx import AsyncClient


pytestmark = pytest.mark.asyncio


async def test_limit_linear_fractional(client: AsyncClient, lf_law_file):
    response = await client.post("/v1/analysis/limit", json=lf_law_file)
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["converged"] is True
    assert body["K_hat"] == pytest.approx(1.0 / 6.0, rel=1e-8)
    assert len(body["traces"]) == len(body["delta_hat_at"])


async def test_limit_with_probe_points(client: AsyncClient, lf_law_file):
    response = await client.post("/v1/analysis/limit", params={"s": [0.0, 0.5], "n_max": 50}, json=lf_law_file)
    assert response.status_code == 200, response.text
    assert [estimate["s"] for estimate in response.json()["delta_hat_at"]] == [0.0, 0.5]


async def test_analyze_supercritical(client: AsyncClient, supercritical_law_file):
    response = await client.post("/v1/analysis/analyze", json=supercritical_law_file)
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["params"]["q"] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert body["params"]["criticality"] == "supercritical"
    assert body["discrepancy"]["lf_exact"] is False
    assert body["law_echo"] == supercritical_law_file


async def test_bounds_reports_infinite_delta2(client: AsyncClient, dual_law_file):
    response = await client.post("/v1/analysis/bounds", params={"n_max": 40}, json=dual_law_file)
    assert response.status_code == 200, response.text
    bounds = response.json()["bounds"]
    assert bounds["delta2_infinite"] is True
    assert bounds["delta2"] == "Infinity"
    assert bounds["delta1"] == pytest.approx(2.0, abs=1e-10)


async def test_invariant_closed_form(client: AsyncClient, supercritical_law_file):
    response = await client.post("/v1/analysis/invariant", params={"j_max": 30}, json=supercritical_law_file)
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["measure"]["source"] == "closed_form"
    assert body["measure"]["pi"][:2] == pytest.approx([0.25, 0.25], abs=1e-12)
    assert body["conditional_limit"] is not None


async def test_qprocess(client: AsyncClient, supercritical_law_file):
    response = await client.post(
        "/v1/analysis/qprocess", params={"steps": 3, "i": 1, "seed": 42}, json=supercritical_law_file
    )
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["trajectory"]["seed"] == 42
    assert len(body["trajectory"]["states"]) == 4
    assert sum(body["row"]["probs"]) == pytest.approx(1.0, abs=1e-9)


async def test_qprocess_rejects_state_zero(client: AsyncClient, supercritical_law_file):
    response = await client.post("/v1/analysis/qprocess", params={"i": 0}, json=supercritical_law_file)
    assert response.status_code == 422


async def test_simulate(client: AsyncClient, supercritical_law_file):
    response = await client.post(
        "/v1/analysis/simulate", params={"n": 4, "reps": 5000, "seed": 9}, json=supercritical_law_file
    )
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["unconditioned"]["replicates"] == 5000
    assert body["unconditioned"]["seed"] == 9


async def test_verify_returns_ledger(client: AsyncClient, dual_law_file):
    response = await client.post("/v1/analysis/verify", json=dual_law_file)
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["passed"] is True
    names = {entry["name"] for entry in body["entries"]}
    assert {"mean_W_identity", "q_row_sums", "K_relative_discrepancy"} <= names


async def test_invalid_law_is_rejected(client: AsyncClient):
    response = await client.post("/v1/analysis/limit", json={"type": "pmf", "p": [0.5, -0.1, 0.7]})
    assert response.status_code == 422
    assert "negative" in response.json()["detail"]


async def test_unknown_law_type_is_rejected(client: AsyncClient):
    response = await client.post("/v1/analysis/limit", json={"type": "poisson", "lambda": 2.0})
    assert response.status_code == 422


async def test_critical_law_is_rejected(client: AsyncClient):
    response = await client.post("/v1/analysis/limit", json={"type": "pmf", "p": [0.5, 0.0, 0.5]})
    assert response.status_code == 422
    assert "Critical" in response.json()["detail"]


async def test_renormalize_query_flag(client: AsyncClient):
    law_file = {"type": "pmf", "p": [1.0, 0.0, 3.0]}
    rejected = await client.post("/v1/analysis/limit", params={"s": [0.0]}, json=law_file)
    assert rejected.status_code == 422
    accepted = await client.post("/v1/analysis/limit", params={"s": [0.0], "renormalize": True}, json=law_file)
    assert accepted.status_code == 200, accepted.text


@pytest.mark.parametrize(
    "law_file",
    [
        {"type": "pmf", "p": ["0.5", True, 0.25]},
        {"type": "linear_fractional", "b": 0.2, "c": "0.5"},
    ],
)
async def test_non_numeric_law_values_are_rejected(client: AsyncClient, law_file):
    response = await client.post("/v1/analysis/limit", json=law_file)
    assert response.status_code == 422


async def test_qprocess_reports_mean_estimate(client: AsyncClient, supercritical_law_file):
    response = await client.post(
        "/v1/analysis/qprocess", params={"steps": 3, "seed": 42}, json=supercritical_law_file
    )
    assert response.status_code == 200, response.text
    estimate = response.json()["mean_estimate"]
    assert estimate["exact_mean"] == pytest.approx(response.json()["moments"]["mean_W"])
    assert estimate["seed"] == 42


async def test_simulate_reports_k_trace(client: AsyncClient, supercritical_law_file):
    response = await client.post(
        "/v1/analysis/simulate", params={"n": 4, "reps": 20000, "seed": 9}, json=supercritical_law_file
    )
    assert response.status_code == 200, response.text
    assert [point["n"] for point in response.json()["k_trace"]] == [2, 4]
