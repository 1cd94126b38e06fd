import json
from typing import AsyncGenerator

import pytest
import pytest_asyncio
from fastapi import FastAPI
from httpx import AsyncClient, ASGITransport


def init_env():
    from pathlib import Path
    import sys
    from dotenv import load_dotenv

    sys.path.append(str(Path(__file__).parent.parent))
    sys.path.append(str(Path(__file__).parent.parent / "app"))

    env_path = Path(__file__).parent / ".test_env"
    if env_path.exists():
        load_dotenv(env_path)
    else:
        raise FileNotFoundError(f".env file not found at {env_path}")


init_env()


from main import app as fastapi_app
from api.v1.services.asymptotics import derive_params
from api.v1.services.offspring import linear_fractional, validate


@pytest.fixture(scope="session")
def app() -> FastAPI:
    yield fastapi_app
    fastapi_app.dependency_overrides = {}


@pytest_asyncio.fixture(scope="function")
async def client(app: FastAPI) -> AsyncGenerator[AsyncClient, None]:
    """
    Provides an asynchronous HTTP client (httpx) for making requests to the test app.
    """
    transport = ASGITransport(app=app)
    async with AsyncClient(transport=transport, base_url="http://test") as test_client:
        yield test_client


# --- Offspring law fixtures ---


@pytest.fixture(scope="session")
def supercritical_law():
    """f(s) = 1/4 + 3 s^2 / 4: q = 1/3, beta = 1/2, gamma = 3."""
    return validate([0.25, 0.0, 0.75])


@pytest.fixture(scope="session")
def supercritical_params(supercritical_law):
    return derive_params(supercritical_law)


@pytest.fixture(scope="session")
def dual_law():
    """f(s) = 3/4 + s^2 / 4, the extinction-conditioned dual of the supercritical law."""
    return validate([0.75, 0.0, 0.25])


@pytest.fixture(scope="session")
def dual_params(dual_law):
    return derive_params(dual_law)


@pytest.fixture(scope="session")
def subcritical_law():
    return validate([0.5, 0.25, 0.25])


@pytest.fixture(scope="session")
def subcritical_params(subcritical_law):
    return derive_params(subcritical_law)


@pytest.fixture(scope="session")
def lf_law():
    """lf(b=0.2, c=0.5): q = 1, m = 0.8, gamma = 5, K = 1/6."""
    return linear_fractional(0.2, 0.5)


@pytest.fixture(scope="session")
def lf_params(lf_law):
    return derive_params(lf_law)


# --- Law file fixtures ---


@pytest.fixture(scope="function")
def lf_law_file():
    return {"type": "linear_fractional", "b": 0.2, "c": 0.5}


@pytest.fixture(scope="function")
def supercritical_law_file():
    return {"type": "pmf", "p": [0.25, 0.0, 0.75]}


@pytest.fixture(scope="function")
def dual_law_file():
    return {"type": "pmf", "p": [0.75, 0.0, 0.25]}


@pytest.fixture(scope="function")
def write_law(tmp_path):
    """Writes a law file body to a temporary path and returns the path as a string."""

    def _write(body, name: str = "law.json") -> str:
        path = tmp_path / name
        path.write_text(body if isinstance(body, str) else json.dumps(body), encoding="utf-8")
        return str(path)

    return _write
