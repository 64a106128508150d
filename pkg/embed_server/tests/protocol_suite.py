"""Wire-protocol conformance checks for an embedding service.

Written against plain HTTP so the same suite runs against any server
that claims to implement the protocol (the built-in mock or a real
model server). Callers provide the base URL.
"""

from __future__ import annotations

import requests


def check_health_shape(base_url: str) -> None:
    response = requests.get(base_url + "/health", timeout=10)
    assert response.status_code == 200
    payload = response.json()
    assert payload["status"] == "ok"
    assert payload["dim"] == 512
    assert isinstance(payload["model"], str) and payload["model"]


def check_embed_contract(base_url: str) -> None:
    response = requests.post(
        base_url + "/embed", json={"texts": ["hello", "world", "hello"]}, timeout=10
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["dim"] == 512
    assert isinstance(payload["model"], str)
    vectors = payload["vectors"]
    assert len(vectors) == 3
    assert all(len(v) == 512 for v in vectors)
    assert vectors[0] == vectors[2], "same text must embed identically"


def check_order_preserved(base_url: str) -> None:
    texts = ["alpha", "beta", "gamma", "delta"]
    response = requests.post(base_url + "/embed", json={"texts": texts}, timeout=10)
    batch = response.json()["vectors"]
    singles = []
    for text in texts:
        single = requests.post(
            base_url + "/embed", json={"texts": [text]}, timeout=10
        ).json()["vectors"][0]
        singles.append(single)
    assert batch == singles


def check_empty_rejected(base_url: str) -> None:
    response = requests.post(base_url + "/embed", json={"texts": []}, timeout=10)
    assert response.status_code == 400


def check_oversize_rejected(base_url: str) -> None:
    response = requests.post(
        base_url + "/embed", json={"texts": ["x"] * 300}, timeout=10
    )
    assert response.status_code == 413


def check_malformed_rejected(base_url: str) -> None:
    response = requests.post(base_url + "/embed", json={"nope": 1}, timeout=10)
    assert response.status_code == 400


def run_conformance_suite(base_url: str) -> list[str]:
    """Run every check; returns the list of passed check names."""
    checks = [
        check_health_shape,
        check_embed_contract,
        check_order_preserved,
        check_empty_rejected,
        check_oversize_rejected,
        check_malformed_rejected,
    ]
    passed = []
    for check in checks:
        check(base_url)
        passed.append(check.__name__)
    return passed
