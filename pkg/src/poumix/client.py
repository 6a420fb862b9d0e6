"""Client for the compute service.

With no server URL the application is dispatched in-process, so commands
work without a running server while exercising the exact same endpoints.
Service-side failures are re-raised as the matching local exception types.
"""

from __future__ import annotations

import asyncio

import httpx

from .errors import (DimensionError, InputError, NumericalError, ParseError,
                     SchemaError)

_EXCEPTION_BY_TYPE = {
    "input": InputError,
    "dimension": DimensionError,
    "parse": ParseError,
    "schema": SchemaError,
    "training-abort": NumericalError,
    "numerical": NumericalError,
}


class ServiceClient:
    def __init__(self, server: str | None = None):
        self.server = server

    def _client(self) -> httpx.AsyncClient:
        if self.server:
            return httpx.AsyncClient(base_url=self.server, timeout=None)
        from .service import app
        return httpx.AsyncClient(transport=httpx.ASGITransport(app=app),
                                 base_url="http://service", timeout=None)

    async def _post_async(self, path: str, payload: dict) -> dict:
        async with self._client() as client:
            response = await client.post(path, json=payload)
        if response.status_code != 200:
            _raise_service_error(response)
        return response.json()

    def post(self, path: str, payload: dict) -> dict:
        return asyncio.run(self._post_async(path, payload))

    def fit(self, x, y, options: dict) -> dict:
        return self.post("/fit", {"data": {"x": x, "y": y}, "config": options})

    def predict(self, checkpoint: dict, x) -> dict:
        return self.post("/predict", {"checkpoint": checkpoint, "x": x})

    def converge(self, problem: str, degree: int, configs, *, train_n: int,
                 holdout_n: int, reps: int, seed: int, options: dict) -> dict:
        return self.post("/converge", {
            "problem": problem, "degree": degree,
            "configs": [list(pair) for pair in configs],
            "train_n": train_n, "holdout_n": holdout_n,
            "reps": reps, "seed": seed, "options": options,
        })

    def snapshots(self, x, snapshots, names, options: dict) -> dict:
        return self.post("/snapshots", {
            "x": x, "snapshots": snapshots, "names": names, "config": options,
        })


def _raise_service_error(response: httpx.Response) -> None:
    try:
        payload = response.json()
    except ValueError:
        raise NumericalError(
            f"service returned status {response.status_code}: {response.text[:200]}"
        ) from None
    detail = payload.get("detail", payload)
    type_name = payload.get("type")
    if type_name in _EXCEPTION_BY_TYPE:
        raise _EXCEPTION_BY_TYPE[type_name](str(detail))
    # Body validation failures arrive as structured lists from the service.
    if response.status_code < 500:
        raise InputError(f"service rejected the request: {detail}")
    raise NumericalError(f"service error {response.status_code}: {detail}")
