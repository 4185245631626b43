"""HTTP エンドポイント（ASGI 上で httpx を使う）"""

import sys
from pathlib import Path

import httpx
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import src.main
from src.crypto.field import FieldVector
from src.crypto.shamir import QueryShare
from src.errors import TransportError
from src.main import create_app
from src.protocol.client import run_query
from src.protocol.transport import HttpTransport, fetch_catalog
from src.protocol.wire import ResponseStatus, decode_response, encode_request
from tests.helpers import PRIME, sample_deployment

DEPLOYMENT = sample_deployment()


def _client(i: int) -> httpx.AsyncClient:
    app = create_app(DEPLOYMENT.server_state(i), DEPLOYMENT.catalog)
    return httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url=f"http://server{i}")


@pytest.mark.asyncio
async def test_root_and_health():
    """ルートはサーバ座標とキーワード一覧"""
    async with _client(0) as client:
        root = (await client.get("/")).json()
        assert root["coordinate"] == DEPLOYMENT.catalog.coordinates[0]
        assert root["keywords"] == ["admission", "gender", "patient", "state"]
        assert (await client.get("/health")).json() == {"status": "ok"}


@pytest.mark.asyncio
async def test_query_endpoint():
    """PAQ1 要求に PAQ1 応答と計算時間ヘッダを返す"""
    x = DEPLOYMENT.catalog.coordinates[1]
    share = QueryShare(x=x, q=FieldVector.basis(PRIME, 4, 3), hint="patient")
    async with _client(1) as client:
        resp = await client.post(
            "/pir/query", content=encode_request(share), headers={"Content-Type": "application/octet-stream"},
        )
        assert resp.status_code == 200
        assert "X-VspM-Seconds" in resp.headers
        response = decode_response(resp.content, PRIME)
        assert response.ok and response.x == x

        unknown = QueryShare(x=x, q=FieldVector.basis(PRIME, 4, 1), hint="nope")
        resp = await client.post("/pir/query", content=encode_request(unknown))
        assert decode_response(resp.content, PRIME).status is ResponseStatus.UNKNOWN_KEYWORD

        resp = await client.post("/pir/query", content=b"garbage")
        assert resp.status_code == 400


@pytest.mark.asyncio
async def test_catalog_endpoint():
    """GET /pir/catalog から同じカタログが得られる"""
    async with _client(0) as client:
        catalog = await fetch_catalog("http://server0", client=client)
    assert catalog == DEPLOYMENT.catalog


@pytest.mark.asyncio
async def test_end_to_end_over_http():
    """4 台の HTTP サーバに対してクエリを実行する"""
    clients = [_client(i) for i in range(DEPLOYMENT.ell)]
    try:
        servers = [HttpTransport(f"http://server{i}", client=c) for i, c in enumerate(clients)]
        result = await run_query("COUNT(*) WHERE gender=Female", DEPLOYMENT.catalog, servers, t=1)
        assert result.value == 2
        assert result.timings["vspm_seconds"] >= 0
        assert all(s.requests_sent == 1 for s in servers)
    finally:
        for c in clients:
            await c.aclose()


@pytest.mark.asyncio
async def test_http_errors_become_transport_errors():
    """HTTP エラーは TransportError"""
    app = create_app(None, None)
    async with httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url="http://down") as client:
        transport = HttpTransport("http://down", client=client)
        with pytest.raises(TransportError):
            await transport.exchange(b"PAQ1")
        with pytest.raises(TransportError):
            await fetch_catalog("http://down", client=client)


@pytest.mark.asyncio
async def test_lifespan_verifies_presets(monkeypatch):
    """起動時に組み込み素数を確認する"""
    calls = []
    monkeypatch.setattr(src.main, "verify_presets", lambda: calls.append("ok"))
    app = create_app(DEPLOYMENT.server_state(0), DEPLOYMENT.catalog)
    async with app.router.lifespan_context(app):
        assert calls == ["ok"]
