"""サーバとの通信路

1 つの Transport が 1 台のサーバに対応する。要求・応答の送受信数を数える。
- LoopbackTransport: 同一プロセス内の ServerState を直接呼ぶ（障害注入つき）
- HttpTransport: httpx で POST /pir/query
"""

import asyncio
import logging
from dataclasses import dataclass, replace

import httpx

from config.settings import settings
from src.crypto.field import FieldVector
from src.errors import TransportError
from src.models.catalog import Catalog
from src.protocol.server import ServerState, handle_request_bytes
from src.protocol.wire import encode_response

logger = logging.getLogger(__name__)

QUERY_PATH = "/pir/query"
CATALOG_PATH = "/pir/catalog"
OCTET_STREAM = "application/octet-stream"


@dataclass(frozen=True)
class TransportReply:
    body: bytes
    vspm_seconds: float = 0.0
    multiply_seconds: float = 0.0


class Transport:
    """1 サーバへの通信路の基底クラス"""

    name: str = ""

    def __init__(self):
        self.requests_sent = 0
        self.responses_received = 0

    async def _exchange(self, request: bytes) -> TransportReply:
        raise NotImplementedError

    async def exchange(self, request: bytes) -> TransportReply:
        self.requests_sent += 1
        reply = await self._exchange(request)
        self.responses_received += 1
        return reply

    def reset_counters(self) -> None:
        self.requests_sent = 0
        self.responses_received = 0


class LoopbackTransport(Transport):
    """同一プロセス内のサーバ。down で停止、tamper で応答ワードを改ざんする。"""

    def __init__(self, state: ServerState, name: str = ""):
        super().__init__()
        self.state = state
        self.name = name or f"loopback:{state.coord}"
        self.down = False
        self.tamper: tuple[int, int] | None = None  # (ワード位置, 加える値)

    async def _exchange(self, request: bytes) -> TransportReply:
        if self.down:
            raise TransportError(f"{self.name} は停止しています")
        body, response = handle_request_bytes(self.state, request)
        if self.tamper is not None and response.ok:
            word, delta = self.tamper
            spec = self.state.spec
            values = list(response.payload.values)
            values[word] = spec.add(values[word], spec.from_int(delta))
            response = replace(response, payload=FieldVector(spec, tuple(values)))
            body = encode_response(response, spec)
        # 他のサーバ処理と交互に実行させる
        await asyncio.sleep(0)
        return TransportReply(body, response.vspm_seconds, response.multiply_seconds)


class HttpTransport(Transport):
    """HTTP で 1 台のサーバに要求を送る。client を渡せば ASGI などに差し替えられる。"""

    def __init__(
        self,
        base_url: str,
        client: httpx.AsyncClient | None = None,
        timeout: float | None = None,
    ):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.name = self.base_url
        self.client = client
        self.timeout = timeout if timeout is not None else settings.request_timeout_seconds

    async def _post(self, client: httpx.AsyncClient, request: bytes) -> httpx.Response:
        return await client.post(
            f"{self.base_url}{QUERY_PATH}",
            content=request,
            headers={"Content-Type": OCTET_STREAM},
        )

    async def _exchange(self, request: bytes) -> TransportReply:
        try:
            if self.client is not None:
                resp = await self._post(self.client, request)
            else:
                async with httpx.AsyncClient(timeout=self.timeout) as client:
                    resp = await self._post(client, request)
            resp.raise_for_status()
        except httpx.HTTPError as e:
            logger.error("Request to %s failed: %s", self.name, e)
            raise TransportError(f"{self.name}: {e}") from e
        return TransportReply(
            resp.content,
            float(resp.headers.get("X-VspM-Seconds", 0.0)),
            float(resp.headers.get("X-Multiply-Seconds", 0.0)),
        )


async def fetch_catalog(base_url: str, client: httpx.AsyncClient | None = None) -> Catalog:
    """サーバから公開カタログを取得する。"""
    url = f"{base_url.rstrip('/')}{CATALOG_PATH}"
    try:
        if client is not None:
            resp = await client.get(url)
        else:
            async with httpx.AsyncClient(timeout=settings.request_timeout_seconds) as c:
                resp = await c.get(url)
        resp.raise_for_status()
    except httpx.HTTPError as e:
        raise TransportError(f"{url}: {e}") from e
    return Catalog.model_validate(resp.json())
