"""PIR サーバの HTTP エンドポイント"""

import logging

from fastapi import APIRouter, HTTPException, Request, Response

from src.errors import WireFormatError
from src.protocol.server import handle_request_bytes
from src.protocol.transport import CATALOG_PATH, OCTET_STREAM, QUERY_PATH

router = APIRouter()
logger = logging.getLogger(__name__)


def _server(request: Request):
    state = getattr(request.app.state, "server", None)
    if state is None:
        raise HTTPException(status_code=503, detail="Server state not loaded")
    return state


@router.post(QUERY_PATH)
async def handle_query(request: Request):
    """PAQ1 要求を受け取り PAQ1 応答を返す"""
    state = _server(request)
    body = await request.body()
    try:
        payload, response = handle_request_bytes(state, body)
    except WireFormatError as e:
        logger.error("Malformed request: %s", e)
        raise HTTPException(status_code=400, detail=str(e))

    return Response(
        content=payload,
        media_type=OCTET_STREAM,
        headers={
            "X-VspM-Seconds": f"{response.vspm_seconds:.9f}",
            "X-Multiply-Seconds": f"{response.multiply_seconds:.9f}",
        },
    )


@router.get(CATALOG_PATH)
async def get_catalog(request: Request):
    """公開カタログ"""
    catalog = getattr(request.app.state, "catalog", None)
    if catalog is None:
        raise HTTPException(status_code=503, detail="Catalog not loaded")
    return catalog.model_dump(mode="json", exclude_none=True)
