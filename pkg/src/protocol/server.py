"""PIR サーバ側の処理

キーワードで索引バケットを選び、q·Π（vspm）→ ·D（db_multiply）を返す。
サーバは例外を投げずに status で失敗を返す。
"""

import logging
import time
from dataclasses import dataclass
from typing import Mapping

from src.crypto.field import FieldSpec
from src.crypto.shamir import QueryShare
from src.errors import CoordinateError, DimensionError
from src.index.iaq import BatchedCCS, vspm
from src.models.dataset import DatabaseMatrix, db_multiply, project_essential
from src.protocol.wire import (
    ResponseStatus,
    ServerResponse,
    decode_request,
    encode_response,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServerState:
    """1 台のサーバが持つ読み取り専用の状態

    Attributes
    ----------
    buckets : Mapping[str, BatchedCCS]
        キーワード → このサーバ座標で評価したバケット。
    db : DatabaseMatrix
        レコード行列（essential なら集約対象列だけ）。
    coord : int
        サーバ座標 x_i。
    """

    buckets: Mapping[str, BatchedCCS]
    db: DatabaseMatrix
    coord: int
    spec: FieldSpec
    skip_zero_columns: bool = False
    essential: bool = False

    def __post_init__(self):
        if self.db.spec != self.spec:
            raise DimensionError(f"D の体 {self.db.spec} がサーバの体 {self.spec} と異なります")
        for keyword, bucket in self.buckets.items():
            if bucket.r != self.db.r:
                raise DimensionError(f"{keyword}: バケットの列数 {bucket.r} が r={self.db.r} と異なります")
            if bucket.x != self.coord:
                raise CoordinateError(f"{keyword}: バケット座標 {bucket.x} がサーバ座標 {self.coord} と異なります")
            if bucket.spec != self.spec:
                raise DimensionError(f"{keyword}: バケットの体が異なります")

    @classmethod
    def create(
        cls,
        buckets: Mapping[str, BatchedCCS],
        db: DatabaseMatrix,
        coord: int,
        skip_zero_columns: bool = False,
        essential: bool = False,
    ) -> "ServerState":
        if essential:
            db = project_essential(db)
        return cls(dict(buckets), db, coord, db.spec, skip_zero_columns, essential)

    @property
    def s(self) -> int:
        return self.db.s


def server_handle(state: ServerState, share: QueryShare) -> ServerResponse:
    """1 つのクエリシェアに応答する。"""
    if share.x != state.coord:
        logger.error("Share for x=%d delivered to server at x=%d", share.x, state.coord)
        return ServerResponse(x=state.coord, status=ResponseStatus.COORDINATE_ERROR)
    bucket = state.buckets.get(share.hint)
    if bucket is None:
        logger.error("Unknown keyword %r", share.hint)
        return ServerResponse(x=state.coord, status=ResponseStatus.UNKNOWN_KEYWORD)
    if len(share.q) != bucket.p or share.k < 1 or share.q.spec != state.spec:
        logger.error(
            "Dimension mismatch on %r: len(q)=%d p=%d k=%d", share.hint, len(share.q), bucket.p, share.k,
        )
        return ServerResponse(x=state.coord, status=ResponseStatus.DIMENSION_ERROR)

    started = time.perf_counter()
    aggregate = vspm(share.q, bucket, skip_zero_columns=state.skip_zero_columns)
    vspm_done = time.perf_counter()
    payload = db_multiply(aggregate, state.db)
    finished = time.perf_counter()
    return ServerResponse(
        x=state.coord,
        status=ResponseStatus.OK,
        payload=payload,
        vspm_seconds=vspm_done - started,
        multiply_seconds=finished - vspm_done,
    )


def handle_request_bytes(state: ServerState, data: bytes) -> tuple[bytes, ServerResponse]:
    """PAQ1 要求を解釈して PAQ1 応答を返す。形式エラーは WireFormatError。"""
    share = decode_request(data, state.spec)
    response = server_handle(state, share)
    return encode_response(response, state.spec), response
