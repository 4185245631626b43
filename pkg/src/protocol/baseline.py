"""位置指定型 IT-PIR（索引を使わない比較対象）

クライアントは長さ r のベクトル（レコードの基底ベクトル、または集約ベクトル）を
そのまま分散し、サーバは D との積だけを返す。
"""

import logging
import time
from typing import Sequence

from src.crypto.field import FieldVector
from src.crypto.shamir import QueryShare, ShareConfig, reconstruct, share_vectors
from src.errors import DimensionError
from src.index.iaq import AggregateVector
from src.models.dataset import DatabaseMatrix, db_multiply
from src.protocol.wire import ResponseStatus, ServerResponse

logger = logging.getLogger(__name__)


def positional_respond(db: DatabaseMatrix, share: QueryShare) -> ServerResponse:
    """サーバ側: 長さ r のシェアと D の積。"""
    if len(share.q) != db.r:
        return ServerResponse(x=share.x, status=ResponseStatus.DIMENSION_ERROR)
    started = time.perf_counter()
    payload = db_multiply(share.q, db)
    return ServerResponse(
        x=share.x,
        status=ResponseStatus.OK,
        payload=payload,
        multiply_seconds=time.perf_counter() - started,
    )


def positional_query(
    secrets_: Sequence[FieldVector],
    db: DatabaseMatrix,
    cfg: ShareConfig,
    rng=None,
) -> tuple[list[FieldVector], float]:
    """secrets_ の各ベクトル v について v·D を 1 往復で得る。

    Returns
    -------
    tuple[list[FieldVector], float]
        位置順の v·D と、サーバ 1 台あたりの最大計算時間（秒）。
    """
    for v in secrets_:
        if len(v) != db.r:
            raise DimensionError(f"ベクトル長 {len(v)} がレコード数 r={db.r} と一致しません")
    spec = cfg.spec
    shares = share_vectors(secrets_, cfg, rng=rng)
    responses = [positional_respond(db, share) for share in shares]
    degree = cfg.t + len(secrets_) - 1
    points = [(r.x, r.payload) for r in responses[:degree + 1]]
    results = [reconstruct(spec, points, spec.from_int(j)) for j in range(len(secrets_))]
    server_seconds = max(r.multiply_seconds for r in responses)
    logger.debug("Positional query of %d vectors took %.6f s per server", len(secrets_), server_seconds)
    return results, server_seconds


def fetch_records(
    record_numbers: Sequence[int],
    db: DatabaseMatrix,
    cfg: ShareConfig,
    rng=None,
) -> list[FieldVector]:
    """レコード番号（1 始まり）の行 D_i をそのまま取り出す。"""
    spec = db.spec
    basis = [FieldVector.basis(spec, db.r, i) for i in record_numbers]
    rows, _ = positional_query(basis, db, cfg, rng=rng)
    return rows


def aggregate_positionally(
    vector: AggregateVector,
    db: DatabaseMatrix,
    cfg: ShareConfig,
    rng=None,
) -> tuple[FieldVector, float]:
    """集約ベクトル v を長さ r のまま分散して v·D を得る（索引を使う場合と同じ結果）。"""
    (result,), seconds = positional_query([vector.to_vector(db.spec)], db, cfg, rng=rng)
    return result, seconds
