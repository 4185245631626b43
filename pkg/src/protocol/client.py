"""PIR クライアント

計画済みクエリを分散し、全サーバへ 1 往復で送り、応答を補間して後処理する。
"""

import asyncio
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

from config.settings import settings
from src.analyzers.planner import QueryPlan, apply_recipe, plan_query
from src.analyzers.query import parse_query
from src.crypto.field import FieldSpec, FieldVector
from src.crypto.shamir import QueryShare, ShareConfig, reconstruct, share_k_batch
from src.errors import CorruptedResponseError, InsufficientResponsesError, ShareConfigError, TransportError, WireFormatError
from src.models.catalog import Catalog
from src.protocol.transport import Transport
from src.protocol.wire import ServerResponse, decode_response, encode_request

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    OK = "ok"
    INCONSISTENT = "inconsistent"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class IntegrityVerdict:
    """過剰決定な応答集合の整合性

    suspects は 1 点を除くと残りが 1 つの多項式に乗る座標。
    """

    verdict: Verdict
    suspects: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.OK


@dataclass
class QueryResult:
    value: Any
    components: dict
    servers_used: tuple[int, ...]
    integrity: IntegrityVerdict
    plan: QueryPlan
    timings: dict[str, float] = field(default_factory=dict)


def share_config(catalog: Catalog, t: int | None = None, servers: int | None = None) -> ShareConfig:
    """カタログの座標から ShareConfig を作る。最小座標より小さい整数はバッチ位置として予約する。

    servers を指定すると先頭の servers 台だけを使う。
    """
    t = settings.privacy_threshold if t is None else t
    spec = catalog.spec
    coords = tuple(catalog.coordinates[:servers] if servers else catalog.coordinates)
    reserved = tuple(spec.from_int(j) for j in range(min(coords)))
    return ShareConfig(spec, t, coords, reserved)


def prepare_query(plan: QueryPlan, cfg: ShareConfig, rng=None) -> list[QueryShare]:
    """各バッチ位置 j に基底ベクトルを埋め込んだシェアをサーバ座標順に作る。"""
    spec = cfg.spec
    return share_k_batch(
        plan.indices,
        cfg,
        plan.p,
        rng=rng,
        positions=[spec.from_int(j) for j in plan.positions],
        hint=plan.keyword,
        u=plan.u,
    )


def _consistent(spec: FieldSpec, points: Sequence[tuple[int, FieldVector]], degree: int) -> bool:
    base = list(points[:degree + 1])
    for x, v in points[degree + 1:]:
        if reconstruct(spec, base, x) != v:
            return False
    return True


def integrity_check(
    spec: FieldSpec,
    points: Sequence[tuple[int, FieldVector]],
    degree: int,
) -> IntegrityVerdict:
    """応答点がすべて次数 degree の 1 つの多項式に乗るかを調べる。

    degree+1 点以下では冗長性がないので INDETERMINATE。不整合なら 1 点ずつ
    除いて補間し直し、除いた残りが degree+2 点以上あって整合する座標だけを
    suspects にする。残りが degree+1 点では何でも整合するので疑わない。
    """
    points = list(points)
    if len(points) <= degree + 1:
        return IntegrityVerdict(Verdict.INDETERMINATE)
    if _consistent(spec, points, degree):
        return IntegrityVerdict(Verdict.OK)

    suspects = tuple(
        x for i, (x, _) in enumerate(points)
        if len(points) - 1 >= degree + 2
        and _consistent(spec, points[:i] + points[i + 1:], degree)
    )
    logger.warning("Inconsistent responses; suspect coordinates %s", list(suspects))
    return IntegrityVerdict(Verdict.INCONSISTENT, suspects)


def decode_responses(
    plan: QueryPlan,
    responses: Sequence[ServerResponse],
    t: int,
    spec: FieldSpec,
) -> tuple[dict[int, FieldVector], tuple[int, ...], IntegrityVerdict]:
    """正常応答を補間して位置ごとのベクトルを得る。

    Returns
    -------
    tuple
        (位置 j → 復元ベクトル, 補間に使ったサーバ座標, 整合性判定)

    Raises
    ------
    InsufficientResponsesError
        正常応答が degree+1 点に満たない
    CorruptedResponseError
        不整合で、改ざんしたサーバを 1 台に絞れない
    """
    degree = plan.degree(t)
    points = [(r.x, r.payload) for r in responses if r.ok]
    if len(points) < degree + 1:
        raise InsufficientResponsesError(
            f"正常応答が不足しています: {len(points)} < t+k+u-1={degree + 1}"
        )

    verdict = integrity_check(spec, points, degree)
    if verdict.verdict is Verdict.INCONSISTENT:
        if len(verdict.suspects) != 1:
            raise CorruptedResponseError(
                f"応答が 1 つの多項式に乗らず、改ざんしたサーバを特定できません（疑わしい座標 {list(verdict.suspects)}）"
            )
        points = [pt for pt in points if pt[0] not in verdict.suspects]

    used = points[:degree + 1]
    vectors = {j: reconstruct(spec, used, spec.from_int(j)) for j in plan.positions}
    return vectors, tuple(x for x, _ in used), verdict


async def _collect(
    transport: Transport,
    request: bytes,
    expected_x: int,
    spec: FieldSpec,
) -> ServerResponse | None:
    try:
        reply = await transport.exchange(request)
        response = decode_response(reply.body, spec)
    except (TransportError, WireFormatError) as e:
        logger.warning("No usable response from %s: %s", transport.name, e)
        return None
    if response.x != expected_x:
        logger.warning("%s answered for x=%d instead of x=%d", transport.name, response.x, expected_x)
        return None
    if not response.ok:
        logger.warning("%s returned status %s", transport.name, response.status.name)
    return ServerResponse(
        x=response.x,
        status=response.status,
        payload=response.payload,
        vspm_seconds=reply.vspm_seconds,
        multiply_seconds=reply.multiply_seconds,
    )


async def client_execute(
    plan: QueryPlan,
    cfg: ShareConfig,
    servers: Sequence[Transport],
    rng=None,
) -> QueryResult:
    """1 往復でクエリを実行する。servers[i] は cfg.eval_points[i] のサーバ。"""
    if len(servers) != cfg.ell:
        raise ShareConfigError(f"サーバ数 {len(servers)} が座標数 {cfg.ell} と一致しません")
    spec = cfg.spec
    started = time.perf_counter()
    shares = prepare_query(plan, cfg, rng=rng)
    requests = [encode_request(share) for share in shares]
    shared = time.perf_counter()

    collected = await asyncio.gather(*(
        _collect(transport, request, x, spec)
        for transport, request, x in zip(servers, requests, cfg.eval_points)
    ))
    received = time.perf_counter()

    responses = [r for r in collected if r is not None]
    vectors, used, verdict = decode_responses(plan, responses, cfg.t, spec)
    value, components = apply_recipe(plan, vectors)
    finished = time.perf_counter()

    ok = [r for r in responses if r.ok]
    timings = {
        "share_seconds": shared - started,
        "round_trip_seconds": received - shared,
        "vspm_seconds": max((r.vspm_seconds for r in ok), default=0.0),
        "multiply_seconds": max((r.multiply_seconds for r in ok), default=0.0),
        "decode_seconds": finished - received,
        "total_seconds": finished - started,
    }
    logger.info(
        "Decoded %s via %s using %d of %d servers",
        plan.query.describe(), plan.keyword, len(used), len(servers),
    )
    return QueryResult(value, components, used, verdict, plan, timings)


async def run_query(
    text: str,
    catalog: Catalog,
    servers: Sequence[Transport],
    t: int | None = None,
    rng=None,
) -> QueryResult:
    """クエリ文字列を解析・計画して実行する。servers[i] は catalog.coordinates[i] のサーバ。"""
    cfg = share_config(catalog, t, len(servers))
    plan = plan_query(parse_query(text), catalog, cfg.t)
    return await client_execute(plan, cfg, servers, rng=rng)
