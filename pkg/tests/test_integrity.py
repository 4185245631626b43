"""障害注入: 停止・改ざん・不正な要求"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.analyzers.planner import plan_query
from src.analyzers.query import parse_query
from src.crypto.field import FieldVector
from src.crypto.shamir import QueryShare
from src.errors import CorruptedResponseError, InsufficientResponsesError
from src.protocol.client import Verdict, integrity_check, prepare_query, run_query, share_config
from src.protocol.server import ServerState, server_handle
from src.protocol.wire import ResponseStatus
from tests.helpers import PRIME, run, sample_deployment, seeded

QUERY = "SUM(days) WHERE patient=3"


def test_redundant_responses_are_consistent():
    """余分な応答があり改ざんがなければ OK"""
    deployment = sample_deployment(ell=5)
    result = run(run_query(QUERY, deployment.catalog, deployment.loopback(), t=1))
    assert result.value == 21
    assert result.integrity.verdict is Verdict.OK


def test_exact_responses_are_indeterminate():
    """必要数ちょうどでは整合性を判定できない"""
    deployment = sample_deployment(ell=2)
    catalog = deployment.catalog
    servers = deployment.loopback()
    result = run(run_query(QUERY, catalog, servers, t=1))
    assert result.value == 21
    assert result.integrity.verdict is Verdict.INDETERMINATE


def test_tampered_server_is_isolated():
    """1 台の改ざんは疑わしい座標として特定され、残りで正しく復元する"""
    deployment = sample_deployment(ell=5)
    catalog = deployment.catalog
    servers = deployment.loopback()
    servers[2].tamper = (catalog.word("days"), 7)
    result = run(run_query(QUERY, catalog, servers, t=1, rng=seeded(3)))
    assert result.integrity.verdict is Verdict.INCONSISTENT
    assert result.integrity.suspects == (catalog.coordinates[2],)
    assert catalog.coordinates[2] not in result.servers_used
    assert result.value == 21


def test_down_servers_are_tolerated():
    """必要数が残っていれば停止したサーバを除いて復元する"""
    deployment = sample_deployment(ell=4)
    catalog = deployment.catalog
    servers = deployment.loopback()
    servers[0].down = True
    servers[3].down = True
    result = run(run_query(QUERY, catalog, servers, t=1))
    assert result.value == 21
    assert result.servers_used == (catalog.coordinates[1], catalog.coordinates[2])


def test_too_many_down_servers():
    """正常応答が t+k+u-1 未満なら InsufficientResponsesError"""
    deployment = sample_deployment(ell=4)
    servers = deployment.loopback()
    for s in servers[1:]:
        s.down = True
    with pytest.raises(InsufficientResponsesError):
        run(run_query(QUERY, deployment.catalog, servers, t=1))


def test_error_status_responses_are_not_used():
    """キーワード違いで失敗したサーバは応答数に数えない"""
    deployment = sample_deployment(ell=4)
    catalog = deployment.catalog
    servers = deployment.loopback()
    # gender の COUNT は 3 台必要
    servers[1].state = ServerState.create(
        {}, deployment.db, catalog.coordinates[1],
    )
    result = run(run_query("COUNT(*) WHERE gender=Female", catalog, servers, t=1))
    assert result.value == 2
    assert catalog.coordinates[1] not in result.servers_used

    servers[2].down = True
    with pytest.raises(InsufficientResponsesError):
        run(run_query("COUNT(*) WHERE gender=Female", catalog, servers, t=1))


def test_server_status_codes():
    """未知のキーワード・座標違い・次元違いは status で返す"""
    deployment = sample_deployment()
    catalog = deployment.catalog
    state = deployment.server_state(0)
    x = catalog.coordinates[0]
    q = FieldVector.zeros(PRIME, 4)

    assert server_handle(state, QueryShare(x=x, q=q, hint="nope")).status is ResponseStatus.UNKNOWN_KEYWORD
    assert server_handle(state, QueryShare(x=x + 1, q=q, hint="patient")).status is ResponseStatus.COORDINATE_ERROR
    bad = QueryShare(x=x, q=FieldVector.zeros(PRIME, 3), hint="patient")
    assert server_handle(state, bad).status is ResponseStatus.DIMENSION_ERROR
    ok = server_handle(state, QueryShare(x=x, q=q, hint="patient"))
    assert ok.ok and len(ok.payload) == catalog.s


def test_integrity_check_directly():
    """点の数と次数から OK / INDETERMINATE / INCONSISTENT を判定する"""
    deployment = sample_deployment(ell=6)
    catalog = deployment.catalog
    plan = plan_query(parse_query("MEAN(days) WHERE state=WA"), catalog, 1)
    shares = prepare_query(plan, share_config(catalog, 1), rng=seeded(9))
    points = [
        (share.x, server_handle(deployment.server_state(i), share).payload)
        for i, share in enumerate(shares)
    ]
    degree = plan.degree(1)
    assert degree == 2
    assert integrity_check(catalog.spec, points, degree).verdict is Verdict.OK
    assert integrity_check(catalog.spec, points[:3], degree).verdict is Verdict.INDETERMINATE

    x, v = points[4]
    forged = FieldVector(PRIME, tuple(PRIME.add(c, 1) for c in v.values))
    tampered = points[:4] + [(x, forged)] + points[5:]
    verdict = integrity_check(catalog.spec, tampered, degree)
    assert verdict.verdict is Verdict.INCONSISTENT
    assert verdict.suspects == (x,)


def test_tamper_with_one_spare_response_is_rejected():
    """余りが 1 点だけでは改ざんを特定できないので値を返さない"""
    deployment = sample_deployment(ell=3)
    catalog = deployment.catalog
    servers = deployment.loopback()
    servers[0].tamper = (catalog.word("days"), 7)
    with pytest.raises(CorruptedResponseError):
        run(run_query(QUERY, catalog, servers, t=1, rng=seeded(3)))


def test_one_spare_point_marks_no_suspect():
    """degree+2 点の不整合では疑わしい座標を挙げない"""
    deployment = sample_deployment(ell=3)
    catalog = deployment.catalog
    plan = plan_query(parse_query(QUERY), catalog, 1)
    shares = prepare_query(plan, share_config(catalog, 1), rng=seeded(4))
    points = [
        (share.x, server_handle(deployment.server_state(i), share).payload)
        for i, share in enumerate(shares)
    ]
    x, v = points[0]
    forged = FieldVector(PRIME, tuple(PRIME.add(c, 1) for c in v.values))
    verdict = integrity_check(catalog.spec, [(x, forged)] + points[1:], plan.degree(1))
    assert verdict.verdict is Verdict.INCONSISTENT
    assert verdict.suspects == ()


def test_two_tampered_servers_are_rejected():
    """2 台が改ざんすれば 1 台に絞れず CorruptedResponseError"""
    deployment = sample_deployment(ell=5)
    catalog = deployment.catalog
    servers = deployment.loopback()
    servers[1].tamper = (catalog.word("days"), 7)
    servers[3].tamper = (catalog.word("days"), 11)
    with pytest.raises(CorruptedResponseError):
        run(run_query(QUERY, catalog, servers, t=1, rng=seeded(5)))
