"""秘密分散と補間のテスト"""

import itertools
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.crypto.field import FieldVector
from src.crypto.shamir import (
    ShareConfig,
    lagrange_coefficients,
    reconstruct,
    share_basis_vector,
    share_k_batch,
    share_vectors,
)
from src.errors import CoordinateError, DimensionError, InterpolationError, ShareConfigError
from tests.helpers import GF256, PRIME


def _points(shares):
    return [(s.x, s.q) for s in shares]


@pytest.mark.parametrize("spec", [PRIME, GF256], ids=["prime", "gf2e8"])
@pytest.mark.parametrize("t,k", [(0, 1), (1, 1), (1, 2), (2, 3)])
def test_k_batch_reconstructs_every_position(spec, t, k):
    """t+k 個のシェアから位置 0..k-1 の基底ベクトルが戻る"""
    rnd = random.Random(t * 10 + k)
    p = 5
    cfg = ShareConfig.default(spec, t, t + k + 1, reserved=k)
    indices = [rnd.randint(1, p) for _ in range(k)]
    shares = share_k_batch(indices, cfg, p, rng=rnd)
    assert [s.x for s in shares] == list(cfg.eval_points)
    assert all(s.k == k for s in shares)

    degree = t + k - 1
    for subset in itertools.combinations(_points(shares), degree + 1):
        for j, index in enumerate(indices):
            got = reconstruct(spec, list(subset), spec.from_int(j))
            assert got == FieldVector.basis(spec, p, index)


def test_custom_positions():
    """任意の予約位置に埋め込める"""
    rnd = random.Random(5)
    cfg = ShareConfig(PRIME, 1, (10, 11, 12), reserved_points=(0, 1, 2, 3))
    shares = share_k_batch([2, 2], cfg, 3, rng=rnd, positions=[1, 3])
    assert reconstruct(PRIME, _points(shares), 1) == FieldVector.basis(PRIME, 3, 2)
    assert reconstruct(PRIME, _points(shares), 3) == FieldVector.basis(PRIME, 3, 2)


def test_share_basis_vector_requires_reserved_point():
    """予約されていない位置への埋め込みは拒否する"""
    cfg = ShareConfig.default(PRIME, 1, 3, reserved=2)
    shares = share_basis_vector(1, 1, cfg, 2, rng=random.Random(0))
    assert reconstruct(PRIME, _points(shares), 1, degree=1) == FieldVector.basis(PRIME, 2, 1)
    with pytest.raises(CoordinateError):
        share_basis_vector(1, 7, cfg, 2)


def test_any_t_shares_fit_every_candidate():
    """t 個のシェアは候補ごとに異なる次数 t の多項式を与え、残りのシェアに合うのは真の秘密だけ"""
    rnd = random.Random(6)
    p, t, secret_index = 4, 2, 3
    cfg = ShareConfig.default(GF256, t, 5)
    shares = _points(share_k_batch([secret_index], cfg, p, rng=rnd))
    outside = [7, 200]
    for subset in itertools.combinations(shares, t):
        held = {x for x, _ in subset}
        rest = [(x, v) for x, v in shares if x not in held]
        seen = set()
        for candidate in range(1, p + 1):
            nodes = [(0, FieldVector.basis(GF256, p, candidate)), *subset]
            # 候補ごとの補間多項式は共有点の外で互いに異なる
            values = tuple(reconstruct(GF256, nodes, y, degree=t) for y in outside)
            assert values not in seen
            seen.add(values)
            fits = all(reconstruct(GF256, nodes, x, degree=t) == v for x, v in rest)
            assert fits == (candidate == secret_index)


def test_share_vectors_arbitrary_secrets():
    """任意ベクトルの分散（位置指定型 PIR 用）"""
    rnd = random.Random(7)
    secrets_ = [
        FieldVector(PRIME, (5, 0, 7, 1)),
        FieldVector(PRIME, (0, 9, 0, 2)),
    ]
    cfg = ShareConfig.default(PRIME, 1, 4, reserved=2)
    shares = share_vectors(secrets_, cfg, rng=rnd)
    points = _points(shares)
    assert reconstruct(PRIME, points, 0, degree=2) == secrets_[0]
    assert reconstruct(PRIME, points, 1, degree=2) == secrets_[1]

    with pytest.raises(DimensionError):
        share_vectors([secrets_[0], FieldVector(PRIME, (1,))], cfg)


def test_lagrange_coefficients_reproduce_polynomial():
    """f(x) = 3 + 2x + x^2 を 3 点から 0 と 7 で評価する"""
    spec = PRIME
    f = lambda x: (3 + 2 * x + x * x) % spec.modulus  # noqa: E731
    xs = [1, 2, 5]
    for target in (0, 7, 2):
        lam = lagrange_coefficients(spec, xs, target)
        assert spec.sum(spec.mul(c, f(x)) for c, x in zip(lam, xs)) == f(target)


def test_interpolation_errors():
    """重複点・点不足・異なる体は InterpolationError"""
    v = FieldVector(PRIME, (1,))
    with pytest.raises(InterpolationError):
        lagrange_coefficients(PRIME, [1, 1], 0)
    with pytest.raises(InterpolationError):
        reconstruct(PRIME, [(1, v)], 0, degree=1)
    with pytest.raises(InterpolationError):
        reconstruct(PRIME, [], 0)
    with pytest.raises(InterpolationError):
        reconstruct(PRIME, [(1, v), (2, FieldVector(GF256, (1,)))], 0)


def test_config_validation():
    """座標の重複・0・予約点との衝突、サーバ不足を検出する"""
    with pytest.raises(CoordinateError):
        ShareConfig(PRIME, 1, (1, 1))
    with pytest.raises(CoordinateError):
        ShareConfig(PRIME, 1, (0, 2))
    with pytest.raises(CoordinateError):
        ShareConfig(PRIME, 1, (1, 2), reserved_points=(0, 1))
    with pytest.raises(ShareConfigError):
        ShareConfig(PRIME, -1, (1, 2))

    cfg = ShareConfig.default(PRIME, 1, 3)
    cfg.require(k=1, u=2)
    with pytest.raises(ShareConfigError):
        cfg.require(k=2, u=2)
    with pytest.raises(ShareConfigError):
        share_k_batch([1, 2, 1], cfg, 3)


def test_share_argument_validation():
    """添字の範囲外と、埋め込み位置のサーバ座標との衝突"""
    cfg = ShareConfig.default(PRIME, 1, 3, reserved=2)
    with pytest.raises(DimensionError):
        share_k_batch([4], cfg, 3)
    with pytest.raises(CoordinateError):
        share_k_batch([1], cfg, 3, positions=[cfg.eval_points[0]])
    with pytest.raises(InterpolationError):
        share_k_batch([1, 2], cfg, 3, positions=[0, 0])
