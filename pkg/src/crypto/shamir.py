"""ベクトルの成分ごと (t+1, ℓ) しきい値 Shamir 分散とラグランジュ復元

秘密は任意の x 座標（バッチ位置 0..k-1）に埋め込む。制約点と t 個の乱数アンカー点を
通るラグランジュ形で多項式を作るので、連立方程式を解く必要はない。
"""

import logging
import secrets
from dataclasses import dataclass
from typing import Sequence

from src.crypto.field import FieldSpec, FieldVector
from src.errors import (
    CoordinateError,
    DimensionError,
    InterpolationError,
    ShareConfigError,
)

logger = logging.getLogger(__name__)

_SYSTEM_RNG = secrets.SystemRandom()


@dataclass(frozen=True)
class ShareConfig:
    """サーバ構成としきい値

    Attributes
    ----------
    spec : FieldSpec
        演算する体。
    t : int
        プライバシーしきい値（結託を許すサーバ数）。
    eval_points : tuple[int, ...]
        サーバ座標 x_1..x_ℓ（体の元の整数表現）。
    reserved_points : tuple[int, ...]
        バッチ位置として予約された座標。評価点と交わってはならない。
    """

    spec: FieldSpec
    t: int
    eval_points: tuple[int, ...]
    reserved_points: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.t < 0:
            raise ShareConfigError(f"しきい値 t は 0 以上です: {self.t}")
        if not self.eval_points:
            raise ShareConfigError("サーバ座標が空です")
        if len(set(self.eval_points)) != len(self.eval_points):
            raise CoordinateError(f"サーバ座標が重複しています: {self.eval_points}")
        if 0 in self.eval_points:
            raise CoordinateError("サーバ座標に 0 は使えません")
        collision = set(self.eval_points) & set(self.reserved_points)
        if collision:
            raise CoordinateError(f"サーバ座標が予約点と衝突しています: {sorted(collision)}")

    @property
    def ell(self) -> int:
        return len(self.eval_points)

    @classmethod
    def default(cls, spec: FieldSpec, t: int, ell: int, reserved: int = 1) -> "ShareConfig":
        """予約点 0..reserved-1 を避けた最小の整数 reserved..reserved+ℓ-1 を座標にする。"""
        points = tuple(spec.from_int(reserved + i) for i in range(ell))
        reserved_points = tuple(spec.from_int(j) for j in range(reserved))
        return cls(spec, t, points, reserved_points)

    def with_reserved(self, reserved_points: Sequence[int]) -> "ShareConfig":
        return ShareConfig(self.spec, self.t, self.eval_points, tuple(reserved_points))

    def require(self, k: int, u: int) -> None:
        """k バッチクエリ × u バッチ索引の復元に必要な ℓ >= t+k+u-1 を確認する。"""
        needed = self.t + k + u - 1
        if self.ell < needed:
            raise ShareConfigError(
                f"サーバ数が不足しています: ℓ={self.ell} < t+k+u-1={needed}"
            )


@dataclass(frozen=True)
class QueryShare:
    """1 サーバ分のクエリシェア

    hint は平文で送るキーワード（どの索引ファミリかは公開情報）。
    k はバッチ位置の数で、サーバ側の次元検査にのみ使う。
    """

    x: int
    q: FieldVector
    hint: str = ""
    k: int = 1


def lagrange_coefficients(spec: FieldSpec, xs: Sequence[int], target: int) -> list[int]:
    """Σ λ_i f(xs_i) = f(target) となる係数 λ を返す（deg f < len(xs)）。"""
    if not xs:
        raise InterpolationError("補間点がありません")
    if len(set(xs)) != len(xs):
        raise InterpolationError(f"補間点が重複しています: {list(xs)}")
    if target in xs:
        return [1 if x == target else 0 for x in xs]

    coeffs = []
    for i, xi in enumerate(xs):
        num = 1
        den = 1
        for m, xm in enumerate(xs):
            if m == i:
                continue
            num = spec.mul(num, spec.sub(target, xm))
            den = spec.mul(den, spec.sub(xi, xm))
        coeffs.append(spec.div(num, den))
    return coeffs


def _anchor_points(spec: FieldSpec, count: int, taken: set[int]) -> list[int]:
    """乱数アンカー用の座標を体の上端から取る。"""
    anchors = []
    candidate = spec.order - 1
    while len(anchors) < count:
        if candidate <= 0:
            raise ShareConfigError("体が小さすぎてアンカー点を確保できません")
        if candidate not in taken:
            anchors.append(candidate)
        candidate -= 1
    return anchors


def share_k_batch(
    indices: Sequence[int],
    cfg: ShareConfig,
    p: int,
    rng=None,
    positions: Sequence[int] | None = None,
    hint: str = "",
    u: int = 1,
) -> list[QueryShare]:
    """k 個の標準基底ベクトルを位置 0..k-1（または positions）に埋め込んで分散する。

    Parameters
    ----------
    indices : Sequence[int]
        基底ベクトルの添字（1 始まり）。positions と同じ順序。
    cfg : ShareConfig
        サーバ座標としきい値。
    p : int
        クエリベクトル長（索引の行数）。
    rng : random.Random, optional
        乱数源。省略時は secrets.SystemRandom。
    positions : Sequence[int], optional
        埋め込む x 座標。省略時は 0..k-1。
    u : int
        応答側の索引バッチ数。ℓ >= t+k+u-1 の確認に使う。

    Returns
    -------
    list[QueryShare]
        サーバ座標順のシェア。各成分 c の多項式は次数 t+k-1 以下で f_c(pos_j) = [c = indices[j]]。
    """
    spec = cfg.spec
    rng = rng or _SYSTEM_RNG
    k = len(indices)
    if k < 1:
        raise ShareConfigError("バッチ数 k は 1 以上です")
    cfg.require(k, u)
    for index in indices:
        if not 1 <= index <= p:
            raise DimensionError(f"基底ベクトルの添字が範囲外です: {index} (p={p})")

    if positions is None:
        positions = [spec.from_int(j) for j in range(k)]
    positions = list(positions)
    if len(positions) != k:
        raise ShareConfigError("positions と indices の長さが一致しません")
    if len(set(positions)) != k:
        raise InterpolationError(f"制約点が重複しています: {positions}")
    collision = set(positions) & set(cfg.eval_points)
    if collision:
        raise CoordinateError(f"埋め込み位置がサーバ座標と衝突しています: {sorted(collision)}")

    anchors = _anchor_points(spec, cfg.t, set(positions) | set(cfg.eval_points))
    nodes = positions + anchors
    # anchor_values[a][c]: アンカー a における成分 c の一様乱数値
    anchor_values = [[spec.random_int(rng) for _ in range(p)] for _ in anchors]

    shares = []
    for x in cfg.eval_points:
        lam = lagrange_coefficients(spec, nodes, x)
        values = [0] * p
        for j, index in enumerate(indices):
            values[index - 1] = spec.add(values[index - 1], lam[j])
        for a, row in enumerate(anchor_values):
            weight = lam[k + a]
            for c in range(p):
                values[c] = spec.add(values[c], spec.mul(weight, row[c]))
        shares.append(QueryShare(x=x, q=FieldVector(spec, tuple(values)), hint=hint, k=k))
    return shares


def share_basis_vector(
    index: int,
    encode_at: int,
    cfg: ShareConfig,
    p: int,
    rng=None,
    hint: str = "",
) -> list[QueryShare]:
    """e_index を x = encode_at に埋め込んだ (t+1, ℓ) しきい値シェアを作る。"""
    if cfg.reserved_points and encode_at not in cfg.reserved_points:
        raise CoordinateError(f"埋め込み位置が予約点ではありません: {encode_at}")
    return share_k_batch([index], cfg, p, rng=rng, positions=[encode_at], hint=hint)


def share_vectors(
    secrets_: Sequence[FieldVector],
    cfg: ShareConfig,
    rng=None,
    positions: Sequence[int] | None = None,
    hint: str = "",
) -> list[QueryShare]:
    """任意のベクトルを位置 0..k-1 に埋め込んで分散する（位置指定型 PIR のベースライン用）。"""
    spec = cfg.spec
    rng = rng or _SYSTEM_RNG
    k = len(secrets_)
    if k < 1:
        raise ShareConfigError("バッチ数 k は 1 以上です")
    cfg.require(k, 1)
    length = len(secrets_[0])
    if any(len(v) != length for v in secrets_):
        raise DimensionError("秘密ベクトルの長さが揃っていません")

    positions = list(positions) if positions is not None else [spec.from_int(j) for j in range(k)]
    if len(set(positions)) != k:
        raise InterpolationError(f"制約点が重複しています: {positions}")
    if set(positions) & set(cfg.eval_points):
        raise CoordinateError("埋め込み位置がサーバ座標と衝突しています")

    anchors = _anchor_points(spec, cfg.t, set(positions) | set(cfg.eval_points))
    nodes = positions + anchors
    rows = [v.values for v in secrets_]
    rows += [tuple(spec.random_int(rng) for _ in range(length)) for _ in anchors]

    shares = []
    for x in cfg.eval_points:
        lam = lagrange_coefficients(spec, nodes, x)
        values = tuple(
            spec.sum(spec.mul(lam[n], rows[n][c]) for n in range(len(nodes)) if rows[n][c])
            for c in range(length)
        )
        shares.append(QueryShare(x=x, q=FieldVector(spec, values), hint=hint, k=k))
    return shares


def reconstruct(
    spec: FieldSpec,
    points: Sequence[tuple[int, FieldVector]],
    target: int,
    degree: int | None = None,
) -> FieldVector:
    """(x, v) の組から成分ごとにラグランジュ補間し、target での値を返す。

    degree を指定した場合は degree+1 点以上を要求し、先頭 degree+1 点だけを使う。
    """
    if not points:
        raise InterpolationError("補間点がありません")
    if degree is not None:
        if len(points) < degree + 1:
            raise InterpolationError(
                f"補間点が不足しています: {len(points)} < {degree + 1}"
            )
        points = points[:degree + 1]

    xs = [x for x, _ in points]
    length = len(points[0][1])
    for _, v in points:
        if len(v) != length:
            raise InterpolationError("ベクトル長が混在しています")
        if v.spec != spec:
            raise InterpolationError("異なる体のベクトルが混在しています")

    lam = lagrange_coefficients(spec, xs, target)
    values = tuple(
        spec.sum(spec.mul(lam[i], v[c]) for i, (_, v) in enumerate(points))
        for c in range(length)
    )
    return FieldVector(spec, values)
