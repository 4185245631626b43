"""u バッチ索引の構築と復元

u 個の単純索引 Π_0..Π_{u-1} を成分ごとに x=0..u-1 で補間し、
各サーバ座標 x_i で評価した行列をバケットとして配る。
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Sequence

from src.crypto.field import FieldSpec
from src.crypto.shamir import lagrange_coefficients
from src.errors import CoordinateError, CorruptedBucketError, DimensionError, InterpolationError
from src.index.iaq import CCS, BatchedCCS, SimpleIAQ

logger = logging.getLogger(__name__)


@dataclass
class BatchTiming:
    seconds: float = 0.0


@contextmanager
def batching_timer():
    """バッチ化にかかった時間を計測する。"""
    timing = BatchTiming()
    start = time.perf_counter()
    try:
        yield timing
    finally:
        timing.seconds = time.perf_counter() - start


def _check_inputs(indexes: Sequence[SimpleIAQ], coords: Sequence[int], spec: FieldSpec) -> None:
    if not indexes:
        raise DimensionError("バッチ化する索引がありません")
    first = indexes[0]
    for idx in indexes[1:]:
        if (idx.p, idx.r) != (first.p, first.r):
            raise DimensionError(
                f"索引の次元が一致しません: {first.p}x{first.r} と {idx.p}x{idx.r}"
            )
        if idx.row_labels != first.row_labels:
            raise DimensionError(f"行ラベルが一致しません: {first.label} と {idx.label}")
    if not coords:
        raise CoordinateError("サーバ座標がありません")
    if len(set(coords)) != len(coords):
        raise CoordinateError(f"サーバ座標が重複しています: {list(coords)}")
    reserved = {spec.from_int(j) for j in range(len(indexes))}
    collision = reserved & set(coords)
    if collision:
        raise CoordinateError(f"サーバ座標がバッチ位置と衝突しています: {sorted(collision)}")


def _column_patterns(indexes: Sequence[SimpleIAQ], c: int) -> list[tuple[int, int]]:
    """列 c で少なくとも 1 つの索引が 1 を持つ行と、その (0,1) パターンのビット表現。"""
    bits: dict[int, int] = {}
    for j, idx in enumerate(indexes):
        storage = idx.storage
        for i in range(storage.col_ptr[c], storage.col_ptr[c + 1]):
            row = storage.row_idx[i]
            bits[row] = bits.get(row, 0) | (1 << j)
    return sorted(bits.items())


def _batch_columns(
    indexes: Sequence[SimpleIAQ],
    columns: range,
    pattern_values,
    n_coords: int,
) -> list[list[list[tuple[int, int]]]]:
    """columns の各列について、座標ごとの (行, 値) を返す。"""
    out = []
    for c in columns:
        per_coord: list[list[tuple[int, int]]] = [[] for _ in range(n_coords)]
        for row, pattern in _column_patterns(indexes, c):
            values = pattern_values(pattern)
            for i, v in enumerate(values):
                if v:
                    per_coord[i].append((row, v))
        out.append(per_coord)
    return out


def batch_indexes(
    indexes: Sequence[SimpleIAQ],
    coords: Sequence[int],
    spec: FieldSpec,
    keyword: str = "",
    workers: int = 1,
) -> list[BatchedCCS]:
    """u 個の単純索引を u バッチ索引のバケット（サーバ座標ごと）にする。

    Parameters
    ----------
    indexes : Sequence[SimpleIAQ]
        同じ p×r の単純索引。位置 j の索引が x=j に符号化される。
    coords : Sequence[int]
        サーバ座標 x_1..x_ℓ。{0..u-1} と交わってはならない。
    spec : FieldSpec
        バケットの値を表す体。
    workers : int
        列を分割して処理するスレッド数。結果は分割によらず同じ。

    Returns
    -------
    list[BatchedCCS]
        coords と同じ順のバケット。全索引で 0 の成分は構造的な零のまま。
    """
    _check_inputs(indexes, coords, spec)
    u = len(indexes)
    first = indexes[0]
    p, r = first.p, first.r
    family_labels = tuple(idx.label for idx in indexes)

    if u >= 2 and all(idx.storage == first.storage for idx in indexes[1:]):
        logger.warning("All %d indexes batched under %r are identical", u, keyword)

    nodes = [spec.from_int(j) for j in range(u)]
    # lam[i][j]: 位置 j の値が座標 i の評価値に寄与する係数
    lam = [lagrange_coefficients(spec, nodes, x) for x in coords]
    cache: dict[int, tuple[int, ...]] = {}

    def pattern_values(pattern: int) -> tuple[int, ...]:
        values = cache.get(pattern)
        if values is None:
            ones = [j for j in range(u) if pattern >> j & 1]
            values = tuple(spec.sum(coeffs[j] for j in ones) for coeffs in lam)
            cache[pattern] = values
        return values

    workers = max(1, min(workers, r or 1))
    chunk = -(-r // workers) if r else 0
    partitions = [range(start, min(start + chunk, r)) for start in range(0, r, chunk or 1)]
    if workers == 1 or len(partitions) <= 1:
        results = [_batch_columns(indexes, rng, pattern_values, len(coords)) for rng in partitions]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda rng: _batch_columns(indexes, rng, pattern_values, len(coords)),
                partitions,
            ))

    buckets = []
    for i, x in enumerate(coords):
        col_ptr = [0]
        row_idx: list[int] = []
        values: list[int] = []
        for part in results:
            for per_coord in part:
                for row, v in per_coord[i]:
                    row_idx.append(row)
                    values.append(v)
                col_ptr.append(len(row_idx))
        buckets.append(BatchedCCS(
            storage=CCS(p, r, tuple(col_ptr), tuple(row_idx), tuple(values)),
            spec=spec,
            x=x,
            u=u,
            family_labels=family_labels,
            row_labels=first.row_labels,
            keyword=keyword,
        ))

    logger.info(
        "Batched %d indexes (%dx%d) into %d buckets for %r", u, p, r, len(coords), keyword,
    )
    return buckets


def recover_index(buckets: Sequence[BatchedCCS], j: int) -> SimpleIAQ:
    """u 個以上のバケットから位置 j の単純索引を復元し、(0,1) 行列であることを確かめる。"""
    if not buckets:
        raise InterpolationError("バケットがありません")
    first = buckets[0]
    u = first.u
    if len(buckets) < u:
        raise InterpolationError(f"バケットが不足しています: {len(buckets)} < u={u}")
    if not 0 <= j < u:
        raise DimensionError(f"バッチ位置が範囲外です: {j} (u={u})")
    for b in buckets[1:]:
        if (b.p, b.r, b.u, b.spec) != (first.p, first.r, first.u, first.spec):
            raise DimensionError("バケットの形状または体が一致しません")

    spec = first.spec
    lam = lagrange_coefficients(spec, [b.x for b in buckets], spec.from_int(j))

    dense: dict[tuple[int, int], int] = {}
    for weight, bucket in zip(lam, buckets):
        if weight == 0:
            continue
        for row, c, v in bucket.storage.entries():
            dense[(row, c)] = spec.add(dense.get((row, c), 0), spec.mul(weight, v))

    matrix = [[0] * first.r for _ in range(first.p)]
    for (row, c), v in dense.items():
        if v not in (0, 1):
            raise CorruptedBucketError(
                f"復元した索引が (0,1) 行列になりません: 行 {row + 1} 列 {c + 1} = {v}"
            )
        matrix[row][c] = v
    return SimpleIAQ.from_dense(matrix, first.row_labels or None, first.family_labels[j])
