"""ベンチマーク

サーバ応答生成（VspM + D との積）のスループットとバッチ化時間を測り、CSV に書き出す。
絶対値ではなく傾向（単調性・比）を確認する。

実験:
- vary-r: レコード数 r を変える
- vary-p: 索引の行数 p を変える
- vary-agg: 1 行あたりの 1 の数（集約サイズ）を変える
- vary-u: バッチ化する索引の数 u とバッチ化時間
- skip-check: 全 0 列の飛ばし ON/OFF
- baseline: 索引つき PIR と位置指定型 PIR の比較
"""

import csv
import logging
import random
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from config.settings import settings
from src.collectors.synthetic import numeric_database, partition_iaq, rng_from_seed, synthetic_iaq
from src.crypto.field import FieldSpec
from src.crypto.shamir import ShareConfig, share_k_batch
from src.index.batch import batch_indexes, batching_timer
from src.index.iaq import CCS, vspm
from src.models.dataset import db_multiply

logger = logging.getLogger(__name__)

CSV_FIELDS = ["experiment", "param", "value", "mean_seconds", "throughput_qps", "nnz_pct"]
EXPERIMENTS = ("vary-r", "vary-p", "vary-agg", "vary-u", "skip-check", "baseline")

# 傾向判定の許容幅
NOISE_BAND = 0.10
SKIP_SLOWDOWN = 0.05


@dataclass(frozen=True)
class BenchRow:
    experiment: str
    param: str
    value: str
    mean_seconds: float
    throughput_qps: float
    nnz_pct: float | None = None


@dataclass(frozen=True)
class BenchOptions:
    spec: FieldSpec
    trials: int
    full: bool
    seed: int | None
    servers: int = 4
    t: int = 1


def _mean_seconds(fn: Callable[[], object], trials: int) -> float:
    samples = []
    for _ in range(trials):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.mean(samples))


def _row(experiment: str, param: str, value, seconds: float, nnz_pct: float | None = None) -> BenchRow:
    return BenchRow(
        experiment, param, str(value), seconds,
        1.0 / seconds if seconds > 0 else float("inf"), nnz_pct,
    )


def nonzero_column_pct(storage: CCS) -> float:
    """1 つでも非零要素を持つ列の割合（%）"""
    return 100.0 * len(storage.nonzero_columns) / storage.n_cols


def _powers(low: int, high: int, cap: int) -> list[int]:
    return [2 ** e for e in range(low, high + 1) if 2 ** e <= cap]


def _share(opts: BenchOptions, length: int, rnd: random.Random):
    """長さ length の実際のクエリシェア（サーバ 1 台分）"""
    cfg = ShareConfig.default(opts.spec, opts.t, opts.servers)
    return share_k_batch([1], cfg, length, rng=rnd)[0].q


def _response_seconds(opts, iaq, db, skip: bool, rnd: random.Random) -> float:
    q = _share(opts, iaq.p, rnd)
    return _mean_seconds(lambda: db_multiply(vspm(q, iaq, skip_zero_columns=skip), db), opts.trials)


def vary_r(opts: BenchOptions, values: Sequence[int] | None = None, p: int = 64) -> list[BenchRow]:
    rng = rng_from_seed(opts.seed)
    rnd = random.Random(opts.seed)
    cap = settings.bench_max_rows
    values = values or (_powers(14, 24, cap) if opts.full else _powers(10, 14, cap))
    rows = []
    for r in values:
        iaq = partition_iaq(p, r, rng)
        db = numeric_database(opts.spec, r, 4, rng)
        rows.append(_row("vary-r", "r", r, _response_seconds(opts, iaq, db, True, rnd)))
        logger.info("vary-r r=%d: %.6f s", r, rows[-1].mean_seconds)
    return rows


def vary_p(opts: BenchOptions, values: Sequence[int] | None = None, r: int = 2 ** 12) -> list[BenchRow]:
    rng = rng_from_seed(opts.seed)
    rnd = random.Random(opts.seed)
    cap = settings.bench_max_index_rows
    values = values or (_powers(10, 17, cap) if opts.full else _powers(2, 8, cap))
    db = numeric_database(opts.spec, r, 4, rng)
    rows = []
    for p in values:
        iaq = partition_iaq(p, r, rng)
        rows.append(_row("vary-p", "p", p, _response_seconds(opts, iaq, db, True, rnd)))
    return rows


def vary_agg(
    opts: BenchOptions,
    values: Sequence[int] | None = None,
    p: int = 16,
    r: int = 2 ** 12,
) -> list[BenchRow]:
    rng = rng_from_seed(opts.seed)
    rnd = random.Random(opts.seed)
    values = values or _powers(1, 9, r)
    db = numeric_database(opts.spec, r, 4, rng)
    rows = []
    for agg in values:
        iaq = synthetic_iaq(p, r, agg, rng)
        nnz_pct = 100.0 * iaq.nnz / (p * r)
        rows.append(_row("vary-agg", "agg", agg, _response_seconds(opts, iaq, db, True, rnd), nnz_pct))
    return rows


def vary_u(
    opts: BenchOptions,
    values: Sequence[int] | None = None,
    p: int = 16,
    r: int = 2 ** 12,
    agg: int = 64,
) -> list[BenchRow]:
    """u 個の索引をバッチ化する時間。nnz_pct はバケットで非零要素を持つ列の割合。"""
    rng = rng_from_seed(opts.seed)
    cap = settings.bench_max_batch
    values = values or (_powers(1, 6, cap) if opts.full else _powers(1, 4, cap))
    rows = []
    for u in values:
        indexes = [synthetic_iaq(p, r, agg, rng, label=f"i{j}") for j in range(u)]
        coords = [opts.spec.from_int(u + 1 + i) for i in range(opts.servers)]
        samples = []
        buckets = []
        for _ in range(opts.trials):
            with batching_timer() as timing:
                buckets = batch_indexes(indexes, coords, opts.spec, keyword="bench")
            samples.append(timing.seconds)
        seconds = float(np.mean(samples))
        nnz_pct = nonzero_column_pct(buckets[0].storage)
        rows.append(_row("vary-u", "u", u, seconds, nnz_pct))
        logger.info("vary-u u=%d: %.6f s (nnz %.2f%%)", u, seconds, nnz_pct)
    return rows


def skip_check(opts: BenchOptions, p: int = 16, r: int = 2 ** 12, zero_fraction: float = 0.9) -> list[BenchRow]:
    """全 0 列の多い索引で飛ばし ON/OFF を比べる。結果が異なれば AssertionError。"""
    rng = rng_from_seed(opts.seed)
    rnd = random.Random(opts.seed)
    iaq = synthetic_iaq(p, r, max(1, int(r * (1 - zero_fraction)) // 2), rng, zero_fraction=zero_fraction)
    db = numeric_database(opts.spec, r, 4, rng)
    q = _share(opts, p, rnd)
    if vspm(q, iaq, skip_zero_columns=True) != vspm(q, iaq, skip_zero_columns=False):
        raise AssertionError("全 0 列の飛ばしで結果が変わりました")
    nnz_pct = 100.0 * iaq.nnz / (p * r)
    rows = []
    for skip in (True, False):
        seconds = _mean_seconds(
            lambda: db_multiply(vspm(q, iaq, skip_zero_columns=skip), db), opts.trials,
        )
        rows.append(_row("skip-check", "skip", "on" if skip else "off", seconds, nnz_pct))
    return rows


def baseline(opts: BenchOptions, p: int = 64, r: int = 2 ** 16, agg: int = 16) -> list[BenchRow]:
    """絞り込み済みの索引（各行 agg 件）と、長さ r の位置指定クエリを比べる。"""
    rng = rng_from_seed(opts.seed)
    rnd = random.Random(opts.seed)
    r = min(r, settings.bench_max_rows)
    iaq = synthetic_iaq(p, r, agg, rng)
    db = numeric_database(opts.spec, r, 4, rng)
    nnz_pct = 100.0 * iaq.nnz / (p * r)
    iaq_seconds = _response_seconds(opts, iaq, db, True, rnd)
    positional = _share(opts, r, rnd)
    goldberg_seconds = _mean_seconds(lambda: db_multiply(positional, db), opts.trials)
    return [
        _row("baseline", "protocol", "iaq", iaq_seconds, nnz_pct),
        _row("baseline", "protocol", "goldberg", goldberg_seconds),
    ]


_RUNNERS = {
    "vary-r": vary_r,
    "vary-p": vary_p,
    "vary-agg": vary_agg,
    "vary-u": vary_u,
    "skip-check": skip_check,
    "baseline": baseline,
}


def run_experiment(name: str, opts: BenchOptions, **kwargs) -> list[BenchRow]:
    runner = _RUNNERS.get(name)
    if runner is None:
        raise ValueError(f"未知の実験です: {name} (選択肢: {', '.join(EXPERIMENTS)})")
    logger.info("Running %s (%d trials, field %s)", name, opts.trials, opts.spec.to_text())
    return runner(opts, **kwargs)


def write_csv(path: str | Path, rows: Sequence[BenchRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            record = asdict(row)
            record["nnz_pct"] = "" if row.nnz_pct is None else f"{row.nnz_pct:.4f}"
            record["mean_seconds"] = f"{row.mean_seconds:.9f}"
            record["throughput_qps"] = f"{row.throughput_qps:.3f}"
            writer.writerow(record)
    return path


def monotone_nonincreasing(values: Sequence[float], band: float = NOISE_BAND) -> bool:
    """後の値が前の値の (1+band) 倍を超えない。"""
    return all(b <= a * (1.0 + band) for a, b in zip(values, values[1:]))


def monotone_increasing(values: Sequence[float], band: float = 0.0) -> bool:
    return all(b > a * (1.0 - band) for a, b in zip(values, values[1:]))


def check_trends(rows: Sequence[BenchRow]) -> list[str]:
    """実験ごとの期待傾向を確かめ、外れたものを文字列で返す（空なら合格）。"""
    failures = []
    by_experiment: dict[str, list[BenchRow]] = {}
    for row in rows:
        by_experiment.setdefault(row.experiment, []).append(row)

    if "vary-r" in by_experiment:
        qps = [row.throughput_qps for row in by_experiment["vary-r"]]
        if not monotone_nonincreasing(qps):
            failures.append(f"vary-r: throughput is not nonincreasing {qps}")
    if "vary-agg" in by_experiment:
        qps = [row.throughput_qps for row in by_experiment["vary-agg"]]
        if not monotone_nonincreasing(qps):
            failures.append(f"vary-agg: throughput is not nonincreasing {qps}")
    if "vary-u" in by_experiment:
        seconds = [row.mean_seconds for row in by_experiment["vary-u"]]
        if not monotone_increasing(seconds):
            failures.append(f"vary-u: batch time is not increasing {seconds}")
    if "skip-check" in by_experiment:
        timing = {row.value: row.mean_seconds for row in by_experiment["skip-check"]}
        if timing["on"] > timing["off"] * (1.0 + SKIP_SLOWDOWN):
            failures.append(f"skip-check: skipping slowed the all-zero-columns case {timing}")
    if "baseline" in by_experiment:
        timing = {row.value: row.mean_seconds for row in by_experiment["baseline"]}
        if not timing["iaq"] < timing["goldberg"]:
            failures.append(f"baseline: IAQ not faster than positional query {timing}")
    for failure in failures:
        logger.warning("Trend check failed: %s", failure)
    return failures
