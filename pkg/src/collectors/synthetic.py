"""合成データの生成

実データ（SNS 投稿・入院記録）の代わりに、同じ形のスキーマで乱数データを作る。
ベンチマーク用に、行数・列数・行重みを指定した単純索引も直接作れる。
"""

import json
import logging
from pathlib import Path

import numpy as np

from config.settings import settings
from src.collectors.csv_ingest import save_schema, write_records
from src.crypto.field import FieldSpec
from src.index.iaq import CCS, SimpleIAQ
from src.models.dataset import (
    ID_SUFFIX,
    Attribute,
    AttributeKind,
    DatabaseMatrix,
    Schema,
    preprocess_ids,
)

logger = logging.getLogger(__name__)

_ALPHABET = np.array(list("abcdefghijklmnopqrstuvwxyz      #@"))

# 2020-01-01 〜 2022-12-31（UTC エポック秒）
_EPOCH_FROM = 1577836800
_EPOCH_TO = 1672531199


def rng_from_seed(seed: int | None = None) -> np.random.Generator:
    return np.random.default_rng(settings.random_seed if seed is None else seed)


def twitter_schema() -> Schema:
    """投稿 5 属性。集約対象は user_id・like_count・retweeted の 3 つ。"""
    return Schema(
        attributes=[
            Attribute(name="tweet", kind=AttributeKind.TEXT, words=8),
            Attribute(name="user", kind=AttributeKind.CATEGORICAL),
            Attribute(name="like_count", kind=AttributeKind.NUMERIC),
            Attribute(name="retweet_count", kind=AttributeKind.NUMERIC),
            Attribute(name="retweeted", kind=AttributeKind.NUMERIC),
        ],
        aggregation_set=["user" + ID_SUFFIX, "like_count", "retweeted"],
    )


def mimic_schema() -> Schema:
    """入院記録 9 属性。集約対象は 4 つ。"""
    return Schema(
        attributes=[
            Attribute(name="subject", kind=AttributeKind.CATEGORICAL),
            Attribute(name="admission_type", kind=AttributeKind.CATEGORICAL,
                      categories=["EMERGENCY", "ELECTIVE", "URGENT", "NEWBORN"]),
            Attribute(name="ethnicity", kind=AttributeKind.CATEGORICAL),
            Attribute(name="insurance", kind=AttributeKind.CATEGORICAL),
            Attribute(name="admittime", kind=AttributeKind.NUMERIC, date_format="%Y-%m-%d"),
            Attribute(name="dischtime", kind=AttributeKind.NUMERIC, date_format="%Y-%m-%d"),
            Attribute(name="hospitalization_duration", kind=AttributeKind.NUMERIC),
            Attribute(name="dose_val_rx", kind=AttributeKind.NUMERIC),
            Attribute(name="drug", kind=AttributeKind.TEXT, words=4),
        ],
        aggregation_set=[
            "admission_type" + ID_SUFFIX, "admittime", "hospitalization_duration", "dose_val_rx",
        ],
    )


def _text(rng: np.random.Generator, length: int) -> str:
    return "".join(rng.choice(_ALPHABET, size=length)).strip()


def twitter_records(r: int, users: int = 100, rng: np.random.Generator | None = None) -> list[dict]:
    rng = rng or rng_from_seed()
    # 少数のユーザに投稿が偏る
    weights = 1.0 / np.arange(1, users + 1)
    user_ids = rng.choice(users, size=r, p=weights / weights.sum())
    likes = rng.geometric(0.02, size=r) - 1
    retweets = rng.geometric(0.1, size=r) - 1
    return [
        {
            "tweet": _text(rng, 20),
            "user": f"user{int(u):05d}",
            "like_count": int(like),
            "retweet_count": int(rt),
            "retweeted": int(rt > 0),
        }
        for u, like, rt in zip(user_ids, likes, retweets)
    ]


def mimic_records(r: int, patients: int = 50, rng: np.random.Generator | None = None) -> list[dict]:
    rng = rng or rng_from_seed()
    types = ["EMERGENCY", "ELECTIVE", "URGENT", "NEWBORN"]
    ethnicities = ["WHITE", "BLACK", "HISPANIC", "ASIAN", "OTHER"]
    insurances = ["Medicare", "Private", "Medicaid", "Self Pay"]
    drugs = ["Heparin", "Insulin", "Warfarin", "Furosemide", "Aspirin"]
    records = []
    for _ in range(r):
        admit = int(rng.integers(_EPOCH_FROM, _EPOCH_TO)) // 86400 * 86400
        duration = int(rng.integers(1, 30))
        records.append({
            "subject": f"{100000 + int(rng.integers(patients))}",
            "admission_type": types[int(rng.choice(4, p=[0.55, 0.25, 0.15, 0.05]))],
            "ethnicity": ethnicities[int(rng.integers(len(ethnicities)))],
            "insurance": insurances[int(rng.integers(len(insurances)))],
            "admittime": admit,
            "dischtime": admit + duration * 86400,
            "hospitalization_duration": duration,
            "dose_val_rx": int(rng.integers(0, 500)),
            "drug": drugs[int(rng.integers(len(drugs)))],
        })
    return records


def random_schema(groups: int = 2, numerics: int = 2) -> Schema:
    """テスト用の汎用スキーマ（カテゴリ g0.. と数値 n0..）。"""
    attributes = [Attribute(name=f"g{i}", kind=AttributeKind.CATEGORICAL) for i in range(groups)]
    attributes += [Attribute(name=f"n{i}", kind=AttributeKind.NUMERIC) for i in range(numerics)]
    return Schema(
        attributes=attributes,
        aggregation_set=[f"n{i}" for i in range(numerics)] + [f"g{i}{ID_SUFFIX}" for i in range(groups)],
    )


def random_records(
    schema: Schema,
    r: int,
    rng: np.random.Generator,
    cardinality: int = 4,
    value_max: int = 100,
) -> list[dict]:
    records = []
    for _ in range(r):
        rec = {}
        for a in schema.attributes:
            if a.kind is AttributeKind.CATEGORICAL:
                rec[a.name] = f"{a.name}v{int(rng.integers(cardinality))}"
            elif a.kind is AttributeKind.NUMERIC:
                rec[a.name] = int(rng.integers(0, value_max + 1))
            else:
                rec[a.name] = _text(rng, 6)
        records.append(rec)
    return records


def build_database(records: list[dict], schema: Schema, spec: FieldSpec) -> DatabaseMatrix:
    """レコードから D を作り、全カテゴリ属性に id 列を付ける。"""
    db = DatabaseMatrix.from_records(records, schema, spec)
    for a in schema.attributes:
        if a.kind is AttributeKind.CATEGORICAL:
            db, _ = preprocess_ids(db, a.name)
    return db


def random_database(
    spec: FieldSpec,
    r: int,
    rng: np.random.Generator,
    groups: int = 2,
    numerics: int = 2,
    cardinality: int = 4,
    value_max: int = 100,
) -> DatabaseMatrix:
    schema = random_schema(groups, numerics)
    return build_database(random_records(schema, r, rng, cardinality, value_max), schema, spec)


def synthetic_iaq(
    p: int,
    r: int,
    agg: int,
    rng: np.random.Generator,
    zero_fraction: float = 0.0,
    label: str = "synthetic",
) -> SimpleIAQ:
    """各行にちょうど agg 個の 1 を持つ p×r の単純索引。

    zero_fraction の割合の列はどの行からも使わない（全 0 列）。
    """
    live = max(agg, int(round(r * (1.0 - zero_fraction))))
    if agg > r:
        raise ValueError(f"行重み {agg} を r={r} の索引に置けません")
    pool = rng.permutation(r)[:live]
    cols = np.concatenate([rng.choice(pool, size=agg, replace=False) for _ in range(p)])
    rows = np.repeat(np.arange(p), agg)
    order = np.lexsort((rows, cols))
    cols, rows = cols[order], rows[order]
    col_ptr = np.concatenate([[0], np.cumsum(np.bincount(cols, minlength=r))])
    storage = CCS(p, r, tuple(int(c) for c in col_ptr), tuple(int(g) for g in rows))
    return SimpleIAQ(storage, tuple(str(g + 1) for g in range(p)), label)


def partition_iaq(p: int, r: int, rng: np.random.Generator, label: str = "partition") -> SimpleIAQ:
    """各列がちょうど 1 行に属する（group 索引と同じ形の）単純索引。"""
    rows = rng.integers(0, p, size=r)
    storage = CCS(p, r, tuple(range(r + 1)), tuple(int(g) for g in rows))
    return SimpleIAQ(storage, tuple(str(g + 1) for g in range(p)), label)


def numeric_database(spec: FieldSpec, r: int, s: int, rng: np.random.Generator, value_max: int = 1000) -> DatabaseMatrix:
    """s 個の数値列だけを持つ D（ベンチマーク用）。"""
    schema = Schema(
        attributes=[Attribute(name=f"w{i}", kind=AttributeKind.NUMERIC) for i in range(s)],
        aggregation_set=[f"w{i}" for i in range(s)],
    )
    values = rng.integers(0, value_max + 1, size=(r, s))
    records = [{f"w{i}": int(v) for i, v in enumerate(row)} for row in values]
    return DatabaseMatrix.from_records(records, schema, spec)


SYNTHETIC_KINDS = {
    "twitter": (twitter_schema, twitter_records, {
        "user": [{"group": "user"}, {"group": "user", "where": "retweeted = 0"}],
    }),
    "mimic": (mimic_schema, mimic_records, {
        "admission": [
            {"group": "admission_type"},
            {"group": "admission_type", "where": "ethnicity = HISPANIC"},
            {"kind": "max", "group": "admission_type", "order": "admittime"},
            {"kind": "min", "group": "admission_type", "order": "admittime"},
        ],
    }),
}


def write_synthetic(
    out_dir: str | Path,
    kind: str,
    r: int,
    spec: FieldSpec,
    seed: int | None = None,
) -> Path:
    """合成データ一式（records.csv, schema.json, deployment.json）を書き出す。"""
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"未知の合成データ種別です: {kind}")
    schema_fn, records_fn, keywords = SYNTHETIC_KINDS[kind]
    out_dir = Path(out_dir)
    rng = rng_from_seed(seed)
    schema = schema_fn()
    db = build_database(records_fn(r, rng=rng), schema, spec)

    write_records(out_dir / "records.csv", db)
    save_schema(out_dir / "schema.json", schema)
    deployment = {
        "csv_path": "records.csv",
        "schema_path": "schema.json",
        "field_spec": spec.to_text(),
        "keywords": keywords,
    }
    (out_dir / "deployment.json").write_text(json.dumps(deployment, indent=2), encoding="utf-8")
    logger.info("Generated %d %s records into %s", r, kind, out_dir)
    return out_dir
