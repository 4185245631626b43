"""テスト共通の組み立て

入院記録サンプル（6 レコード）と、そのデプロイをプロセス内で作る。
"""

import asyncio
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.collectors.csv_ingest import ingest_csv, load_schema
from src.crypto.field import FieldSpec
from src.protocol.deployment import FamilyConfig, build_deployment, load_deployment_config

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
SAMPLE_CSV = DATA_DIR / "sample_hospital.csv"
SAMPLE_SCHEMA = DATA_DIR / "sample_schema.json"
SAMPLE_CONFIG = DATA_DIR / "sample_deployment.json"

PRIME = FieldSpec.parse("prime:2147483647")
GF256 = FieldSpec.parse("gf2e8")
GF65536 = FieldSpec.parse("gf2e16")

# サンプルの索引行列（列 = レコード 1..6）
PI_PATIENT = [
    [1, 0, 0, 1, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 0, 1],
]
PI_DURATION = [
    [1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1],
]
PI_POPULATION = [
    [1, 1, 0, 1, 0, 0],
    [0, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 0, 1],
]
PI_STATE = [
    [0, 1, 0, 0, 0, 1],
    [1, 0, 0, 1, 0, 0],
    [0, 0, 1, 0, 1, 0],
]
# 各州で入院日が最も早いレコード（MIN）
PI_EARLIEST_ADMISSION = [
    [0, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0],
]
# 各州で入院日が最も遅いレコード（MAX）
PI_LATEST_ADMISSION = [
    [0, 0, 0, 0, 0, 1],
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 1, 0],
]


def sample_db(spec: FieldSpec = PRIME):
    return ingest_csv(SAMPLE_CSV, load_schema(SAMPLE_SCHEMA), spec)


def sample_deployment(ell: int = 4, essential: bool = False):
    keywords = load_deployment_config(SAMPLE_CONFIG).keywords
    return build_deployment(sample_db(), keywords, ell=ell, essential=essential)


def families(*specs: dict) -> list[FamilyConfig]:
    return [FamilyConfig(**s) for s in specs]


def seeded(seed: int = 0) -> random.Random:
    return random.Random(seed)


def run(coro):
    return asyncio.run(coro)
