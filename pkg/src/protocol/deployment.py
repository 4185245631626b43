"""デプロイの構築・保存・読み込み

データ所有者はデプロイ設定（JSON）から索引を作ってバッチ化し、
サーバごとのバケットと公開カタログを書き出す。

    deploy/
      catalog.json          公開メタデータ
      schema.json
      records.csv           全サーバ共通の D
      id_maps/<attr>.csv
      indexes/              単純索引（CCS + マニフェスト）
      server_<i>/<kw>.bkt   サーバ i のバケット
"""

import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from pydantic import BaseModel, ValidationError

from config.settings import settings
from src.analyzers.query import parse_conditions
from src.collectors.csv_ingest import (
    dump_id_maps,
    ingest_csv,
    load_id_maps,
    load_schema,
    save_schema,
    write_records,
)
from src.crypto.field import FieldSpec
from src.errors import SchemaError
from src.index.batch import batch_indexes, batching_timer
from src.index.ccs_file import read_bucket, write_bucket
from src.index.iaq import BatchedCCS, SimpleIAQ
from src.index.indexgen import Family, FamilyKind, RecordFilter, build_family, write_index
from src.models.catalog import Catalog, KeywordInfo
from src.models.dataset import DatabaseMatrix, project_essential
from src.protocol.server import ServerState
from src.protocol.transport import LoopbackTransport

logger = logging.getLogger(__name__)

CATALOG_FILE = "catalog.json"
SCHEMA_FILE = "schema.json"
RECORDS_FILE = "records.csv"
ID_MAP_DIR = "id_maps"
INDEX_DIR = "indexes"


class FamilyConfig(BaseModel):
    """1 つのバッチ位置に置く索引。where はクエリと同じ条件構文。"""

    kind: FamilyKind = FamilyKind.GROUP
    group: str
    order: str | None = None
    where: str = ""

    def record_filter(self) -> RecordFilter:
        if not self.where.strip():
            return RecordFilter()
        return RecordFilter(parse_conditions(self.where))

    def family(self) -> Family:
        return Family(self.kind, self.group, self.order)


class DeploymentConfig(BaseModel):
    """デプロイ設定。パスは設定ファイルのあるディレクトリからの相対パス。"""

    csv_path: str
    schema_path: str
    field_spec: str | None = None
    servers: int | None = None
    essential: bool | None = None
    keywords: dict[str, list[FamilyConfig]]


def load_deployment_config(path: str | Path) -> DeploymentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Deployment config not found: {path}")
    try:
        return DeploymentConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise SchemaError(f"デプロイ設定が不正です ({path}): {e}") from None


def bucket_coordinates(spec: FieldSpec, keyword_shapes: Sequence[tuple[int, int]], ell: int) -> list[int]:
    """サーバ座標 R..R+ℓ-1（R = max(u, p, 2)）。ヒストグラムの位置 0..p-1 と衝突しない。"""
    start = max([2] + [max(u, p) for u, p in keyword_shapes])
    return [spec.from_int(start + i) for i in range(ell)]


def _file_stem(keyword: str) -> str:
    return re.sub(r"[^\w.-]+", "_", keyword).strip("_") or "keyword"


@dataclass
class Deployment:
    """メモリ上のデプロイ。buckets[kw][i] はサーバ i のバケット。"""

    catalog: Catalog
    db: DatabaseMatrix
    indexes: dict[str, list[SimpleIAQ]]
    buckets: dict[str, list[BatchedCCS]]
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def ell(self) -> int:
        return len(self.catalog.coordinates)

    def server_state(self, i: int, skip_zero_columns: bool | None = None) -> ServerState:
        skip = settings.skip_zero_columns if skip_zero_columns is None else skip_zero_columns
        return ServerState.create(
            {kw: per_server[i] for kw, per_server in self.buckets.items()},
            self.db,
            self.catalog.coordinates[i],
            skip_zero_columns=skip,
            essential=self.catalog.essential,
        )

    def loopback(self, skip_zero_columns: bool | None = None) -> list[LoopbackTransport]:
        """ℓ 台のサーバをプロセス内に立てる。"""
        return [LoopbackTransport(self.server_state(i, skip_zero_columns)) for i in range(self.ell)]


def build_deployment(
    db: DatabaseMatrix,
    keywords: Mapping[str, Sequence[FamilyConfig]],
    ell: int | None = None,
    essential: bool | None = None,
    workers: int | None = None,
) -> Deployment:
    """キーワードごとに索引を作り、ℓ 台分のバケットにバッチ化する。"""
    ell = settings.server_count if ell is None else ell
    essential = settings.essential_only if essential is None else essential
    workers = settings.batch_workers if workers is None else workers
    if not keywords:
        raise SchemaError("キーワードが 1 つもありません")

    indexes: dict[str, list[SimpleIAQ]] = {}
    timings: dict[str, float] = {}
    for keyword, families in keywords.items():
        if not families:
            raise SchemaError(f"{keyword}: 索引が 1 つもありません")
        started = time.perf_counter()
        indexes[keyword] = [build_family(db, f.family(), f.record_filter()) for f in families]
        timings[f"generate:{keyword}"] = time.perf_counter() - started

    coords = bucket_coordinates(
        db.spec, [(len(idx), idx[0].p) for idx in indexes.values()], ell,
    )
    buckets = {}
    for keyword, simple in indexes.items():
        with batching_timer() as timing:
            buckets[keyword] = batch_indexes(simple, coords, db.spec, keyword=keyword, workers=workers)
        timings[f"batch:{keyword}"] = timing.seconds
        if ell < settings.privacy_threshold + len(simple):
            logger.warning(
                "Keyword %r needs at least %d servers for t=%d; only %d configured",
                keyword, settings.privacy_threshold + len(simple), settings.privacy_threshold, ell,
            )

    served = project_essential(db) if essential else db
    catalog = Catalog(
        field_spec=db.spec.to_text(),
        coordinates=list(coords),
        columns=Catalog.columns_of(served),
        record_schema=db.schema,
        keywords=[
            KeywordInfo(
                keyword=keyword,
                p=simple[0].p,
                r=simple[0].r,
                u=len(simple),
                family_labels=[idx.label for idx in simple],
                row_labels=list(simple[0].row_labels),
            )
            for keyword, simple in indexes.items()
        ],
        essential=essential,
    )
    logger.info(
        "Built deployment: %d keywords, %d servers at x=%s", len(indexes), ell, list(coords),
    )
    return Deployment(catalog, db, indexes, buckets, timings)


def build_from_config(path: str | Path, ell: int | None = None, field_spec: str | None = None) -> Deployment:
    """デプロイ設定ファイルから CSV を取り込んでデプロイを作る。"""
    path = Path(path)
    config = load_deployment_config(path)
    base = path.parent
    spec = FieldSpec.parse(field_spec or config.field_spec or settings.field_spec)
    schema = load_schema(base / config.schema_path)
    db = ingest_csv(base / config.csv_path, schema, spec)
    return build_deployment(
        db,
        config.keywords,
        ell=ell if ell is not None else config.servers,
        essential=config.essential,
    )


def write_deployment(deployment: Deployment, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    db = deployment.db
    deployment.catalog.save(out_dir / CATALOG_FILE)
    save_schema(out_dir / SCHEMA_FILE, db.schema)
    write_records(out_dir / RECORDS_FILE, db)
    dump_id_maps(out_dir / ID_MAP_DIR, db)

    for keyword, simple in deployment.indexes.items():
        seconds = deployment.timings.get(f"generate:{keyword}")
        for iaq in simple:
            write_index(
                out_dir / INDEX_DIR / _file_stem(keyword),
                iaq,
                generation_seconds=seconds / len(simple) if seconds is not None else None,
                strict=settings.strict_row_weight,
            )
    for i in range(deployment.ell):
        for keyword, per_server in deployment.buckets.items():
            write_bucket(out_dir / f"server_{i}" / f"{_file_stem(keyword)}.bkt", per_server[i])
    logger.info("Wrote deployment to %s", out_dir)
    return out_dir


def load_catalog(deploy_dir: str | Path) -> Catalog:
    return Catalog.load(Path(deploy_dir) / CATALOG_FILE)


def load_server_state(
    deploy_dir: str | Path,
    server_index: int,
    skip_zero_columns: bool | None = None,
) -> tuple[ServerState, Catalog]:
    """ディスク上のデプロイからサーバ server_index の状態を復元する。"""
    deploy_dir = Path(deploy_dir)
    catalog = load_catalog(deploy_dir)
    if not 0 <= server_index < len(catalog.coordinates):
        raise SchemaError(f"サーバ番号が範囲外です: {server_index} (ℓ={len(catalog.coordinates)})")
    db = ingest_csv(
        deploy_dir / RECORDS_FILE,
        catalog.record_schema,
        catalog.spec,
        id_maps=load_id_maps(deploy_dir / ID_MAP_DIR),
    )
    server_dir = deploy_dir / f"server_{server_index}"
    buckets = {}
    for path in sorted(server_dir.glob("*.bkt")):
        bucket = read_bucket(path)
        buckets[bucket.keyword] = bucket
    missing = {kw.keyword for kw in catalog.keywords} - set(buckets)
    if missing:
        raise FileNotFoundError(f"Buckets missing in {server_dir}: {sorted(missing)}")

    skip = settings.skip_zero_columns if skip_zero_columns is None else skip_zero_columns
    state = ServerState.create(
        buckets,
        db,
        catalog.coordinates[server_index],
        skip_zero_columns=skip,
        essential=catalog.essential,
    )
    logger.info(
        "Loaded server %d (x=%d, %d keywords, r=%d, s=%d)",
        server_index, state.coord, len(buckets), db.r, state.s,
    )
    return state, catalog


def local_cluster(deploy_dir: str | Path, skip_zero_columns: bool | None = None) -> tuple[list[LoopbackTransport], Catalog]:
    """ディスク上のデプロイから ℓ 台のサーバをプロセス内に立てる。"""
    catalog = load_catalog(deploy_dir)
    transports = []
    for i in range(len(catalog.coordinates)):
        state, _ = load_server_state(deploy_dir, i, skip_zero_columns)
        transports.append(LoopbackTransport(state, name=f"server_{i}"))
    return transports, catalog
