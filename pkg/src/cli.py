"""コマンドライン

    python -m src.cli build-index --csv data/sample_hospital.csv --schema data/sample_schema.json --group patient
    python -m src.cli deploy --config data/sample_deployment.json --out deploy
    python -m src.cli query "SUM(days) WHERE patient=3" --local 4 -t 1
    python -m src.cli serve --index 0
    python -m src.cli bench --experiment vary-r --out bench.csv

終了コード: 0 成功 / 1 その他のエラー / 2 引数・構文・ファイル不足 / 3 応答・サーバ数の不足
"""

import argparse
import asyncio
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

from config.settings import settings
from src.collectors.csv_ingest import dump_id_maps, ingest_csv, load_schema
from src.collectors.synthetic import SYNTHETIC_KINDS, write_synthetic
from src.crypto.field import FieldSpec, verify_presets
from src.errors import (
    IAQError,
    InsufficientResponsesError,
    QueryParseError,
    SchemaError,
    ShareConfigError,
    UnsupportedQueryError,
)
from src.index.batch import batch_indexes, batching_timer
from src.index.ccs_file import read_simple_iaq, write_bucket
from src.index.indexgen import Family, FamilyKind, RecordFilter, build_family, write_index
from src.index.manifest import read_manifest
from src.analyzers.planner import Recipe, top_k
from src.analyzers.query import parse_conditions
from src.jobs.bench import EXPERIMENTS, BenchOptions, check_trends, run_experiment, write_csv
from src.models.dataset import format_date
from src.protocol.client import run_query
from src.protocol.deployment import (
    CATALOG_FILE,
    bucket_coordinates,
    build_from_config,
    load_catalog,
    local_cluster,
    write_deployment,
)
from src.protocol.transport import HttpTransport, fetch_catalog

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_INSUFFICIENT = 3


def _field(args) -> FieldSpec:
    return FieldSpec.parse(args.field or settings.field_spec)


def _format_value(value) -> str:
    if isinstance(value, Fraction):
        return f"{value} (= {float(value):.6g})" if value.denominator != 1 else str(value.numerator)
    if isinstance(value, dict):
        return "\n".join(f"  {k}: {_format_value(v)}" for k, v in value.items())
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return "NULL" if value is None else str(value)


def cmd_build_index(args) -> int:
    spec = _field(args)
    schema = load_schema(args.schema)
    db = ingest_csv(args.csv, schema, spec)
    record_filter = RecordFilter(parse_conditions(args.where)) if args.where else None
    if args.order:
        kind = FamilyKind.MIN if args.min else FamilyKind.MAX
        family = Family(kind, args.group, args.order)
    else:
        family = Family(FamilyKind.GROUP, args.group)

    started = time.perf_counter()
    iaq = build_family(db, family, record_filter)
    seconds = time.perf_counter() - started

    out = Path(args.out)
    id_maps = dump_id_maps(out / "id_maps", db)
    id_map_path = next((str(p) for p in id_maps if p.stem == args.group), None)
    ccs_path, manifest_path = write_index(
        out, iaq, id_map_path=id_map_path, generation_seconds=seconds,
        strict=args.strict or settings.strict_row_weight,
    )
    print(f"{iaq.label}: p={iaq.p} r={iaq.r} nnz={iaq.nnz}")
    print(f"  generation: {seconds:.6f} s")
    print(f"  written: {ccs_path}, {manifest_path}")
    return EXIT_OK


def cmd_batch(args) -> int:
    spec = _field(args)
    indexes = []
    for manifest_path in args.manifest:
        manifest = read_manifest(manifest_path)
        ccs = Path(manifest_path).parent / manifest.ccs_file
        indexes.append(read_simple_iaq(ccs, tuple(manifest.row_labels), manifest.keyword))

    shape = (len(indexes), max(idx.p for idx in indexes))
    coords = bucket_coordinates(spec, [shape], args.servers or settings.server_count)
    with batching_timer() as timing:
        buckets = batch_indexes(
            indexes, coords, spec, keyword=args.keyword, workers=args.workers or settings.batch_workers,
        )
    out = Path(args.out)
    for i, bucket in enumerate(buckets):
        write_bucket(out / f"server_{i}" / f"{args.keyword}.bkt", bucket)
    print(f"{args.keyword}: u={len(indexes)} buckets={len(buckets)} x={coords}")
    print(f"  batching: {timing.seconds:.6f} s, nnz per bucket: {buckets[0].nnz}")
    return EXIT_OK


def cmd_deploy(args) -> int:
    if args.essential:
        settings.essential_only = True
    deployment = build_from_config(args.config, ell=args.servers, field_spec=args.field)
    out = write_deployment(deployment, args.out or settings.deploy_dir)
    catalog = deployment.catalog
    print(f"deployment: {out} (ℓ={len(catalog.coordinates)}, x={catalog.coordinates})")
    for kw in catalog.keywords:
        print(f"  {kw.keyword}: p={kw.p} r={kw.r} u={kw.u} {kw.family_labels}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from src.main import create_app
    from src.protocol.deployment import load_server_state

    index = settings.server_index if args.index is None else args.index
    state, catalog = load_server_state(
        args.deploy or settings.deploy_dir, index, skip_zero_columns=args.skip_zero_cols or None,
    )
    port = args.port or settings.server_base_port + index
    uvicorn.run(create_app(state, catalog), host=args.host or settings.server_host, port=port)
    return EXIT_OK


def cmd_query(args) -> int:
    t = settings.privacy_threshold if args.t is None else args.t
    deploy_dir = args.deploy or settings.deploy_dir
    if args.servers:
        urls = [u if u.startswith("http") else f"http://{u}" for u in args.servers.split(",")]
        servers = [HttpTransport(u) for u in urls]
        if Path(deploy_dir, CATALOG_FILE).exists():
            catalog = load_catalog(deploy_dir)
        else:
            catalog = asyncio.run(fetch_catalog(urls[0]))
    else:
        servers, catalog = local_cluster(deploy_dir, skip_zero_columns=args.skip_zero_cols or None)
        if args.local:
            servers = servers[:args.local]

    result = asyncio.run(run_query(args.query, catalog, servers, t=t))
    value = result.value
    query = result.plan.query
    if result.plan.recipe is Recipe.EXTREMUM and value is not None:
        if catalog.record_schema.attribute(query.column).date_format:
            value = format_date(value)
    print(f"{query.describe()}")
    print(f"result: {_format_value(value)}" if not isinstance(value, dict)
          else f"result:\n{_format_value(value)}")
    if args.top and result.plan.recipe is Recipe.HISTOGRAM:
        print(f"top {args.top}:")
        for group, count in top_k(value, args.top):
            print(f"  {group}: {count}")
    if result.plan.recipe is Recipe.MEAN and not isinstance(result.value, dict):
        print(f"  sum={result.components['sum']} count={result.components['count']}")
    print(f"keyword: {result.plan.keyword} (k={result.plan.k}, u={result.plan.u}, t={t})")
    print(f"servers used: {list(result.servers_used)}  integrity: {result.integrity.verdict.value}")
    for name, seconds in result.timings.items():
        print(f"  {name}: {seconds:.6f}")
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    out = write_synthetic(args.out, args.kind, args.rows, _field(args), seed=args.seed)
    print(f"{args.kind}: {args.rows} records written to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    opts = BenchOptions(
        spec=_field(args),
        trials=args.trials or settings.bench_trials,
        full=args.full,
        seed=args.seed if args.seed is not None else settings.random_seed,
        servers=settings.server_count,
        t=settings.privacy_threshold,
    )
    names = list(args.experiment or ["vary-r"])
    if "all" in names:
        names = [e for e in EXPERIMENTS if e != "baseline"]
    if args.baseline == "goldberg" and "baseline" not in names:
        names.append("baseline")
    rows = []
    for name in names:
        rows.extend(run_experiment(name, opts))
    for row in rows:
        print(f"{row.experiment:<11} {row.param}={row.value:<8} {row.mean_seconds:.6f} s  {row.throughput_qps:.2f} q/s")
    if args.out:
        write_csv(args.out, rows)
        print(f"written: {args.out}")
    failures = check_trends(rows) if args.check else []
    for failure in failures:
        print(f"TREND: {failure}")
    return EXIT_ERROR if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iaq-pir", description="集約クエリ索引つき IT-PIR")
    parser.add_argument("--field", help="体の指定（prime:<m> / gf2e8 / gf2e16 / prime128 など）")
    parser.add_argument("--seed", type=int, help="乱数シード")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="単純索引（CCS + マニフェスト）を作る")
    p.add_argument("--csv", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--group", required=True, help="グループ属性（カテゴリ）")
    p.add_argument("--order", help="min / max 索引の順序属性")
    direction = p.add_mutually_exclusive_group()
    direction.add_argument("--min", action="store_true")
    direction.add_argument("--max", action="store_true")
    p.add_argument("--where", help="フィルタ条件（例: \"admit < 2022-06-01\"）")
    p.add_argument("--out", default="indexes")
    p.add_argument("--strict", action="store_true", help="行重み 2 以上を要求する")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("batch", help="単純索引を u バッチ索引のバケットにする")
    p.add_argument("manifest", nargs="+", help="build-index が書いたマニフェスト（JSON）")
    p.add_argument("--keyword", required=True)
    p.add_argument("--servers", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="buckets")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("deploy", help="デプロイ設定から全サーバ分のファイルを作る")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--servers", type=int)
    p.add_argument("--essential", action="store_true", help="集約対象の列だけを配る")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("serve", help="1 台の PIR サーバを起動する")
    p.add_argument("--deploy")
    p.add_argument("--index", type=int)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--skip-zero-cols", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="クエリを実行する")
    p.add_argument("query")
    p.add_argument("--deploy")
    p.add_argument("--servers", help="host:port,host:port,...")
    p.add_argument("--local", type=int, help="プロセス内で先頭 N 台のサーバを使う")
    p.add_argument("-t", "--t", type=int)
    p.add_argument("--top", type=int, help="ヒストグラムの上位 N 件も表示する")
    p.add_argument("--skip-zero-cols", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gen-synthetic", help="合成データを作る")
    p.add_argument("--kind", choices=sorted(SYNTHETIC_KINDS), default="twitter")
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--out", default="synthetic")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("bench", help="ベンチマーク")
    p.add_argument("--experiment", action="append", choices=[*EXPERIMENTS, "all"])
    p.add_argument("--trials", type=int)
    p.add_argument("--full", action="store_true", help="机上規模の上限を外す")
    p.add_argument("--baseline", choices=["goldberg"])
    p.add_argument("--out")
    p.add_argument("--check", action="store_true", help="傾向を確認し、外れたら終了コード 1")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "full", False):
        settings.bench_max_rows = 2 ** 24
        settings.bench_max_index_rows = 2 ** 17
        settings.bench_max_batch = 2 ** 6
    try:
        verify_presets()
        return args.func(args)
    except (InsufficientResponsesError, ShareConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (FileNotFoundError, QueryParseError, UnsupportedQueryError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IAQError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
