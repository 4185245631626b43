"""CSV データ取り込み

スキーマ（JSON）に従って CSV を解析し、DatabaseMatrix を作る。
カテゴリ属性には id 列を付け、id 対応表は `value,id` の 2 列 CSV で保存する。
"""

import csv
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from pydantic import ValidationError

from src.crypto.field import FieldSpec
from src.errors import FieldOverflowError, IngestError, SchemaError
from src.models.dataset import (
    AttributeKind,
    DatabaseMatrix,
    Schema,
    parse_date,
    preprocess_ids,
)

logger = logging.getLogger(__name__)


def load_schema(path: str | Path) -> Schema:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Schema file not found: {path}")
    try:
        return Schema.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise SchemaError(f"スキーマが不正です ({path}): {e}") from None


def save_schema(path: str | Path, schema: Schema) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(schema.model_dump_json(indent=2, exclude_none=True), encoding="utf-8")
    return path


def read_records(path: str | Path, schema: Schema) -> list[dict]:
    """
    CSV を読み、スキーマに従って値を解析する。

    CSVフォーマット:
        1 行目がヘッダ（スキーマの属性名をすべて含む）。UTF-8。

    Returns:
        records: 数値は int、カテゴリ・テキストは str の辞書のリスト
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")

    records = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [a.name for a in schema.attributes if a.name not in header]
        if missing:
            raise IngestError(f"ヘッダに属性がありません: {', '.join(missing)}", row=1)

        for line, row in enumerate(reader, start=2):
            if None in row:
                raise IngestError("列数がヘッダより多い行です", row=line)
            records.append(_parse_row(row, schema, line))

    if not records:
        raise IngestError("レコードがありません")
    return records


def _parse_row(row: Mapping[str, str | None], schema: Schema, line: int) -> dict:
    parsed = {}
    for attr in schema.attributes:
        raw = row.get(attr.name)
        if raw is None:
            raise IngestError("値がありません", row=line, column=attr.name)
        raw = raw.strip()
        if attr.kind is AttributeKind.NUMERIC:
            parsed[attr.name] = _numeric_or_raise(raw, attr.date_format, line, attr.name)
        else:
            parsed[attr.name] = raw
    return parsed


def _numeric_or_raise(raw: str, date_format: str | None, line: int, column: str) -> int:
    if raw == "":
        raise IngestError("数値属性が空です", row=line, column=column)
    if date_format:
        try:
            return parse_date(raw, date_format)
        except ValueError as e:
            raise IngestError(str(e), row=line, column=column) from None
    try:
        value = int(raw)
    except ValueError:
        raise IngestError(f"整数として解釈できません: {raw!r}", row=line, column=column) from None
    if value < 0:
        raise IngestError(f"負の値は扱えません: {value}", row=line, column=column)
    return value


def ingest_csv(
    path: str | Path,
    schema: Schema,
    spec: FieldSpec,
    id_maps: Mapping[str, Mapping[str, int]] | None = None,
) -> DatabaseMatrix:
    """CSV から DatabaseMatrix を作り、全カテゴリ属性に id 列を付ける。

    id_maps を渡すと保存済みの対応表を引き継ぐ（サーバ側の再取り込み用）。
    """
    records = read_records(path, schema)
    try:
        db = DatabaseMatrix.from_records(records, schema, spec)
    except FieldOverflowError as e:
        raise FieldOverflowError(f"{Path(path).name}: {e}") from None

    for attr in schema.attributes:
        if attr.kind is AttributeKind.CATEGORICAL:
            db, _ = preprocess_ids(db, attr.name, (id_maps or {}).get(attr.name))

    logger.info("Ingested %d records (s=%d) from %s", db.r, db.s, path)
    return db


def write_id_map(path: str | Path, mapping: Mapping[str, int]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["value", "id"])
        for value, ident in sorted(mapping.items(), key=lambda kv: kv[1]):
            writer.writerow([value, ident])
    return path


def read_id_map(path: str | Path) -> dict[str, int]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"id map not found: {path}")
    mapping = {}
    with open(path, encoding="utf-8", newline="") as f:
        for line, row in enumerate(csv.DictReader(f), start=2):
            try:
                mapping[row["value"]] = int(row["id"])
            except (KeyError, TypeError, ValueError):
                raise IngestError("id 対応表の形式が不正です", row=line) from None
    return mapping


def write_records(path: str | Path, db: DatabaseMatrix) -> Path:
    """平文レコードを CSV に書き出す（日付は元の書式に戻す）。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [a.name for a in db.schema.attributes]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=names)
        writer.writeheader()
        for rec in db.plaintext:
            row = {}
            for attr in db.schema.attributes:
                value = rec.get(attr.name, "")
                if attr.date_format and isinstance(value, int):
                    value = datetime.fromtimestamp(value, tz=timezone.utc).strftime(attr.date_format)
                row[attr.name] = value
            writer.writerow(row)
    return path


def dump_id_maps(directory: str | Path, db: DatabaseMatrix) -> list[Path]:
    directory = Path(directory)
    return [write_id_map(directory / f"{name}.csv", m) for name, m in db.id_maps.items()]


def load_id_maps(directory: str | Path) -> dict[str, dict[str, int]]:
    directory = Path(directory)
    if not directory.exists():
        return {}
    return {p.stem: read_id_map(p) for p in sorted(directory.glob("*.csv"))}

