"""集約クエリ索引の生成

データ所有者側で平文の DatabaseMatrix を 1 回走査し、各クエリ族の単純索引を作る。
- group 索引: 行 = カテゴリ値、(g, rec) = 1 ⇔ rec の値が g かつフィルタを満たす（SUM / COUNT / ヒストグラム / MEAN）
- min / max 索引: 各行に高々 1 つの 1（グループ内で order 属性が最小 / 最大のレコード）
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from src.errors import (
    CorruptedResponseError,
    FieldValueError,
    SchemaError,
    UnsupportedQueryError,
)
from src.index.ccs_file import write_simple_iaq
from src.index.iaq import SimpleIAQ, ccs_from_dense, validate_simple_iaq
from src.index.manifest import IndexManifest, write_manifest
from src.models.dataset import (
    ID_SUFFIX,
    AttributeKind,
    DatabaseMatrix,
    Schema,
    check_headroom,
    resolve_literal,
    summable_columns,
)

logger = logging.getLogger(__name__)


class Operator(str, Enum):
    EQ = "="
    LT = "<"
    GT = ">"
    LE = "<="
    GE = ">="
    BETWEEN = "between"


@dataclass(frozen=True)
class Condition:
    """attr op value（BETWEEN は value <= attr <= upper）"""

    attr: str
    op: Operator
    value: int | str
    upper: int | str | None = None

    def resolve(self, schema: Schema) -> "Condition":
        attr = schema.attribute(self.attr)
        if attr.kind is AttributeKind.CATEGORICAL and self.op is not Operator.EQ:
            raise UnsupportedQueryError(f"カテゴリ属性 {self.attr} は = でのみ絞り込めます")
        upper = resolve_literal(attr, self.upper) if self.upper is not None else None
        return Condition(self.attr, self.op, resolve_literal(attr, self.value), upper)

    def matches(self, record: Mapping[str, Any]) -> bool:
        v = record.get(self.attr)
        if self.op is Operator.EQ:
            return v == self.value
        if self.op is Operator.LT:
            return v < self.value
        if self.op is Operator.GT:
            return v > self.value
        if self.op is Operator.LE:
            return v <= self.value
        if self.op is Operator.GE:
            return v >= self.value
        return self.value <= v <= self.upper

    def describe(self) -> str:
        if self.op is Operator.BETWEEN:
            return f"{self.attr}:{self.value}..{self.upper}"
        return f"{self.attr}{self.op.value}{self.value}"


@dataclass(frozen=True)
class RecordFilter:
    """AND で結んだ条件。describe() は条件順によらない正規形。"""

    conditions: tuple[Condition, ...] = ()

    def resolve(self, schema: Schema) -> "RecordFilter":
        return RecordFilter(tuple(c.resolve(schema) for c in self.conditions))

    def matches(self, record: Mapping[str, Any]) -> bool:
        return all(c.matches(record) for c in self.conditions)

    def describe(self) -> str:
        return "&".join(sorted(c.describe() for c in self.conditions))

    def __bool__(self) -> bool:
        return bool(self.conditions)


class FamilyKind(str, Enum):
    GROUP = "group"
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class Family:
    """索引ファミリ。label はバッチ位置の公開メタデータとして使う。"""

    kind: FamilyKind
    group: str
    order: str | None = None
    filter_text: str = ""

    @property
    def label(self) -> str:
        if self.kind is FamilyKind.GROUP:
            return f"group:{self.group}[{self.filter_text}]" if self.filter_text else f"group:{self.group}"
        return f"{self.kind.value}:{self.group}:{self.order}"


_LABEL_RE = re.compile(r"^(group):(\w+)(?:\[(.*)\])?$|^(min|max):(\w+):(\w+)$")


def parse_family_label(label: str) -> Family:
    m = _LABEL_RE.match(label)
    if m is None:
        raise SchemaError(f"索引ファミリ名が不正です: {label}")
    if m.group(1):
        return Family(FamilyKind.GROUP, m.group(2), None, m.group(3) or "")
    return Family(FamilyKind(m.group(4)), m.group(5), m.group(6))


def group_label(group_attr: str, record_filter: RecordFilter | None = None) -> str:
    text = record_filter.describe() if record_filter else ""
    return Family(FamilyKind.GROUP, group_attr, None, text).label


def _group_ids(db: DatabaseMatrix, group_attr: str) -> tuple[dict[str, int], tuple[str, ...]]:
    attr = db.schema.attribute(group_attr)
    if attr.kind is not AttributeKind.CATEGORICAL:
        raise SchemaError(f"グループ属性はカテゴリ属性です: {group_attr}")
    id_map = db.id_maps.get(group_attr)
    if not id_map:
        raise SchemaError(f"id 対応表がありません（preprocess_ids 未実行）: {group_attr}")
    labels = tuple(v for v, _ in sorted(id_map.items(), key=lambda kv: kv[1]))
    if [id_map[v] for v in labels] != list(range(1, len(labels) + 1)):
        raise SchemaError(f"{group_attr}: id は 1..p の連番である必要があります")
    return id_map, labels


def build_group_index(
    db: DatabaseMatrix,
    group_attr: str,
    record_filter: RecordFilter | None = None,
) -> SimpleIAQ:
    """行 g = グループ値 g のレコード（フィルタを満たすもの）を指す単純索引。

    SUM は任意の数値列、COUNT は `<group>_id` 列との積で使う。二元体は整数の和を
    表せないので受け付けない。
    """
    if not db.spec.is_prime:
        raise FieldValueError("SUM / COUNT / MEAN の索引には素体が必要です")
    record_filter = record_filter.resolve(db.schema) if record_filter else RecordFilter()
    id_map, labels = _group_ids(db, group_attr)
    id_column = group_attr + ID_SUFFIX
    check_headroom(db, [*summable_columns(db), *([id_column] if db.has_column(id_column) else [])])

    matrix = [[0] * db.r for _ in labels]
    for rec_no, rec in enumerate(db.plaintext):
        if record_filter.matches(rec):
            matrix[id_map[str(rec.get(group_attr, ""))] - 1][rec_no] = 1

    label = group_label(group_attr, record_filter)
    iaq = SimpleIAQ(ccs_from_dense(matrix), labels, label)
    logger.info("Built %s (p=%d, r=%d, nnz=%d)", label, iaq.p, iaq.r, iaq.nnz)
    return iaq


def build_minmax_index(
    db: DatabaseMatrix,
    group_attr: str,
    order_attr: str,
    direction: str,
) -> SimpleIAQ:
    """各グループで order_attr が最小（min）/ 最大（max）のレコードを指す索引。

    同値は小さいレコード番号を優先する。空のグループは全 0 行。
    """
    kind = FamilyKind(direction)
    if kind is FamilyKind.GROUP:
        raise SchemaError("direction は min か max です")
    order = db.schema.attribute(order_attr)
    if order.kind is not AttributeKind.NUMERIC:
        raise SchemaError(f"順序属性は数値属性です: {order_attr}")
    id_map, labels = _group_ids(db, group_attr)

    best: dict[int, int] = {}
    for rec_no, rec in enumerate(db.plaintext):
        g = id_map[str(rec.get(group_attr, ""))]
        value = rec[order_attr]
        current = best.get(g)
        if current is None:
            best[g] = rec_no
            continue
        incumbent = db.plaintext[current][order_attr]
        if (value < incumbent) if kind is FamilyKind.MIN else (value > incumbent):
            best[g] = rec_no

    matrix = [[0] * db.r for _ in labels]
    for g, rec_no in best.items():
        matrix[g - 1][rec_no] = 1

    label = Family(kind, group_attr, order_attr).label
    iaq = SimpleIAQ(ccs_from_dense(matrix), labels, label)
    logger.info("Built %s (p=%d, r=%d)", label, iaq.p, iaq.r)
    return iaq


def build_family(db: DatabaseMatrix, family: Family, record_filter: RecordFilter | None = None) -> SimpleIAQ:
    if family.kind is FamilyKind.GROUP:
        iaq = build_group_index(db, family.group, record_filter)
    else:
        if record_filter:
            raise UnsupportedQueryError("min / max 索引にはフィルタを付けられません")
        iaq = build_minmax_index(db, family.group, family.order, family.kind.value)
    return iaq


def count_decode(aggregate: int, id_value: int) -> int:
    """id 列の集約値を id で割って件数に戻す。"""
    if id_value < 1:
        raise CorruptedResponseError(f"id は 1 以上です: {id_value}")
    if aggregate % id_value:
        raise CorruptedResponseError(
            f"集約値 {aggregate} が id {id_value} で割り切れません"
        )
    return aggregate // id_value


def write_index(
    directory: str | Path,
    iaq: SimpleIAQ,
    id_map_path: str | None = None,
    generation_seconds: float | None = None,
    strict: bool = False,
) -> tuple[Path, Path]:
    """CCS ファイルとサイドカーのマニフェストを書き出す。"""
    directory = Path(directory)
    stem = re.sub(r"[^\w.-]+", "_", iaq.label).strip("_") or "index"
    ccs_path = write_simple_iaq(directory / f"{stem}.ccs", iaq)
    report = validate_simple_iaq(iaq, strict=strict)
    if not report.valid:
        logger.warning("Index %s fails row-weight check: %s", iaq.label, report.describe())
    family = parse_family_label(iaq.label) if iaq.label else None
    manifest = IndexManifest(
        keyword=iaq.label,
        p=iaq.p,
        r=iaq.r,
        nnz=iaq.nnz,
        row_labels=list(iaq.row_labels),
        id_map=id_map_path,
        filter=family.filter_text if family else "",
        ccs_file=ccs_path.name,
        generation_seconds=generation_seconds,
        validation=report.describe(),
    )
    manifest_path = write_manifest(directory / f"{stem}.json", manifest)
    return ccs_path, manifest_path
