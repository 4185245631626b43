"""データベース行列 D とスキーマ

D は r×s の体の元の行列（1 レコード = s ワード）。索引生成とオラクルのために
平文の値（plaintext）もレコードごとに保持する。
"""

import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Mapping, Sequence

from pydantic import BaseModel, model_validator

from src.crypto.field import FieldSpec, FieldVector
from src.errors import DimensionError, FieldOverflowError, SchemaError

logger = logging.getLogger(__name__)

ID_SUFFIX = "_id"
ISO_DATE = "%Y-%m-%d"


class AttributeKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TEXT = "text"


class Attribute(BaseModel):
    """スキーマの 1 属性

    numeric は 1 ワード。date_format があればその書式の日付を UTC エポック秒で持つ。
    categorical は自身のワードを持たず、preprocess_ids で `<name>_id` 列が付く。
    categories を与えるとその順に id 1,2,3,... を割り当てる。
    """

    name: str
    kind: AttributeKind
    words: int = 1
    date_format: str | None = None
    categories: list[str] | None = None


class Schema(BaseModel):
    attributes: list[Attribute]
    aggregation_set: list[str] = []

    @model_validator(mode="after")
    def _check(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError(f"属性名が重複しています: {names}")
        for a in self.attributes:
            if a.words < 1:
                raise ValueError(f"{a.name}: words は 1 以上です")
            if a.kind is AttributeKind.NUMERIC and a.words != 1:
                raise ValueError(f"{a.name}: 数値属性は 1 ワードです")
            if a.date_format and a.kind is not AttributeKind.NUMERIC:
                raise ValueError(f"{a.name}: date_format は数値属性のみ指定できます")
        allowed = set(self.summable_candidates())
        for name in self.aggregation_set:
            if name not in allowed:
                raise ValueError(f"集約対象にできない属性です: {name}")
        return self

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"未知の属性です: {name}")

    def has(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)

    def summable_candidates(self) -> list[str]:
        """aggregation_set に入れられる列名（数値属性と各カテゴリの id 列）"""
        names = []
        for a in self.attributes:
            if a.kind is AttributeKind.NUMERIC:
                names.append(a.name)
            elif a.kind is AttributeKind.CATEGORICAL:
                names.append(a.name + ID_SUFFIX)
        return names


@dataclass(frozen=True)
class Column:
    """D のワード列の割り当て。source は id 列の元になったカテゴリ属性。"""

    name: str
    kind: AttributeKind
    offset: int
    words: int = 1
    source: str | None = None


def text_chunk_bytes(spec: FieldSpec) -> int:
    """1 ワードに詰めるテキストのバイト数"""
    if spec.is_prime:
        return max(1, (spec.word_bits - 1) // 8)
    return spec.word_bits // 8


def pack_text(text: str, words: int, spec: FieldSpec) -> tuple[int, ...]:
    """UTF-8 をビッグエンディアンで words ワードに詰める（不足分は 0）。"""
    raw = text.encode("utf-8")
    chunk = text_chunk_bytes(spec)
    if len(raw) > chunk * words:
        raise FieldOverflowError(f"テキストが長すぎます ({len(raw)} bytes > {chunk * words})")
    raw = raw.ljust(chunk * words, b"\x00")
    return tuple(int.from_bytes(raw[i * chunk:(i + 1) * chunk], "big") for i in range(words))


def unpack_text(values: Sequence[int], spec: FieldSpec) -> str:
    chunk = text_chunk_bytes(spec)
    raw = b"".join(v.to_bytes(chunk, "big") for v in values)
    return raw.rstrip(b"\x00").decode("utf-8")


def parse_date(text: str, date_format: str | None) -> int:
    """日付文字列を UTC エポック秒にする。ISO 形式（YYYY-MM-DD）は常に受け付ける。"""
    for fmt in (date_format, ISO_DATE):
        if not fmt:
            continue
        try:
            parsed = datetime.strptime(text.strip(), fmt)
        except ValueError:
            continue
        return int(parsed.replace(tzinfo=timezone.utc).timestamp())
    raise ValueError(f"日付として解釈できません: {text!r}")


def format_date(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime(ISO_DATE)


def resolve_literal(attr: Attribute, value: int | str) -> int | str:
    """クエリ・フィルタのリテラルを属性の平文表現にそろえる。"""
    if attr.kind is AttributeKind.CATEGORICAL:
        return str(value)
    if attr.kind is AttributeKind.TEXT:
        raise SchemaError(f"テキスト属性では絞り込めません: {attr.name}")
    if isinstance(value, int):
        return value
    text = value.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    if attr.date_format is None:
        try:
            return parse_date(text, None)
        except ValueError:
            raise SchemaError(f"{attr.name} は数値属性です: {value!r}") from None
    try:
        return parse_date(text, attr.date_format)
    except ValueError as e:
        raise SchemaError(f"{attr.name}: {e}") from None


@dataclass(frozen=True)
class DatabaseMatrix:
    """r×s のデータベース行列

    Attributes
    ----------
    spec : FieldSpec
        ワードの体。
    schema : Schema
        属性定義。
    columns : tuple[Column, ...]
        ワード列の割り当て（offset 昇順）。
    data : tuple[tuple[int, ...], ...]
        r 行 s 列の整数表現。
    plaintext : tuple[dict, ...]
        レコードごとの平文値（数値は int、カテゴリ・テキストは str）。
    id_maps : dict[str, dict[str, int]]
        カテゴリ属性ごとの 値 → id。
    """

    spec: FieldSpec
    schema: Schema
    columns: tuple[Column, ...]
    data: tuple[tuple[int, ...], ...]
    plaintext: tuple[dict, ...]
    id_maps: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        s = self.s
        for i, row in enumerate(self.data):
            if len(row) != s:
                raise DimensionError(f"レコード {i + 1} のワード数が {len(row)} です (s={s})")
        if len(self.plaintext) != len(self.data):
            raise DimensionError("plaintext と data のレコード数が一致しません")

    @property
    def r(self) -> int:
        return len(self.data)

    @property
    def s(self) -> int:
        return sum(c.words for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"D に列がありません: {name}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def word(self, name: str) -> int:
        """1 ワード列の位置"""
        return self.column(name).offset

    def values(self, name: str) -> list[int]:
        offset = self.word(name)
        return [row[offset] for row in self.data]

    @classmethod
    def from_records(
        cls,
        records: Sequence[Mapping[str, Any]],
        schema: Schema,
        spec: FieldSpec,
    ) -> "DatabaseMatrix":
        """解析済みの値（数値 int / それ以外 str）からワード列を作る。

        カテゴリ属性の id 列はここでは作らない（preprocess_ids が付ける）。
        """
        columns = []
        offset = 0
        for a in schema.attributes:
            if a.kind is AttributeKind.CATEGORICAL:
                continue
            columns.append(Column(a.name, a.kind, offset, a.words))
            offset += a.words

        data = []
        plaintext = []
        for n, rec in enumerate(records, start=1):
            row: list[int] = []
            for col in columns:
                value = rec.get(col.name)
                if col.kind is AttributeKind.NUMERIC:
                    value = 0 if value is None else value
                    if value < 0 or value >= spec.order:
                        raise FieldOverflowError(
                            f"レコード {n} の {col.name}={value} が体の位数 {spec.order} の範囲外です"
                        )
                    row.append(value)
                else:
                    try:
                        row.extend(pack_text(value or "", col.words, spec))
                    except FieldOverflowError as e:
                        raise FieldOverflowError(f"レコード {n} の {col.name}: {e}") from None
            data.append(tuple(row))
            plaintext.append(dict(rec))

        return cls(spec, schema, tuple(columns), tuple(data), tuple(plaintext), {})


def preprocess_ids(
    db: DatabaseMatrix,
    attribute: str,
    id_map: Mapping[str, int] | None = None,
) -> tuple[DatabaseMatrix, dict[str, int]]:
    """カテゴリ属性に整数 id 列 `<attribute>_id` を付け足す。

    id は categories の順、残りは出現順に 1,2,3,...（0 は使わない）。
    id_map を渡した場合はそれを引き継ぎ、未知の値にだけ新しい id を振る。
    """
    attr = db.schema.attribute(attribute)
    if attr.kind is not AttributeKind.CATEGORICAL:
        raise SchemaError(f"カテゴリ属性ではありません: {attribute}")
    id_column = attribute + ID_SUFFIX
    if db.has_column(id_column):
        raise SchemaError(f"id 列は作成済みです: {id_column}")

    mapping: dict[str, int] = dict(id_map or {})
    if any(v < 1 for v in mapping.values()):
        raise SchemaError(f"{attribute}: id は 1 以上です")
    if len(set(mapping.values())) != len(mapping):
        raise SchemaError(f"{attribute}: id が重複しています")
    next_id = max(mapping.values(), default=0) + 1
    order = list(attr.categories or []) + [str(rec.get(attribute, "")) for rec in db.plaintext]
    for value in order:
        if value not in mapping:
            mapping[value] = next_id
            next_id += 1
    if next_id - 1 >= db.spec.order:
        raise FieldOverflowError(f"{attribute}: id が体に収まりません")

    ids = [mapping[str(rec.get(attribute, ""))] for rec in db.plaintext]
    column = Column(id_column, AttributeKind.NUMERIC, db.s, 1, source=attribute)
    data = tuple(row + (i,) for row, i in zip(db.data, ids))
    id_maps = {**db.id_maps, attribute: mapping}
    logger.info("Assigned %d ids for %s", len(mapping), attribute)
    return replace(db, columns=db.columns + (column,), data=data, id_maps=id_maps), mapping


def project_essential(db: DatabaseMatrix) -> DatabaseMatrix:
    """集約対象の列だけを残す（レコード順は保つ）。"""
    keep = set(db.schema.aggregation_set)
    if not keep:
        raise SchemaError("aggregation_set が空です")
    missing = keep - {c.name for c in db.columns}
    if missing:
        raise SchemaError(f"D に存在しない集約対象列です: {sorted(missing)}")

    selected = [c for c in db.columns if c.name in keep]
    columns = []
    offset = 0
    for c in selected:
        columns.append(replace(c, offset=offset))
        offset += c.words
    picks = [i for c in selected for i in range(c.offset, c.offset + c.words)]
    data = tuple(tuple(row[i] for i in picks) for row in db.data)
    logger.debug("Projected %d words down to %d essential words", db.s, offset)
    return replace(db, columns=tuple(columns), data=data)


def db_multiply(v: FieldVector, db: DatabaseMatrix) -> FieldVector:
    """v·D を計算する（長さ s）。v の 0 成分のレコードは読まない。"""
    if len(v) != db.r:
        raise DimensionError(f"ベクトル長 {len(v)} がレコード数 r={db.r} と一致しません")
    if db.s == 0:
        raise DimensionError("D のワード数が 0 です")
    spec = v.spec
    if spec != db.spec:
        raise DimensionError(f"異なる体です: {spec} と {db.spec}")

    s = db.s
    if spec.is_prime:
        acc = [0] * s
        for coeff, row in zip(v.values, db.data):
            if coeff:
                for w in range(s):
                    cell = row[w]
                    if cell:
                        acc[w] += coeff * cell
        modulus = spec.modulus
        return FieldVector(spec, tuple(a % modulus for a in acc))

    acc = [0] * s
    mul = spec.mul
    for coeff, row in zip(v.values, db.data):
        if coeff:
            for w in range(s):
                cell = row[w]
                if cell:
                    acc[w] ^= mul(coeff, cell)
    return FieldVector(spec, tuple(acc))


def summable_columns(db: DatabaseMatrix) -> list[str]:
    """和を取る列（aggregation_set のうち日付でないもの）"""
    names = []
    for name in db.schema.aggregation_set:
        if not db.has_column(name):
            continue
        if db.schema.has(name) and db.schema.attribute(name).date_format:
            continue
        names.append(name)
    return names


def check_headroom(db: DatabaseMatrix, names: Sequence[str] | None = None) -> None:
    """r·max < 法 を確かめ、どのレコード集合の和も法を超えないことを保証する。"""
    if not db.spec.is_prime:
        raise FieldOverflowError("二元体では整数の和を表せません")
    for name in names if names is not None else summable_columns(db):
        peak = max(db.values(name), default=0)
        if db.r * peak >= db.spec.modulus:
            raise FieldOverflowError(
                f"{name}: r·max = {db.r}·{peak} が法 {db.spec.modulus} 以上です"
            )
