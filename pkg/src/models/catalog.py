"""公開メタデータ（カタログ）

クライアントがクエリを計画するのに必要な情報だけを持つ。
体、サーバ座標、応答のワード配置、キーワードごとの p / r / u / ファミリ名 / 行ラベル。
"""

from pathlib import Path

from pydantic import BaseModel

from src.crypto.field import FieldSpec
from src.errors import SchemaError
from src.models.dataset import DatabaseMatrix, Schema


class ColumnInfo(BaseModel):
    name: str
    kind: str
    offset: int
    words: int = 1
    source: str | None = None


class KeywordInfo(BaseModel):
    keyword: str
    p: int
    r: int
    u: int
    family_labels: list[str]
    row_labels: list[str]

    def basis_of(self, value: str) -> int:
        """行ラベル（グループ値）→ 基底ベクトルの添字（1 始まり）"""
        try:
            return self.row_labels.index(value) + 1
        except ValueError:
            raise SchemaError(f"{self.keyword}: 未知のグループ値です: {value}") from None


class Catalog(BaseModel):
    field_spec: str
    coordinates: list[int]
    columns: list[ColumnInfo]
    record_schema: Schema
    keywords: list[KeywordInfo]
    essential: bool = False

    @property
    def spec(self) -> FieldSpec:
        return FieldSpec.parse(self.field_spec)

    @property
    def s(self) -> int:
        return sum(c.words for c in self.columns)

    def keyword(self, name: str) -> KeywordInfo:
        for kw in self.keywords:
            if kw.keyword == name:
                return kw
        raise SchemaError(f"未知のキーワードです: {name}")

    def word(self, name: str) -> int | None:
        """列名 → 応答ベクトル中の位置。応答に含まれない列は None。"""
        for c in self.columns:
            if c.name == name:
                return c.offset
        return None

    @staticmethod
    def columns_of(db: DatabaseMatrix) -> list[ColumnInfo]:
        return [
            ColumnInfo(name=c.name, kind=c.kind.value, offset=c.offset, words=c.words, source=c.source)
            for c in db.columns
        ]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2, exclude_none=True), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Catalog":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Catalog not found: {path}")
        return cls.model_validate_json(path.read_text(encoding="utf-8"))
