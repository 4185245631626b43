"""集約クエリ索引（IAQ）

標準集約ベクトル、単純索引、圧縮列格納（CCS）、ベクトル×疎行列（VspM）。
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from src.crypto.field import FieldSpec, FieldVector
from src.errors import CCSFormatError, DimensionError, FieldMismatchError


@dataclass(frozen=True)
class AggregateVector:
    """(0,1) ベクトル。ones は 1 の立つ列位置（0 始まり、昇順）。"""

    length: int
    ones: tuple[int, ...]

    def __post_init__(self):
        if list(self.ones) != sorted(set(self.ones)):
            raise DimensionError("ones は重複のない昇順である必要があります")
        if self.ones and not (0 <= self.ones[0] and self.ones[-1] < self.length):
            raise DimensionError(f"列位置が範囲外です (r={self.length})")

    @property
    def weight(self) -> int:
        """ハミング重み |I|"""
        return len(self.ones)

    def to_dense(self) -> list[int]:
        row = [0] * self.length
        for c in self.ones:
            row[c] = 1
        return row

    def to_vector(self, spec: FieldSpec) -> FieldVector:
        return FieldVector(spec, tuple(self.to_dense()))


@dataclass(frozen=True)
class CCS:
    """圧縮列格納。values が None のときは全非零要素が 1（構造のみ）。"""

    n_rows: int
    n_cols: int
    col_ptr: tuple[int, ...]
    row_idx: tuple[int, ...]
    values: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.col_ptr) != self.n_cols + 1:
            raise CCSFormatError("col_ptr の長さは r+1 です")
        if self.col_ptr[0] != 0 or self.col_ptr[-1] != len(self.row_idx):
            raise CCSFormatError("col_ptr[0]=0, col_ptr[r]=nnz である必要があります")
        if any(a > b for a, b in zip(self.col_ptr, self.col_ptr[1:])):
            raise CCSFormatError("col_ptr は非減少である必要があります")
        if any(not 0 <= i < self.n_rows for i in self.row_idx):
            raise CCSFormatError("row_idx が範囲外です")
        if self.values is not None and len(self.values) != len(self.row_idx):
            raise CCSFormatError("values の長さが nnz と一致しません")

    @property
    def nnz(self) -> int:
        return len(self.row_idx)

    @property
    def valued(self) -> bool:
        return self.values is not None

    @cached_property
    def nonzero_columns(self) -> tuple[int, ...]:
        return tuple(
            c for c in range(self.n_cols) if self.col_ptr[c] < self.col_ptr[c + 1]
        )

    def column(self, c: int) -> list[tuple[int, int]]:
        """列 c の (行, 値) の組"""
        start, end = self.col_ptr[c], self.col_ptr[c + 1]
        if self.values is None:
            return [(self.row_idx[i], 1) for i in range(start, end)]
        return [(self.row_idx[i], self.values[i]) for i in range(start, end)]

    def entries(self):
        """(行, 列, 値) を列優先で列挙する。"""
        for c in range(self.n_cols):
            for row, value in self.column(c):
                yield row, c, value


def ccs_from_dense(matrix: Sequence[Sequence[int]], valued: bool = False) -> CCS:
    """密行列を CCS に変換する。valued=False では非零要素を 1 とみなす。"""
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    for row in matrix:
        if len(row) != n_cols:
            raise DimensionError("行の長さが揃っていません")

    col_ptr = [0]
    row_idx: list[int] = []
    values: list[int] = []
    for c in range(n_cols):
        for r in range(n_rows):
            v = matrix[r][c]
            if v:
                row_idx.append(r)
                values.append(v)
        col_ptr.append(len(row_idx))
    return CCS(
        n_rows, n_cols, tuple(col_ptr), tuple(row_idx),
        tuple(values) if valued else None,
    )


def ccs_to_dense(ccs: CCS) -> list[list[int]]:
    dense = [[0] * ccs.n_cols for _ in range(ccs.n_rows)]
    for r, c, v in ccs.entries():
        dense[r][c] = v
    return dense


@dataclass(frozen=True)
class SimpleIAQ:
    """p×r の (0,1) 行列 Π。各行は検索語 row_labels[i] に対応する標準集約ベクトル。

    label は索引ファミリ名（例: "group:gender"）。
    """

    storage: CCS
    row_labels: tuple[str, ...]
    label: str = ""

    def __post_init__(self):
        if self.storage.valued:
            raise CCSFormatError("SimpleIAQ は構造のみの CCS を持ちます")
        if len(self.row_labels) != self.storage.n_rows:
            raise DimensionError("row_labels の数が p と一致しません")

    @property
    def p(self) -> int:
        return self.storage.n_rows

    @property
    def r(self) -> int:
        return self.storage.n_cols

    @property
    def nnz(self) -> int:
        return self.storage.nnz

    @classmethod
    def from_dense(
        cls,
        matrix: Sequence[Sequence[int]],
        row_labels: Sequence[str] | None = None,
        label: str = "",
    ) -> "SimpleIAQ":
        for row in matrix:
            if any(v not in (0, 1) for v in row):
                raise DimensionError("SimpleIAQ は (0,1) 行列です")
        labels = tuple(row_labels) if row_labels is not None else tuple(
            str(i + 1) for i in range(len(matrix))
        )
        return cls(ccs_from_dense(matrix), labels, label)

    def to_dense(self) -> list[list[int]]:
        return ccs_to_dense(self.storage)

    @cached_property
    def rows(self) -> tuple[AggregateVector, ...]:
        ones: list[list[int]] = [[] for _ in range(self.p)]
        for r, c, _ in self.storage.entries():
            ones[r].append(c)
        return tuple(AggregateVector(self.r, tuple(cols)) for cols in ones)

    def row(self, g: int) -> AggregateVector:
        """e_g · Π（g は 1 始まり）"""
        return self.rows[g - 1]

    def row_weights(self) -> list[int]:
        return [v.weight for v in self.rows]


@dataclass(frozen=True)
class BatchedCCS:
    """u バッチ索引のバケット。行列多項式 Π(x) を x で評価した値を持つ。

    family_labels[j] はバッチ位置 j に符号化された索引ファミリ（公開情報）。
    """

    storage: CCS
    spec: FieldSpec
    x: int
    u: int
    family_labels: tuple[str, ...]
    row_labels: tuple[str, ...] = field(default=())
    keyword: str = ""

    def __post_init__(self):
        if not self.storage.valued:
            raise CCSFormatError("BatchedCCS は値付きの CCS を持ちます")
        if any(v == 0 for v in self.storage.values):
            raise CCSFormatError("構造的な零要素は格納しません")
        if len(self.family_labels) != self.u:
            raise DimensionError("family_labels の数が u と一致しません")

    @property
    def p(self) -> int:
        return self.storage.n_rows

    @property
    def r(self) -> int:
        return self.storage.n_cols

    @property
    def nnz(self) -> int:
        return self.storage.nnz

    def family_at(self, position: int) -> str | None:
        """バッチ位置のファミリ。u=1 の索引は定数多項式なので全位置で同じ。"""
        if self.u == 1:
            return self.family_labels[0]
        if 0 <= position < self.u:
            return self.family_labels[position]
        return None


def vspm(
    q: FieldVector,
    m: SimpleIAQ | BatchedCCS,
    skip_zero_columns: bool = True,
) -> FieldVector:
    """q · Π を F 上で計算する（長さ r）。

    skip_zero_columns が真なら非零要素のない列には触れない。結果はどちらでも同じ。
    """
    if len(q) != m.p:
        raise DimensionError(f"クエリ長 {len(q)} が索引の行数 p={m.p} と一致しません")
    if isinstance(m, BatchedCCS) and m.spec != q.spec:
        raise FieldMismatchError(f"異なる体です: {q.spec} と {m.spec}")

    spec = q.spec
    storage = m.storage
    col_ptr = storage.col_ptr
    row_idx = storage.row_idx
    values = storage.values
    qv = q.values
    out = [0] * m.r

    columns = storage.nonzero_columns if skip_zero_columns else range(m.r)
    if values is None:
        for c in columns:
            out[c] = spec.sum(qv[row_idx[i]] for i in range(col_ptr[c], col_ptr[c + 1]))
    else:
        mul = spec.mul
        for c in columns:
            out[c] = spec.sum(
                mul(qv[row_idx[i]], values[i]) for i in range(col_ptr[c], col_ptr[c + 1])
            )
    return FieldVector(spec, tuple(out))


@dataclass
class ValidationReport:
    valid: bool
    strict: bool
    offending_rows: list[tuple[int, int]] = field(default_factory=list)  # (行 1 始まり, 重み)

    def describe(self) -> str:
        if self.valid:
            return "ok"
        rows = ", ".join(f"row {g} (weight {w})" for g, w in self.offending_rows)
        return f"invalid: {rows}"


def validate_simple_iaq(m: SimpleIAQ, strict: bool = False) -> ValidationReport:
    """行の重みを検査する。strict では 2 <= |I| <= r、通常は 0 <= |I| <= r。"""
    low = 2 if strict else 0
    offending = [
        (g + 1, w) for g, w in enumerate(m.row_weights()) if not low <= w <= m.r
    ]
    return ValidationReport(valid=not offending, strict=strict, offending_rows=offending)
