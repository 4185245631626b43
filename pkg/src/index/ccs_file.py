"""CCS ファイル形式（IAQ1）の読み書き

リトルエンディアン:
    magic "IAQ1", u8 kind, u64 p, u64 r, u64 nnz, u64 col_ptr[r+1], u64 row_idx[nnz]
    kind=1,2: u32 長 + 体指定文字列, nnz 個の体の元（体の幅、ビッグエンディアン）
    kind=2  : u32 u, x（体の幅）, u32 長 + キーワード,
              u 個の (u32 長 + ファミリ名), p 個の (u32 長 + 行ラベル)
"""

import logging
import struct
from pathlib import Path

from src.crypto.field import FieldSpec
from src.errors import CCSFormatError
from src.index.iaq import CCS, BatchedCCS, SimpleIAQ

logger = logging.getLogger(__name__)

MAGIC = b"IAQ1"
KIND_STRUCTURE = 0
KIND_VALUED = 1
KIND_BUCKET = 2

_HEADER = struct.Struct("<4sBQQQ")


class _Reader:
    """バイト列を先頭から読み進める。読み過ぎは CCSFormatError。"""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CCSFormatError("ファイルが途中で終わっています")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def text(self) -> str:
        (length,) = self.unpack("<I")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise CCSFormatError("文字列が UTF-8 ではありません") from None

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise CCSFormatError(f"末尾に余分なデータがあります ({len(self.data) - self.pos} bytes)")


def _text(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _encode_structure(ccs: CCS, kind: int) -> bytes:
    return b"".join([
        _HEADER.pack(MAGIC, kind, ccs.n_rows, ccs.n_cols, ccs.nnz),
        struct.pack(f"<{len(ccs.col_ptr)}Q", *ccs.col_ptr),
        struct.pack(f"<{ccs.nnz}Q", *ccs.row_idx),
    ])


def _decode_structure(reader: _Reader) -> tuple[int, int, int, tuple, tuple]:
    magic, kind, p, r, nnz = reader.unpack(_HEADER.format)
    if magic != MAGIC:
        raise CCSFormatError(f"マジックナンバーが不正です: {magic!r}")
    if kind not in (KIND_STRUCTURE, KIND_VALUED, KIND_BUCKET):
        raise CCSFormatError(f"未知の種別です: {kind}")
    if reader.remaining < 8 * (r + 1 + nnz):
        raise CCSFormatError(
            f"ヘッダの大きさ (r={r}, nnz={nnz}) に対してファイルが短すぎます"
        )
    col_ptr = reader.unpack(f"<{r + 1}Q")
    row_idx = reader.unpack(f"<{nnz}Q")
    return kind, p, r, col_ptr, row_idx


def encode_simple_iaq(iaq: SimpleIAQ) -> bytes:
    return _encode_structure(iaq.storage, KIND_STRUCTURE)


def decode_simple_iaq(
    data: bytes,
    row_labels: tuple[str, ...] | None = None,
    label: str = "",
) -> SimpleIAQ:
    reader = _Reader(data)
    kind, p, r, col_ptr, row_idx = _decode_structure(reader)
    if kind != KIND_STRUCTURE:
        raise CCSFormatError(f"構造のみの CCS ではありません (kind={kind})")
    reader.finish()
    labels = row_labels if row_labels is not None else tuple(str(i + 1) for i in range(p))
    return SimpleIAQ(CCS(p, r, col_ptr, row_idx), tuple(labels), label)


def encode_valued(ccs: CCS, spec: FieldSpec) -> bytes:
    if not ccs.valued:
        raise CCSFormatError("値を持たない CCS です")
    return b"".join([
        _encode_structure(ccs, KIND_VALUED),
        _text(spec.to_text()),
        b"".join(spec.to_bytes(v) for v in ccs.values),
    ])


def decode_valued(data: bytes) -> tuple[CCS, FieldSpec]:
    reader = _Reader(data)
    kind, p, r, col_ptr, row_idx = _decode_structure(reader)
    if kind != KIND_VALUED:
        raise CCSFormatError(f"値付き CCS ではありません (kind={kind})")
    spec = FieldSpec.parse(reader.text())
    values = tuple(spec.from_bytes(reader.take(spec.byte_width)) for _ in row_idx)
    reader.finish()
    return CCS(p, r, col_ptr, row_idx, values), spec


def encode_bucket(bucket: BatchedCCS) -> bytes:
    spec = bucket.spec
    parts = [
        _encode_structure(bucket.storage, KIND_BUCKET),
        _text(spec.to_text()),
        b"".join(spec.to_bytes(v) for v in bucket.storage.values),
        struct.pack("<I", bucket.u),
        spec.to_bytes(bucket.x),
        _text(bucket.keyword),
    ]
    parts += [_text(label) for label in bucket.family_labels]
    parts += [_text(label) for label in bucket.row_labels]
    return b"".join(parts)


def decode_bucket(data: bytes) -> BatchedCCS:
    reader = _Reader(data)
    kind, p, r, col_ptr, row_idx = _decode_structure(reader)
    if kind != KIND_BUCKET:
        raise CCSFormatError(f"バケットファイルではありません (kind={kind})")
    spec = FieldSpec.parse(reader.text())
    width = spec.byte_width
    values = tuple(spec.from_bytes(reader.take(width)) for _ in row_idx)
    (u,) = reader.unpack("<I")
    x = spec.from_bytes(reader.take(width))
    keyword = reader.text()
    family_labels = tuple(reader.text() for _ in range(u))
    row_labels = tuple(reader.text() for _ in range(p))
    reader.finish()
    return BatchedCCS(
        storage=CCS(p, r, col_ptr, row_idx, values),
        spec=spec,
        x=x,
        u=u,
        family_labels=family_labels,
        row_labels=row_labels,
        keyword=keyword,
    )


def write_simple_iaq(path: str | Path, iaq: SimpleIAQ) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_simple_iaq(iaq))
    logger.info("Wrote index %s (p=%d, r=%d, nnz=%d) to %s", iaq.label, iaq.p, iaq.r, iaq.nnz, path)
    return path


def read_simple_iaq(path: str | Path, row_labels=None, label: str = "") -> SimpleIAQ:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CCS file not found: {path}")
    return decode_simple_iaq(path.read_bytes(), row_labels, label)


def write_bucket(path: str | Path, bucket: BatchedCCS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_bucket(bucket))
    logger.debug("Wrote bucket %s x=%d to %s", bucket.keyword, bucket.x, path)
    return path


def read_bucket(path: str | Path) -> BatchedCCS:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Bucket file not found: {path}")
    return decode_bucket(path.read_bytes())
