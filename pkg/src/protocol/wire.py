"""PAQ1 通信メッセージ（ビッグエンディアン）

要求: magic "PAQ1" | u8 1 | u16 キーワード長 | キーワード | u16 k | x | u32 p | p 個の元
応答: magic "PAQ1" | u8 2 | u8 status | x | u32 s | s 個の元

元と x はいずれも体の幅 w = ceil(word_bits/8) バイト。
"""

import struct
from dataclasses import dataclass
from enum import IntEnum

from src.crypto.field import FieldSpec, FieldVector
from src.crypto.shamir import QueryShare
from src.errors import FieldValueError, WireFormatError

MAGIC = b"PAQ1"
MSG_REQUEST = 1
MSG_RESPONSE = 2


class ResponseStatus(IntEnum):
    OK = 0
    UNKNOWN_KEYWORD = 1
    DIMENSION_ERROR = 2
    COORDINATE_ERROR = 3


@dataclass(frozen=True)
class ServerResponse:
    """サーバ応答。payload は status が OK のときだけ存在する。"""

    x: int
    status: ResponseStatus
    payload: FieldVector | None = None
    vspm_seconds: float = 0.0
    multiply_seconds: float = 0.0

    def __post_init__(self):
        if (self.payload is not None) != (self.status is ResponseStatus.OK):
            raise WireFormatError("payload は status=OK のときだけ持ちます")

    @property
    def ok(self) -> bool:
        return self.status is ResponseStatus.OK


def request_header_size(spec: FieldSpec, keyword: str) -> int:
    return len(MAGIC) + 1 + 2 + len(keyword.encode("utf-8")) + 2 + spec.byte_width + 4


def response_header_size(spec: FieldSpec) -> int:
    return len(MAGIC) + 1 + 1 + spec.byte_width + 4


def request_size(spec: FieldSpec, keyword: str, p: int) -> int:
    return request_header_size(spec, keyword) + p * spec.byte_width


def response_size(spec: FieldSpec, s: int) -> int:
    return response_header_size(spec) + s * spec.byte_width


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WireFormatError(
                f"メッセージが途中で終わっています（位置 {self.pos} から {n} バイト）"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def header(self, expected_type: int) -> None:
        if self.take(len(MAGIC)) != MAGIC:
            raise WireFormatError("magic が PAQ1 ではありません")
        (msg_type,) = self.unpack(">B")
        if msg_type != expected_type:
            raise WireFormatError(f"メッセージ種別が不正です: {msg_type} (期待値 {expected_type})")

    def vector(self, spec: FieldSpec, length: int) -> FieldVector | None:
        data = self.take(length * spec.byte_width)
        if length == 0:
            return None
        try:
            return FieldVector.from_bytes(spec, data, length)
        except FieldValueError as e:
            raise WireFormatError(f"体の元として不正な値です: {e}") from e

    def element(self, spec: FieldSpec) -> int:
        try:
            return spec.from_bytes(self.take(spec.byte_width))
        except FieldValueError as e:
            raise WireFormatError(f"座標が不正です: {e}") from e

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise WireFormatError(f"末尾に余分なバイトがあります: {len(self.data) - self.pos}")


def encode_request(share: QueryShare) -> bytes:
    spec = share.q.spec
    keyword = share.hint.encode("utf-8")
    if len(keyword) > 0xFFFF:
        raise WireFormatError("キーワードが長すぎます")
    return b"".join([
        MAGIC,
        struct.pack(">BH", MSG_REQUEST, len(keyword)),
        keyword,
        struct.pack(">H", share.k),
        spec.to_bytes(share.x),
        struct.pack(">I", len(share.q)),
        share.q.to_bytes(),
    ])


def decode_request(data: bytes, spec: FieldSpec) -> QueryShare:
    cursor = _Cursor(data)
    cursor.header(MSG_REQUEST)
    (length,) = cursor.unpack(">H")
    try:
        hint = cursor.take(length).decode("utf-8")
    except UnicodeDecodeError as e:
        raise WireFormatError("キーワードが UTF-8 ではありません") from e
    (k,) = cursor.unpack(">H")
    x = cursor.element(spec)
    (p,) = cursor.unpack(">I")
    if p == 0:
        raise WireFormatError("クエリベクトルが空です")
    q = cursor.vector(spec, p)
    cursor.finish()
    return QueryShare(x=x, q=q, hint=hint, k=k)


def encode_response(response: ServerResponse, spec: FieldSpec) -> bytes:
    payload = response.payload
    return b"".join([
        MAGIC,
        struct.pack(">BB", MSG_RESPONSE, int(response.status)),
        spec.to_bytes(response.x),
        struct.pack(">I", len(payload) if payload is not None else 0),
        payload.to_bytes() if payload is not None else b"",
    ])


def decode_response(data: bytes, spec: FieldSpec) -> ServerResponse:
    cursor = _Cursor(data)
    cursor.header(MSG_RESPONSE)
    (raw_status,) = cursor.unpack(">B")
    try:
        status = ResponseStatus(raw_status)
    except ValueError:
        raise WireFormatError(f"未知の status です: {raw_status}") from None
    x = cursor.element(spec)
    (s,) = cursor.unpack(">I")
    payload = cursor.vector(spec, s)
    cursor.finish()
    if (payload is not None) != (status is ResponseStatus.OK):
        raise WireFormatError(f"status={status.name} と payload 長 {s} が矛盾しています")
    return ServerResponse(x=x, status=status, payload=payload)
