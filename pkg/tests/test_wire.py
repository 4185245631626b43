"""PAQ1 通信メッセージのテスト"""

import struct
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.crypto.field import FieldVector
from src.crypto.shamir import QueryShare
from src.errors import WireFormatError
from src.protocol.wire import (
    ResponseStatus,
    ServerResponse,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
    request_size,
    response_size,
)
from tests.helpers import GF256, PRIME

SHARE = QueryShare(x=4, q=FieldVector(PRIME, (0, 1, 0, 0)), hint="ab", k=1)


def test_request_golden_bytes():
    """要求はビッグエンディアンの固定レイアウト"""
    expected = (
        b"PAQ1\x01" + b"\x00\x02ab" + b"\x00\x01" + b"\x00\x00\x00\x04"
        + struct.pack(">I", 4) + struct.pack(">4I", 0, 1, 0, 0)
    )
    data = encode_request(SHARE)
    assert data == expected
    assert decode_request(data, PRIME) == SHARE


def test_response_golden_bytes():
    """応答は status・座標・s 個の元"""
    response = ServerResponse(x=5, status=ResponseStatus.OK, payload=FieldVector(GF256, (7, 0, 255)))
    data = encode_response(response, GF256)
    assert data == b"PAQ1\x02\x00\x05\x00\x00\x00\x03\x07\x00\xff"
    assert decode_response(data, GF256) == response

    failed = ServerResponse(x=5, status=ResponseStatus.UNKNOWN_KEYWORD)
    assert encode_response(failed, GF256) == b"PAQ1\x02\x01\x05\x00\x00\x00\x00"
    assert not decode_response(encode_response(failed, GF256), GF256).ok


def test_message_sizes():
    """要求は p·w、応答は s·w に比例する"""
    assert request_size(PRIME, "patient", 4) == 24 + 16
    assert len(encode_request(QueryShare(x=4, q=FieldVector.zeros(PRIME, 4), hint="patient"))) == 40
    assert response_size(PRIME, 6) == 14 + 24
    assert response_size(GF256, 6) == 11 + 6
    assert request_size(PRIME, "k", 1000) - request_size(PRIME, "k", 999) == 4


@pytest.mark.parametrize("mutate", [
    lambda d: b"PAQ2" + d[4:],          # magic
    lambda d: d[:4] + b"\x02" + d[5:],  # 応答として送られた
    lambda d: d[:-1],                   # 途中で終わる
    lambda d: d + b"\x00",              # 余分なバイト
    lambda d: d[:-4] + b"\xff\xff\xff\xff",  # 法以上の元
])
def test_malformed_requests(mutate):
    """壊れた要求は WireFormatError"""
    with pytest.raises(WireFormatError):
        decode_request(mutate(encode_request(SHARE)), PRIME)


def test_empty_query_vector_rejected():
    """p=0 の要求は受け付けない"""
    data = b"PAQ1\x01\x00\x00\x00\x01\x00\x00\x00\x04\x00\x00\x00\x00"
    with pytest.raises(WireFormatError):
        decode_request(data, PRIME)


def test_malformed_responses():
    """未知の status と、status と payload の食い違い"""
    with pytest.raises(WireFormatError):
        decode_response(b"PAQ1\x02\x09\x05\x00\x00\x00\x00", GF256)
    with pytest.raises(WireFormatError):
        decode_response(b"PAQ1\x02\x00\x05\x00\x00\x00\x00", GF256)
    with pytest.raises(WireFormatError):
        decode_response(b"PAQ1\x02\x01\x05\x00\x00\x00\x01\x07", GF256)
    with pytest.raises(WireFormatError):
        ServerResponse(x=5, status=ResponseStatus.OK)
