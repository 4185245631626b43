"""単純索引・CCS・VspM のテスト"""

import random
import struct
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.crypto.field import FieldVector
from src.errors import CCSFormatError, DimensionError, FieldMismatchError
from src.index.ccs_file import (
    decode_simple_iaq,
    decode_valued,
    encode_simple_iaq,
    encode_valued,
    read_simple_iaq,
    write_simple_iaq,
)
from src.index.iaq import (
    CCS,
    AggregateVector,
    SimpleIAQ,
    ccs_from_dense,
    ccs_to_dense,
    validate_simple_iaq,
    vspm,
)
from tests.helpers import GF256, PI_PATIENT, PRIME


def test_aggregate_vector():
    """1 の位置・重み・密表現"""
    v = AggregateVector(6, (0, 3))
    assert v.weight == 2
    assert v.to_dense() == [1, 0, 0, 1, 0, 0]
    assert v.to_vector(PRIME).values == (1, 0, 0, 1, 0, 0)
    with pytest.raises(DimensionError):
        AggregateVector(6, (3, 0))
    with pytest.raises(DimensionError):
        AggregateVector(6, (6,))


def test_simple_iaq_rows_are_aggregate_vectors():
    """e_g · Π が g 行目の集約ベクトル"""
    iaq = SimpleIAQ.from_dense(PI_PATIENT, ["1", "2", "3", "4"], "group:patient")
    assert (iaq.p, iaq.r, iaq.nnz) == (4, 6, 6)
    assert iaq.row(3).ones == (2, 4)
    assert iaq.row_weights() == [2, 1, 2, 1]
    assert iaq.to_dense() == PI_PATIENT
    with pytest.raises(DimensionError):
        SimpleIAQ.from_dense([[0, 2]])
    with pytest.raises(DimensionError):
        SimpleIAQ(ccs_from_dense(PI_PATIENT), ("a",))


def test_ccs_layout():
    """Π[patient] の CCS は列ごとに 1 つの非零要素"""
    ccs = ccs_from_dense(PI_PATIENT)
    assert ccs.col_ptr == (0, 1, 2, 3, 4, 5, 6)
    assert ccs.row_idx == (0, 1, 2, 0, 2, 3)
    assert ccs_to_dense(ccs) == PI_PATIENT
    assert ccs.nonzero_columns == tuple(range(6))


@pytest.mark.parametrize("kwargs", [
    dict(n_rows=2, n_cols=2, col_ptr=(0, 1), row_idx=(0,)),           # 長さ r+1 でない
    dict(n_rows=2, n_cols=2, col_ptr=(1, 1, 1), row_idx=(0,)),        # col_ptr[0] != 0
    dict(n_rows=2, n_cols=2, col_ptr=(0, 2, 1), row_idx=(0,)),        # 減少
    dict(n_rows=2, n_cols=2, col_ptr=(0, 1, 2), row_idx=(0, 2)),      # 行が範囲外
    dict(n_rows=2, n_cols=1, col_ptr=(0, 1), row_idx=(0,), values=(1, 2)),
])
def test_ccs_validation(kwargs):
    """不正な CCS は CCSFormatError"""
    with pytest.raises(CCSFormatError):
        CCS(**kwargs)


def test_vspm_selects_row():
    """基底ベクトル e_g との積は g 行目"""
    iaq = SimpleIAQ.from_dense(PI_PATIENT)
    for g in range(1, 5):
        q = FieldVector.basis(PRIME, 4, g)
        assert list(vspm(q, iaq).values) == PI_PATIENT[g - 1]


def test_vspm_skip_zero_columns_is_equivalent():
    """全 0 列の飛ばしは結果を変えない"""
    rnd = random.Random(11)
    for spec in (PRIME, GF256):
        for _ in range(20):
            dense = [[int(rnd.random() < 0.2) for _ in range(30)] for _ in range(5)]
            iaq = SimpleIAQ.from_dense(dense)
            q = FieldVector(spec, tuple(spec.random_int(rnd) for _ in range(5)))
            assert vspm(q, iaq, skip_zero_columns=True) == vspm(q, iaq, skip_zero_columns=False)


def test_vspm_errors():
    """長さ不一致は DimensionError"""
    iaq = SimpleIAQ.from_dense(PI_PATIENT)
    with pytest.raises(DimensionError):
        vspm(FieldVector.zeros(PRIME, 3), iaq)


def test_vspm_field_mismatch_on_bucket():
    """バケットと異なる体のクエリは FieldMismatchError"""
    from src.index.batch import batch_indexes

    iaq = SimpleIAQ.from_dense(PI_PATIENT)
    (bucket,) = batch_indexes([iaq], [5], PRIME)
    with pytest.raises(FieldMismatchError):
        vspm(FieldVector.zeros(GF256, 4), bucket)


def test_row_weight_validation():
    """通常は 0 <= |I| <= r、strict では 2 以上"""
    iaq = SimpleIAQ.from_dense(PI_PATIENT)
    assert validate_simple_iaq(iaq).valid
    report = validate_simple_iaq(iaq, strict=True)
    assert not report.valid
    assert report.offending_rows == [(2, 1), (4, 1)]
    assert report.describe().startswith("invalid")


def test_ccs_file_golden_bytes():
    """Π[patient] の IAQ1 ファイルはリトルエンディアンの固定レイアウト"""
    iaq = SimpleIAQ.from_dense(PI_PATIENT)
    expected = (
        b"IAQ1" + struct.pack("<BQQQ", 0, 4, 6, 6)
        + struct.pack("<7Q", 0, 1, 2, 3, 4, 5, 6)
        + struct.pack("<6Q", 0, 1, 2, 0, 2, 3)
    )
    assert encode_simple_iaq(iaq) == expected
    assert decode_simple_iaq(expected).to_dense() == PI_PATIENT


def test_ccs_file_roundtrip_on_disk(tmp_path):
    """書き出した索引は同じ行列として読み戻せる"""
    iaq = SimpleIAQ.from_dense(PI_PATIENT, ["1", "2", "3", "4"], "group:patient")
    path = write_simple_iaq(tmp_path / "patient.ccs", iaq)
    back = read_simple_iaq(path, iaq.row_labels, iaq.label)
    assert back == iaq
    with pytest.raises(FileNotFoundError):
        read_simple_iaq(tmp_path / "missing.ccs")


def test_valued_ccs_uses_big_endian_elements():
    """値付き CCS の元は体の幅のビッグエンディアン"""
    ccs = ccs_from_dense([[0, 258], [3, 0]], valued=True)
    data = encode_valued(ccs, PRIME)
    assert data.endswith(b"\x00\x00\x00\x03\x00\x00\x01\x02")
    back, spec = decode_valued(data)
    assert back == ccs and spec == PRIME


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXX" + d[4:],                 # magic
    lambda d: d[:4] + b"\x09" + d[5:],         # 種別
    lambda d: d[:-3],                          # 途中で終わる
    lambda d: d + b"\x00",                     # 余分なバイト
    lambda d: d[:13] + struct.pack("<Q", 2 ** 64 - 1) + d[21:],  # 巨大な r
    lambda d: d[:21] + struct.pack("<Q", 2 ** 60) + d[29:],      # 巨大な nnz
])
def test_corrupted_ccs_file_rejected(mutate):
    """壊れた CCS ファイルは CCSFormatError"""
    data = encode_simple_iaq(SimpleIAQ.from_dense(PI_PATIENT))
    with pytest.raises(CCSFormatError):
        decode_simple_iaq(mutate(data))


def test_corrupted_row_index_rejected():
    """範囲外の行番号は CCS の検証で弾かれる"""
    data = bytearray(encode_simple_iaq(SimpleIAQ.from_dense(PI_PATIENT)))
    offset = 4 + struct.calcsize("<BQQQ") + 7 * 8
    data[offset:offset + 8] = struct.pack("<Q", 99)
    with pytest.raises(CCSFormatError):
        decode_simple_iaq(bytes(data))
