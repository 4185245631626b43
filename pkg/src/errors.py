"""例外定義

すべて ValueError のサブクラスなので、呼び出し側は ValueError でまとめて捕捉できる。
"""


class IAQError(ValueError):
    """本パッケージの例外の基底クラス"""


class FieldMismatchError(IAQError):
    """異なる有限体の元を組み合わせた"""


class NonInvertibleError(IAQError):
    """0 の逆元を求めた"""


class FieldValueError(IAQError):
    """体の位数を超える値、または不正な体指定"""


class CoordinateError(IAQError):
    """評価点の重複、予約点との衝突"""


class InterpolationError(IAQError):
    """補間点の不足・重複・ベクトル長の不一致"""


class ShareConfigError(IAQError):
    """サーバ数がしきい値に対して不足している"""


class DimensionError(IAQError):
    """ベクトルと行列の次元が合わない"""


class CorruptedBucketError(IAQError):
    """復元した索引が (0,1) 行列にならない"""


class CorruptedResponseError(IAQError):
    """復元した集約値が後処理の前提を満たさない"""


class InsufficientResponsesError(IAQError):
    """正常応答の数が復元に必要な数に満たない"""


class UnsupportedQueryError(IAQError):
    """サポート外のクエリ構文、または公開索引で処理できないクエリ"""


class QueryParseError(IAQError):
    """クエリ文字列の構文エラー"""


class SchemaError(IAQError):
    """スキーマ定義の不備、未知の属性"""


class IngestError(IAQError):
    """CSV 取り込み時の解析エラー（行・列の位置を含む）"""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        location = []
        if row is not None:
            location.append(f"{row}行目")
        if column is not None:
            location.append(f"列 {column}")
        prefix = f"[{' '.join(location)}] " if location else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class FieldOverflowError(IAQError):
    """値が法を超える、または総和が法を超えうる"""


class CCSFormatError(IAQError):
    """CCS ファイルの形式エラー"""


class WireFormatError(IAQError):
    """通信メッセージの形式エラー"""


class EmptyAggregateError(IAQError):
    """該当レコードがなく集計値が定義されない（空集合の平均など）"""


class TransportError(IAQError):
    """サーバに到達できない、または HTTP レベルで失敗した"""
