"""平文集計オラクル

体の演算を一切使わず、平文レコードを直接走査して集計する（テストの基準値）。
"""

from fractions import Fraction
from typing import Any

from src.analyzers.query import AggregateKind, Query
from src.errors import EmptyAggregateError, SchemaError, UnsupportedQueryError
from src.index.indexgen import RecordFilter
from src.models.dataset import AttributeKind, DatabaseMatrix


def _group_values(db: DatabaseMatrix, attr: str) -> list[str]:
    id_map = db.id_maps.get(attr)
    if id_map:
        return [v for v, _ in sorted(id_map.items(), key=lambda kv: kv[1])]
    seen: dict[str, None] = {}
    for rec in db.plaintext:
        seen.setdefault(str(rec[attr]), None)
    return list(seen)


def _aggregate(query: Query, rows: list[dict]) -> Any:
    column = query.column
    if query.aggregate is AggregateKind.COUNT:
        return len(rows)
    values = [rec[column] for rec in rows]
    if query.aggregate is AggregateKind.SUM:
        return sum(values)
    if query.aggregate is AggregateKind.MEAN:
        if not values:
            raise EmptyAggregateError("該当レコードがないため平均は定義されません")
        return Fraction(sum(values), len(values))
    if not values:
        return None
    return min(values) if query.aggregate is AggregateKind.MIN else max(values)


def oracle_aggregate(db: DatabaseMatrix, query: Query) -> Any:
    """query を平文で評価する。

    Returns
    -------
    int / Fraction / None
        GROUP BY なしの SUM・COUNT・MEAN・MIN・MAX。MIN/MAX の空集合は None。
    dict[str, ...]
        GROUP BY ありの場合のグループ値 → 集計値（全グループ値を含む）。
    tuple[str, int]
        MIN(COUNT(*)) / MAX(COUNT(*)) GROUP BY の (グループ値, 件数)。同数は id の小さい方。
    """
    schema = db.schema
    for name in [c.attr for c in query.conditions] + [query.group_by, query.column]:
        if name is not None and not schema.has(name):
            raise SchemaError(f"未知の属性です: {name}")
    if query.column is not None and schema.attribute(query.column).kind is not AttributeKind.NUMERIC:
        raise UnsupportedQueryError(f"数値属性ではありません: {query.column}")

    record_filter = RecordFilter(query.conditions).resolve(db.schema)
    rows = [rec for rec in db.plaintext if record_filter.matches(rec)]

    if query.group_by is None:
        return _aggregate(query, rows)

    groups = _group_values(db, query.group_by)
    if query.of_count:
        counts = [(g, sum(1 for rec in rows if str(rec[query.group_by]) == g)) for g in groups]
        pick = min if query.aggregate is AggregateKind.MIN else max
        best = pick(c for _, c in counts)
        return next((g, c) for g, c in counts if c == best)

    result = {}
    for g in groups:
        members = [rec for rec in rows if str(rec[query.group_by]) == g]
        if query.aggregate is AggregateKind.MEAN and not members:
            result[g] = None
            continue
        result[g] = _aggregate(query, members)
    return result
