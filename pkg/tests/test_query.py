"""クエリ構文解析と平文オラクルのテスト"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.analyzers.oracle import oracle_aggregate
from src.analyzers.query import AggregateKind, parse_conditions, parse_query
from src.errors import EmptyAggregateError, QueryParseError, SchemaError, UnsupportedQueryError
from src.index.indexgen import Operator
from src.models.dataset import parse_date
from tests.helpers import sample_db


def test_parse_full_form():
    """SELECT ... FROM ... WHERE ... AND ... の各部"""
    q = parse_query(
        "SELECT SUM(days_hospitalized) FROM daily_patient_records WHERE patient_id = 3;"
    )
    assert q.aggregate is AggregateKind.SUM
    assert q.column == "days_hospitalized"
    assert q.table == "daily_patient_records"
    assert len(q.conditions) == 1
    c = q.conditions[0]
    assert (c.attr, c.op, c.value) == ("patient_id", Operator.EQ, 3)


def test_parse_variants():
    """COUNT(*)・AVG・GROUP BY・BETWEEN・文字列と日付のリテラル"""
    q = parse_query("count(*) where gender = 'Female'")
    assert q.aggregate is AggregateKind.COUNT and q.column is None
    assert q.conditions[0].value == "Female"

    q = parse_query("AVG(days) WHERE state=CA")
    assert q.aggregate is AggregateKind.MEAN

    q = parse_query("COUNT(*) GROUP BY state")
    assert q.is_histogram and q.group_by == "state"

    q = parse_query("MAX(COUNT(*)) GROUP BY state")
    assert q.of_count and q.aggregate is AggregateKind.MAX

    q = parse_query("SUM(days) WHERE admit BETWEEN 2022-01-01 AND 2022-06-30 AND gender=Male")
    between = q.conditions[0]
    assert between.op is Operator.BETWEEN
    assert (between.value, between.upper) == ("2022-01-01", "2022-06-30")
    assert q.describe() == "SUM(days) WHERE admit:2022-01-01..2022-06-30 AND gender=Male"


@pytest.mark.parametrize("text", [
    "",
    "SUM days",
    "SUM(days) WHERE",
    "MEDIAN(days)",
    "SUM(days) WHERE gender",
    "SUM(days) extra",
    "MIN(COUNT(*))",
    "SUM(days) WHERE state = CA $",
])
def test_parse_errors(text):
    """構文エラーは QueryParseError"""
    with pytest.raises(QueryParseError):
        parse_query(text)


@pytest.mark.parametrize("text", [
    "SUM(days) WHERE gender=Male OR gender=Female",
    "SUM(days) FROM a JOIN b",
    "SUM(days) WHERE state != CA",
    "SUM(days) WHERE state IN (CA)",
    "SELECT SUM(days) WHERE patient = (SELECT MAX(patient))",
])
def test_unsupported_constructs(text):
    """OR・JOIN・!=・IN・入れ子は UnsupportedQueryError"""
    with pytest.raises(UnsupportedQueryError):
        parse_query(text)


def test_parse_conditions_for_filters():
    """where 句だけの解析"""
    (c,) = parse_conditions("admit < 2022-06-01")
    assert (c.attr, c.op, c.value) == ("admit", Operator.LT, "2022-06-01")
    with pytest.raises(QueryParseError):
        parse_conditions("admit < 2022-06-01 GROUP")


def test_oracle_on_sample():
    """平文集計の基準値"""
    db = sample_db()
    assert oracle_aggregate(db, parse_query("SUM(days) WHERE patient=3")) == 21
    assert oracle_aggregate(db, parse_query("COUNT(*) WHERE gender=Female")) == 2
    assert oracle_aggregate(db, parse_query("SUM(days) WHERE gender=Male AND admit < 2022-06-01")) == 12
    assert oracle_aggregate(db, parse_query("MEAN(days) WHERE state=CA")) == Fraction(2)
    assert oracle_aggregate(db, parse_query("MEAN(days) WHERE state=OR")) == Fraction(6)
    assert oracle_aggregate(db, parse_query("MIN(admit) WHERE state=CA")) == parse_date("2022-01-04", None)
    assert oracle_aggregate(db, parse_query("MAX(admit) WHERE state=WA")) == parse_date("2022-09-01", None)
    assert oracle_aggregate(db, parse_query("COUNT(*) GROUP BY gender")) == {"Male": 3, "Female": 2, "Other": 1}
    assert oracle_aggregate(db, parse_query("MAX(COUNT(*)) GROUP BY gender")) == ("Male", 3)
    assert oracle_aggregate(db, parse_query("MIN(COUNT(*)) GROUP BY state")) == ("CA", 2)


def test_oracle_empty_sets():
    """空集合: MIN/MAX は None、MEAN はエラー、グループ別 MEAN は None"""
    db = sample_db()
    assert oracle_aggregate(db, parse_query("MAX(days) WHERE gender=Female AND admit < 2022-06-01")) is None
    with pytest.raises(EmptyAggregateError):
        oracle_aggregate(db, parse_query("MEAN(days) WHERE gender=Female AND admit < 2022-06-01"))
    by_gender = oracle_aggregate(db, parse_query("MEAN(days) WHERE admit < 2022-06-01 GROUP BY gender"))
    assert by_gender == {"Male": Fraction(6), "Female": None, "Other": Fraction(2)}


def test_oracle_rejects_unknown_and_text_columns():
    """未知の属性は SchemaError、カテゴリ列の SUM は UnsupportedQueryError"""
    db = sample_db()
    with pytest.raises(SchemaError):
        oracle_aggregate(db, parse_query("SUM(age) WHERE state=CA"))
    with pytest.raises(UnsupportedQueryError):
        oracle_aggregate(db, parse_query("SUM(state) WHERE gender=Male"))
