"""クエリ計画と後処理のテスト"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.analyzers.planner import Recipe, SlotRole, apply_recipe, plan_query, top_k
from src.analyzers.query import parse_query
from src.crypto.field import FieldVector
from src.errors import CorruptedResponseError, EmptyAggregateError, SchemaError, UnsupportedQueryError
from src.protocol.deployment import build_deployment
from tests.helpers import PRIME, families, sample_db, sample_deployment

CATALOG = sample_deployment().catalog


def _plan(text, catalog=CATALOG, t=1):
    return plan_query(parse_query(text), catalog, t)


def _response(**words):
    """列名 → 値から応答ベクトルを作る（その他の列は 0）"""
    values = [0] * CATALOG.s
    for name, value in words.items():
        values[CATALOG.word(name)] = value
    return FieldVector(PRIME, tuple(values))


def test_sum_on_patient_keyword():
    """SUM WHERE patient=3 は k=1、基底 3、後処理なし"""
    plan = _plan("SUM(days) WHERE patient=3")
    assert plan.keyword == "patient"
    assert (plan.k, plan.u) == (1, 1)
    assert plan.indices == (3,)
    assert plan.recipe is Recipe.NONE
    assert plan.servers_needed(1) == 2
    assert plan.slots[0].word == CATALOG.word("days")


def test_count_uses_population_position():
    """COUNT WHERE gender=Female はバッチ位置 1（フィルタなしの性別索引）"""
    plan = _plan("COUNT(*) WHERE gender=Female")
    assert plan.keyword == "gender"
    assert plan.positions == (1,)
    assert plan.indices == (2,)
    assert plan.recipe is Recipe.COUNT_DECODE
    assert plan.slots[0].word == CATALOG.word("gender_id")
    assert plan.servers_needed(1) == 3
    assert plan.degree(1) == 2


def test_filtered_sum_uses_duration_position():
    """入院日で絞った SUM はフィルタ付き索引の位置 0"""
    plan = _plan("SUM(days) WHERE gender=Male AND admit < 2022-06-01")
    assert plan.keyword == "gender"
    assert plan.positions == (0,)
    assert plan.indices == (1,)
    assert plan.slots[0].family.startswith("group:gender[admit<")


def test_mean_on_unbatched_keyword_uses_two_positions():
    """u=1 の MEAN は同じ基底を x=0 と x=1 に置く"""
    plan = _plan("MEAN(days) WHERE state=CA")
    assert plan.keyword == "state"
    assert plan.positions == (0, 1)
    assert plan.indices == (1, 1)
    assert [s.role for s in plan.slots] == [SlotRole.SUM, SlotRole.COUNT]
    assert plan.recipe is Recipe.MEAN


def test_mean_on_batched_keyword_shares_position():
    """u=2 の MEAN は 1 つの位置から SUM と COUNT を読む"""
    plan = _plan("MEAN(days) WHERE gender=Female")
    assert plan.positions == (1,)
    assert plan.k == 1
    assert len(plan.slots) == 2


def test_histogram_plan():
    """GROUP BY state は全グループ値の COUNT を k=3 でまとめる"""
    plan = _plan("COUNT(*) GROUP BY state")
    assert plan.keyword == "state"
    assert plan.positions == (0, 1, 2)
    assert plan.indices == (1, 2, 3)
    assert plan.recipe is Recipe.HISTOGRAM
    assert plan.servers_needed(1) == 4


def test_histogram_over_gender_on_unbatched_keyword():
    """性別の単独索引があれば 3 値のヒストグラムは k=3"""
    catalog = build_deployment(sample_db(), {"gender": families({"group": "gender"})}, ell=4).catalog
    plan = _plan("COUNT(*) GROUP BY gender", catalog)
    assert plan.k == 3
    assert [s.group_value for s in plan.slots] == ["Male", "Female", "Other"]


def test_histogram_over_batched_keyword_is_unsupported():
    """バッチ化された性別索引からは 1 行しか取れない"""
    with pytest.raises(UnsupportedQueryError):
        _plan("COUNT(*) GROUP BY gender")


def test_extremum_plans():
    """MIN は位置 0、MAX は位置 1 の入院索引"""
    low = _plan("MIN(admit) WHERE state=CA")
    high = _plan("MAX(admit) WHERE state=WA")
    assert (low.keyword, low.positions, low.indices) == ("admission", (0,), (1,))
    assert (high.keyword, high.positions, high.indices) == ("admission", (1,), (3,))
    assert high.recipe is Recipe.EXTREMUM
    assert high.slots[0].id_word == CATALOG.word("state_id")


def test_rank_plan():
    """MAX(COUNT(*)) GROUP BY はヒストグラム＋並べ替え"""
    plan = _plan("MAX(COUNT(*)) GROUP BY state")
    assert plan.recipe is Recipe.RANK
    assert plan.k == 3


@pytest.mark.parametrize("text, error", [
    ("SUM(days) WHERE days > 3", UnsupportedQueryError),
    ("MIN(admit) WHERE state=CA AND days > 1", UnsupportedQueryError),
    ("SUM(days) WHERE state=CA AND gender=Male", UnsupportedQueryError),
    ("SUM(gender) WHERE state=CA", UnsupportedQueryError),
    ("SUM(days) GROUP BY days", UnsupportedQueryError),
    ("SUM(age) WHERE state=CA", SchemaError),
    ("SUM(days) WHERE state=TX", SchemaError),
])
def test_unplannable_queries(text, error):
    """公開索引で処理できないクエリ"""
    with pytest.raises(error):
        _plan(text)


def test_keyword_choice_prefers_fewest_servers():
    """同じファミリを持つキーワードが複数あれば必要サーバ数が少ない方、同数なら名前順"""
    keywords = {
        "a_batched": families({"group": "state", "where": "days > 5"}, {"group": "state"}),
        "z_single": families({"group": "state"}),
        "y_single": families({"group": "state"}),
    }
    catalog = build_deployment(sample_db(), keywords, ell=4).catalog
    plan = _plan("SUM(days) WHERE state=CA", catalog)
    assert plan.keyword == "y_single"
    # フィルタ付きは a_batched にしかない
    assert _plan("SUM(days) WHERE state=CA AND days > 5", catalog).keyword == "a_batched"


def test_apply_recipe_sum_and_count():
    """SUM はそのまま、COUNT は id で割る"""
    total, parts = apply_recipe(_plan("SUM(days) WHERE patient=3"), {0: _response(days=21)})
    assert total == 21 and parts == {"sum": 21}
    count, _ = apply_recipe(_plan("COUNT(*) WHERE gender=Female"), {1: _response(gender_id=4)})
    assert count == 2
    with pytest.raises(CorruptedResponseError):
        apply_recipe(_plan("COUNT(*) WHERE gender=Female"), {1: _response(gender_id=5)})


def test_apply_recipe_mean():
    """MEAN は sum÷count、空グループはエラー"""
    plan = _plan("MEAN(days) WHERE state=OR")
    value, parts = apply_recipe(plan, {0: _response(days=12), 1: _response(state_id=4)})
    assert value == Fraction(6)
    assert parts == {"sum": 12, "count": 2}
    with pytest.raises(EmptyAggregateError):
        apply_recipe(plan, {0: _response(), 1: _response()})


def test_apply_recipe_extremum():
    """id 列が 0 なら空グループ、グループ id と違えば改ざん"""
    plan = _plan("MAX(admit) WHERE state=OR")
    value, _ = apply_recipe(plan, {1: _response(admit=1658534400, state_id=2)})
    assert value == 1658534400
    assert apply_recipe(plan, {1: _response()})[0] is None
    with pytest.raises(CorruptedResponseError):
        apply_recipe(plan, {1: _response(admit=5, state_id=3)})


def test_apply_recipe_histogram_and_rank():
    """ヒストグラムの組み立てと最大・最小グループ"""
    vectors = {0: _response(state_id=2), 1: _response(state_id=4), 2: _response(state_id=3)}
    histogram, _ = apply_recipe(_plan("COUNT(*) GROUP BY state"), vectors)
    assert histogram == {"CA": 2, "OR": 2, "WA": 1}
    assert apply_recipe(_plan("MAX(COUNT(*)) GROUP BY state"), vectors)[0] == ("CA", 2)
    assert apply_recipe(_plan("MIN(COUNT(*)) GROUP BY state"), vectors)[0] == ("WA", 1)


def test_top_k():
    """件数順、同数はグループ値の順"""
    histogram = {"CA": 2, "OR": 2, "WA": 1}
    assert top_k(histogram, 2) == [("CA", 2), ("OR", 2)]
    assert top_k(histogram, 1, largest=False) == [("WA", 1)]
    assert top_k(histogram, 5) == [("CA", 2), ("OR", 2), ("WA", 1)]
