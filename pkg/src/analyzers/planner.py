"""クエリ計画と後処理

クエリを (キーワード, 各バッチ位置の基底ベクトル, 後処理) に分解する。
- SUM / COUNT / MEAN は group 索引の行 g（g = グループ値の id）
- MEAN は SUM と COUNT の 2 スロット、ヒストグラムは全グループ値のスロット
- MIN / MAX は min / max 索引の行 g。応答の id 列が 0 なら空グループ
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping

from config.settings import settings
from src.analyzers.query import AggregateKind, Query
from src.crypto.field import FieldVector
from src.errors import (
    CorruptedResponseError,
    EmptyAggregateError,
    SchemaError,
    UnsupportedQueryError,
)
from src.index.indexgen import (
    Family,
    FamilyKind,
    Operator,
    RecordFilter,
    count_decode,
    group_label,
)
from src.models.catalog import Catalog, KeywordInfo
from src.models.dataset import ID_SUFFIX, AttributeKind

logger = logging.getLogger(__name__)


class SlotRole(str, Enum):
    SUM = "sum"
    COUNT = "count"
    EXTREMUM = "extremum"


class Recipe(str, Enum):
    NONE = "none"
    COUNT_DECODE = "count_decode"
    MEAN = "mean"
    HISTOGRAM = "histogram"
    EXTREMUM = "extremum"
    RANK = "rank"


@dataclass(frozen=True)
class Slot:
    """1 つのバッチ位置から読み出す値"""

    family: str
    basis: int
    group_value: str
    role: SlotRole
    position: int
    word: int
    id_word: int | None = None


@dataclass(frozen=True)
class QueryPlan:
    query: Query
    keyword: str
    p: int
    u: int
    slots: tuple[Slot, ...]
    recipe: Recipe

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(sorted({s.position for s in self.slots}))

    @property
    def k(self) -> int:
        return len(self.positions)

    @property
    def indices(self) -> tuple[int, ...]:
        """positions の順に並べた基底ベクトルの添字"""
        by_position = {s.position: s.basis for s in self.slots}
        return tuple(by_position[j] for j in self.positions)

    def servers_needed(self, t: int) -> int:
        return t + self.k + self.u - 1

    def degree(self, t: int) -> int:
        """応答多項式の次数 (t+k-1)+(u-1)"""
        return t + self.k - 1 + self.u - 1


@dataclass(frozen=True)
class _Target:
    family: str
    group: str
    values: tuple[str, ...]
    roles: tuple[SlotRole, ...]
    recipe: Recipe


def _targets(query: Query, catalog: Catalog) -> list[_Target]:
    """クエリを満たしうる (ファミリ, グループ値) の候補"""
    schema = catalog.record_schema
    for name in [c.attr for c in query.conditions] + [query.group_by, query.column]:
        if name is not None and not schema.has(name):
            raise SchemaError(f"未知の属性です: {name}")
    if query.column is not None and schema.attribute(query.column).kind is not AttributeKind.NUMERIC:
        raise UnsupportedQueryError(f"数値属性ではありません: {query.column}")

    conditions = RecordFilter(query.conditions).resolve(schema).conditions
    agg = query.aggregate
    extremum = agg in (AggregateKind.MIN, AggregateKind.MAX) and not query.of_count

    if query.group_by is not None:
        if schema.attribute(query.group_by).kind is not AttributeKind.CATEGORICAL:
            raise UnsupportedQueryError(f"GROUP BY はカテゴリ属性のみです: {query.group_by}")
        options = [(query.group_by, None, conditions)]
    else:
        options = []
        for i, c in enumerate(conditions):
            if c.op is Operator.EQ and schema.attribute(c.attr).kind is AttributeKind.CATEGORICAL:
                options.append((c.attr, str(c.value), conditions[:i] + conditions[i + 1:]))
        if not options:
            raise UnsupportedQueryError(
                "カテゴリ属性の等号条件か GROUP BY が必要です"
            )

    targets = []
    for group, value, rest in options:
        if extremum:
            if rest:
                continue
            family = Family(FamilyKind(agg.value.lower()), group, query.column).label
            roles = (SlotRole.EXTREMUM,)
        else:
            family = group_label(group, RecordFilter(rest))
            if agg is AggregateKind.SUM:
                roles = (SlotRole.SUM,)
            elif agg is AggregateKind.MEAN:
                roles = (SlotRole.SUM, SlotRole.COUNT)
            else:
                roles = (SlotRole.COUNT,)

        if value is not None:
            values = (value,)
            recipe = {
                SlotRole.SUM: Recipe.NONE,
                SlotRole.COUNT: Recipe.COUNT_DECODE,
                SlotRole.EXTREMUM: Recipe.EXTREMUM,
            }[roles[-1]] if agg is not AggregateKind.MEAN else Recipe.MEAN
        else:
            values = ()
            recipe = Recipe.RANK if query.of_count else (
                Recipe.MEAN if agg is AggregateKind.MEAN else Recipe.HISTOGRAM
            )
        targets.append(_Target(family, group, values, roles, recipe))
    return targets


def _assign_positions(requests: list[tuple[str, int]], kw: KeywordInfo) -> list[int] | None:
    """各スロットにバッチ位置を割り当てる。割り当てられなければ None。"""
    if kw.u == 1:
        return list(range(len(requests)))
    taken: set[int] = set()
    shared: dict[tuple[str, int], int] = {}
    positions = []
    for family, basis in requests:
        free = [j for j, label in enumerate(kw.family_labels) if label == family and j not in taken]
        if free:
            j = free[0]
            taken.add(j)
            shared.setdefault((family, basis), j)
        elif (family, basis) in shared:
            j = shared[(family, basis)]
        else:
            return None
        positions.append(j)
    return positions


def _plan_for(query: Query, target: _Target, kw: KeywordInfo, catalog: Catalog) -> QueryPlan | None:
    if target.family not in kw.family_labels:
        return None
    values = target.values or tuple(kw.row_labels)

    id_word = catalog.word(target.group + ID_SUFFIX)
    value_word = catalog.word(query.column) if query.column else None
    requests = []
    for value in values:
        basis = kw.basis_of(value)
        for role in target.roles:
            requests.append((value, basis, role))

    positions = _assign_positions([(target.family, b) for _, b, _ in requests], kw)
    if positions is None:
        return None

    slots = []
    for (value, basis, role), j in zip(requests, positions):
        needs_value = role in (SlotRole.SUM, SlotRole.EXTREMUM)
        if needs_value and value_word is None:
            raise UnsupportedQueryError(f"応答に列 {query.column} が含まれていません")
        if role in (SlotRole.COUNT, SlotRole.EXTREMUM) and id_word is None:
            raise UnsupportedQueryError(f"応答に id 列 {target.group}{ID_SUFFIX} が含まれていません")
        slots.append(Slot(
            family=target.family,
            basis=basis,
            group_value=value,
            role=role,
            position=j,
            word=value_word if needs_value else id_word,
            id_word=id_word,
        ))
    return QueryPlan(query, kw.keyword, kw.p, kw.u, tuple(slots), target.recipe)


def plan_query(query: Query, catalog: Catalog, t: int | None = None) -> QueryPlan:
    """公開カタログから、必要サーバ数が最小になるキーワードでクエリを計画する。"""
    t = settings.privacy_threshold if t is None else t
    candidates = []
    for target in _targets(query, catalog):
        for kw in catalog.keywords:
            plan = _plan_for(query, target, kw, catalog)
            if plan is not None:
                candidates.append(plan)
    if not candidates:
        raise UnsupportedQueryError(f"公開されている索引で処理できないクエリです: {query.describe()}")

    plan = min(candidates, key=lambda pl: (pl.servers_needed(t), pl.keyword))
    logger.debug(
        "Planned %s on %s: k=%d u=%d recipe=%s",
        query.describe(), plan.keyword, plan.k, plan.u, plan.recipe.value,
    )
    return plan


def _slot_value(slot: Slot, vector: FieldVector) -> int | None:
    if slot.role is SlotRole.SUM:
        return vector[slot.word]
    if slot.role is SlotRole.COUNT:
        return count_decode(vector[slot.word], slot.basis)
    ident = vector[slot.id_word]
    if ident == 0:
        return None
    if ident != slot.basis:
        raise CorruptedResponseError(
            f"取り出したレコードの id {ident} がグループ {slot.basis} と一致しません"
        )
    return vector[slot.word]


def _mean(total: int, count: int) -> Fraction:
    if count == 0:
        raise EmptyAggregateError("該当レコードがないため平均は定義されません")
    return Fraction(total, count)


def apply_recipe(plan: QueryPlan, vectors: Mapping[int, FieldVector]) -> tuple[Any, dict]:
    """位置ごとの復元ベクトルから最終結果と内訳を作る。"""
    per_group: dict[str, dict[SlotRole, int | None]] = {}
    for slot in plan.slots:
        per_group.setdefault(slot.group_value, {})[slot.role] = _slot_value(slot, vectors[slot.position])

    recipe = plan.recipe
    if recipe in (Recipe.NONE, Recipe.COUNT_DECODE, Recipe.EXTREMUM):
        (parts,) = per_group.values()
        (value,) = parts.values()
        return value, {role.value: v for role, v in parts.items()}
    if recipe is Recipe.MEAN and plan.query.group_by is None:
        (parts,) = per_group.values()
        total, count = parts[SlotRole.SUM], parts[SlotRole.COUNT]
        return _mean(total, count), {"sum": total, "count": count}
    if recipe is Recipe.MEAN:
        result = {
            g: (Fraction(p[SlotRole.SUM], p[SlotRole.COUNT]) if p[SlotRole.COUNT] else None)
            for g, p in per_group.items()
        }
        return result, {g: {r.value: v for r, v in p.items()} for g, p in per_group.items()}

    histogram = {g: next(iter(p.values())) for g, p in per_group.items()}
    if recipe is Recipe.HISTOGRAM:
        return histogram, {"histogram": histogram}
    (winner,) = top_k(histogram, 1, largest=plan.query.aggregate is not AggregateKind.MIN)
    return winner, {"histogram": histogram}


def top_k(histogram: Mapping[str, int], k: int, largest: bool = True) -> list[tuple[str, int]]:
    """ヒストグラムを件数順に並べて上位 k 件を返す（同数はグループ値の順）。"""
    order = list(histogram)
    ranked = sorted(histogram.items(), key=lambda kv: (-kv[1] if largest else kv[1], order.index(kv[0])))
    return ranked[:k]
