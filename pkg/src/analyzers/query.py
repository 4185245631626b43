"""SQL 風クエリの構文解析

    [SELECT] agg [FROM ident] [WHERE cond (AND cond)*] [GROUP BY ident]

agg は SUM(col) / COUNT(*) / MEAN(col) / AVG(col) / MIN(col) / MAX(col) /
MIN(COUNT(*)) / MAX(COUNT(*))。cond は attr op literal か attr BETWEEN a AND b。
"""

import re
from dataclasses import dataclass
from enum import Enum

from src.errors import QueryParseError, UnsupportedQueryError
from src.index.indexgen import Condition, Operator

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<date>\d{4}-\d{2}-\d{2})
  | (?P<number>-?\d+)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<op><=|>=|!=|<>|=|<|>)
  | (?P<punct>[(),*;])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)

_UNSUPPORTED = {"JOIN", "OR", "UNION", "HAVING", "ORDER", "LIMIT", "IN", "NOT", "LIKE"}


class AggregateKind(str, Enum):
    SUM = "SUM"
    COUNT = "COUNT"
    MEAN = "MEAN"
    MIN = "MIN"
    MAX = "MAX"


@dataclass(frozen=True)
class Query:
    """解析済みクエリ

    column が None なら COUNT(*)。of_count は MIN(COUNT(*)) / MAX(COUNT(*))。
    """

    aggregate: AggregateKind
    column: str | None
    conditions: tuple[Condition, ...] = ()
    group_by: str | None = None
    of_count: bool = False
    table: str | None = None

    @property
    def is_histogram(self) -> bool:
        return self.aggregate is AggregateKind.COUNT and self.group_by is not None

    def describe(self) -> str:
        inner = "COUNT(*)" if self.of_count else (self.column or "*")
        text = f"{self.aggregate.value}({inner})"
        if self.conditions:
            text += " WHERE " + " AND ".join(c.describe() for c in self.conditions)
        if self.group_by:
            text += f" GROUP BY {self.group_by}"
        return text


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper()


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QueryParseError(f"解釈できない文字です: {text[pos]!r} (位置 {pos})")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def error(self, message: str) -> QueryParseError:
        tok = self.peek()
        where = f"位置 {tok.pos} ({tok.text!r})" if tok else "末尾"
        return QueryParseError(f"{message}: {where}")

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise self.error("クエリが途中で終わっています")
        self.i += 1
        return tok

    def accept_keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.kind == "ident" and tok.upper == word:
            self.i += 1
            return True
        return False

    def expect_keyword(self, word: str) -> None:
        if not self.accept_keyword(word):
            raise self.error(f"{word} が必要です")

    def expect_punct(self, char: str) -> None:
        tok = self.peek()
        if tok is None or tok.kind != "punct" or tok.text != char:
            raise self.error(f"'{char}' が必要です")
        self.i += 1

    def ident(self) -> str:
        tok = self.next()
        if tok.kind != "ident":
            self.i -= 1
            raise self.error("識別子が必要です")
        if tok.upper in _UNSUPPORTED or tok.upper == "SELECT":
            raise UnsupportedQueryError(f"サポート外の構文です: {tok.text}")
        return tok.text

    def literal(self) -> int | str:
        tok = self.next()
        if tok.kind == "number":
            return int(tok.text)
        if tok.kind == "string":
            return tok.text[1:-1]
        if tok.kind in ("date", "ident"):
            return tok.text
        self.i -= 1
        raise self.error("値が必要です")

    def parse(self) -> Query:
        for tok in self.tokens:
            if tok.kind == "ident" and tok.upper in _UNSUPPORTED:
                raise UnsupportedQueryError(f"サポート外の構文です: {tok.text}")
        if sum(1 for t in self.tokens if t.kind == "ident" and t.upper == "SELECT") > 1:
            raise UnsupportedQueryError("入れ子のクエリはサポートしていません")

        self.accept_keyword("SELECT")
        aggregate, column, of_count = self.aggregate()
        table = None
        if self.accept_keyword("FROM"):
            table = self.ident()
        conditions: list[Condition] = []
        if self.accept_keyword("WHERE"):
            conditions.append(self.condition())
            while self.accept_keyword("AND"):
                conditions.append(self.condition())
        group_by = None
        if self.accept_keyword("GROUP"):
            self.expect_keyword("BY")
            group_by = self.ident()
        tok = self.peek()
        if tok is not None and tok.text == ";":
            self.i += 1
        if self.peek() is not None:
            raise self.error("余分なトークンがあります")

        if of_count and group_by is None:
            raise QueryParseError("MIN(COUNT(*)) / MAX(COUNT(*)) には GROUP BY が必要です")
        return Query(aggregate, column, tuple(conditions), group_by, of_count, table)

    def aggregate(self) -> tuple[AggregateKind, str | None, bool]:
        tok = self.next()
        name = tok.upper
        if tok.kind != "ident" or name not in ("SUM", "COUNT", "MEAN", "AVG", "MIN", "MAX"):
            self.i -= 1
            raise self.error("集約関数（SUM / COUNT / MEAN / MIN / MAX）が必要です")
        kind = AggregateKind.MEAN if name == "AVG" else AggregateKind(name)
        self.expect_punct("(")
        of_count = False
        column = None
        if kind is AggregateKind.COUNT:
            self.expect_punct("*")
        elif kind in (AggregateKind.MIN, AggregateKind.MAX) and self.accept_keyword("COUNT"):
            self.expect_punct("(")
            self.expect_punct("*")
            self.expect_punct(")")
            of_count = True
        else:
            column = self.ident()
        self.expect_punct(")")
        return kind, column, of_count

    def condition(self) -> Condition:
        attr = self.ident()
        if self.accept_keyword("BETWEEN"):
            low = self.literal()
            self.expect_keyword("AND")
            high = self.literal()
            return Condition(attr, Operator.BETWEEN, low, high)
        tok = self.next()
        if tok.kind != "op":
            self.i -= 1
            raise self.error("比較演算子が必要です")
        if tok.text in ("!=", "<>"):
            raise UnsupportedQueryError("!= はサポートしていません")
        return Condition(attr, Operator(tok.text), self.literal())


def parse_query(text: str) -> Query:
    """クエリ文字列を Query にする。構文エラーは QueryParseError、
    JOIN・OR・入れ子などは UnsupportedQueryError。"""
    if not text or not text.strip():
        raise QueryParseError("クエリが空です")
    return _Parser(text).parse()


def parse_conditions(text: str) -> tuple[Condition, ...]:
    """`cond AND cond ...` だけを解析する（デプロイ設定の where 句用）。"""
    parser = _Parser(text)
    conditions = [parser.condition()]
    while parser.accept_keyword("AND"):
        conditions.append(parser.condition())
    if parser.peek() is not None:
        raise parser.error("余分なトークンがあります")
    return tuple(conditions)
