"""有限体演算モジュール

二元体 GF(2^8) / GF(2^16) は対数・真数表、素体は Barrett 還元で乗算する。
カーネル（vspm・秘密分散・補間）は FieldSpec の整数演算を直接呼び、
FieldElement / FieldVector は型検査付きの公開 API として使う。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache, reduce
from operator import xor
from typing import Iterable, Sequence

from sympy import Poly, factorint, isprime, symbols

from src.errors import FieldMismatchError, FieldValueError, NonInvertibleError

logger = logging.getLogger(__name__)

# 既約多項式: x^8+x^4+x^3+x+1 / x^16+x^12+x^3+x+1
GF2E8_MODULUS = 0x11B
GF2E16_MODULUS = 0x1100B

# 2^k 未満の最大素数（ベンチ用プリセット）
MERSENNE31 = (1 << 31) - 1
PRIME128 = (1 << 128) - 159
PRIME256 = (1 << 256) - 189
PRIME512 = (1 << 512) - 569


class FieldKind(str, Enum):
    BINARY8 = "binary8"
    BINARY16 = "binary16"
    PRIME = "prime"


_BINARY_DEGREE = {FieldKind.BINARY8: 8, FieldKind.BINARY16: 16}
_BINARY_TEXT = {FieldKind.BINARY8: "gf2e8", FieldKind.BINARY16: "gf2e16"}

FIELD_PRESETS = {
    "gf2e8": (FieldKind.BINARY8, GF2E8_MODULUS),
    "gf2e16": (FieldKind.BINARY16, GF2E16_MODULUS),
    "mersenne31": (FieldKind.PRIME, MERSENNE31),
    "prime128": (FieldKind.PRIME, PRIME128),
    "prime256": (FieldKind.PRIME, PRIME256),
    "prime512": (FieldKind.PRIME, PRIME512),
}


def clmul_mod(a: int, b: int, modulus: int, degree: int) -> int:
    """GF(2)[x] 上の繰り上がりなし乗算を既約多項式で還元する。"""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if (a >> degree) & 1:
            a ^= modulus
    return result


def _is_irreducible_gf2(modulus: int) -> bool:
    x = symbols("x")
    coeffs = [int(bit) for bit in bin(modulus)[2:]]
    return Poly(coeffs, x, modulus=2).is_irreducible


def _gf2_pow(base: int, exponent: int, modulus: int, degree: int) -> int:
    result = 1
    while exponent:
        if exponent & 1:
            result = clmul_mod(result, base, modulus, degree)
        base = clmul_mod(base, base, modulus, degree)
        exponent >>= 1
    return result


def _find_generator(modulus: int, degree: int) -> int:
    """乗法群の位数 2^degree - 1 を持つ最小の元を探す。"""
    group_order = (1 << degree) - 1
    prime_factors = list(factorint(group_order))
    for candidate in range(2, 1 << degree):
        if all(
            _gf2_pow(candidate, group_order // q, modulus, degree) != 1
            for q in prime_factors
        ):
            return candidate
    raise FieldValueError(f"原始元が見つかりません: modulus=0x{modulus:X}")


def _build_log_tables(modulus: int, degree: int) -> tuple[int, list[int], list[int]]:
    generator = _find_generator(modulus, degree)
    group_order = (1 << degree) - 1
    exp_table = [0] * (2 * group_order)
    log_table = [0] * (1 << degree)
    value = 1
    for i in range(group_order):
        exp_table[i] = value
        log_table[value] = i
        value = clmul_mod(value, generator, modulus, degree)
    # 指数の和を mod せずに引けるよう 2 周分持つ
    exp_table[group_order:] = exp_table[:group_order]
    return generator, exp_table, log_table


class FieldSpec:
    """有限体 F の定義。構築後は不変で、スレッド間で共有してよい。

    Parameters
    ----------
    kind : FieldKind or str
        "binary8" / "binary16" / "prime"。
    modulus : int
        二元体では既約多項式のビットマスク、素体では奇素数。
    """

    __slots__ = (
        "kind", "modulus", "degree", "word_bits", "order", "byte_width",
        "generator", "_mu", "_exp", "_log", "_frozen",
    )

    def __init__(self, kind: FieldKind | str, modulus: int):
        kind = FieldKind(kind)
        self.kind = kind
        self.modulus = modulus
        self._mu = 0
        self._exp: list[int] = []
        self._log: list[int] = []
        self.generator = 0

        if kind is FieldKind.PRIME:
            if modulus < 3 or modulus % 2 == 0 or not isprime(modulus):
                raise FieldValueError(f"奇素数ではない法です: {modulus}")
            self.degree = 1
            self.word_bits = modulus.bit_length()
            self.order = modulus
            self._mu = (1 << (2 * self.word_bits)) // modulus
        else:
            degree = _BINARY_DEGREE[kind]
            if modulus.bit_length() - 1 != degree:
                raise FieldValueError(
                    f"{kind.value} の法は {degree} 次多項式である必要があります: 0x{modulus:X}"
                )
            if not _is_irreducible_gf2(modulus):
                raise FieldValueError(f"既約多項式ではありません: 0x{modulus:X}")
            self.degree = degree
            self.word_bits = degree
            self.order = 1 << degree
            self.generator, self._exp, self._log = _build_log_tables(modulus, degree)

        self.byte_width = (self.word_bits + 7) // 8
        self._frozen = True

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            raise AttributeError("FieldSpec は不変です")
        object.__setattr__(self, name, value)

    # ----- 識別 -----

    @property
    def is_prime(self) -> bool:
        return self.kind is FieldKind.PRIME

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldSpec):
            return NotImplemented
        return self.kind is other.kind and self.modulus == other.modulus

    def __hash__(self) -> int:
        return hash((self.kind, self.modulus))

    def __repr__(self) -> str:
        return f"FieldSpec({self.to_text()})"

    def to_text(self) -> str:
        if self.is_prime:
            return f"prime:{self.modulus}"
        return _BINARY_TEXT[self.kind]

    @classmethod
    def parse(cls, text: str) -> "FieldSpec":
        """`prime:<10進法>` / `gf2e8` / `gf2e16` / プリセット名を解釈する。"""
        return _parse_cached(text.strip().lower())

    # ----- 整数表現での演算（カーネル用） -----

    def from_int(self, n: int) -> int:
        """整数を体の元へ写す。素体は mod、二元体はビット列としてそのまま使う。"""
        if self.is_prime:
            return n % self.modulus
        if not 0 <= n < self.order:
            raise FieldValueError(f"GF(2^{self.degree}) の範囲外です: {n}")
        return n

    def add(self, a: int, b: int) -> int:
        if self.is_prime:
            s = a + b
            return s - self.modulus if s >= self.modulus else s
        return a ^ b

    def sub(self, a: int, b: int) -> int:
        if self.is_prime:
            d = a - b
            return d + self.modulus if d < 0 else d
        return a ^ b

    def neg(self, a: int) -> int:
        if self.is_prime:
            return self.modulus - a if a else 0
        return a

    def barrett_reduce(self, x: int) -> int:
        """0 <= x < 2^(2·word_bits) を mod p に還元する。"""
        k = self.word_bits
        q = ((x >> (k - 1)) * self._mu) >> (k + 1)
        r = x - q * self.modulus
        while r >= self.modulus:
            r -= self.modulus
        return r

    def mul(self, a: int, b: int) -> int:
        if self.is_prime:
            return self.barrett_reduce(a * b)
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise NonInvertibleError("0 の逆元は存在しません")
        if self.is_prime:
            return pow(a, -1, self.modulus)
        return self._exp[(self.order - 1) - self._log[a]]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def sum(self, values: Iterable[int]) -> int:
        if self.is_prime:
            return sum(values) % self.modulus
        return reduce(xor, values, 0)

    def random_int(self, rng) -> int:
        return rng.randrange(self.order)

    def to_bytes(self, value: int) -> bytes:
        return value.to_bytes(self.byte_width, "big")

    def from_bytes(self, data: bytes) -> int:
        if len(data) != self.byte_width:
            raise FieldValueError(
                f"バイト長が不正です: {len(data)} (期待値 {self.byte_width})"
            )
        value = int.from_bytes(data, "big")
        if value >= self.order:
            raise FieldValueError(f"体の位数以上の値です: {value}")
        return value

    def element(self, n: int) -> "FieldElement":
        return FieldElement(self.from_int(n), self)


@lru_cache(maxsize=None)
def _parse_cached(text: str) -> FieldSpec:
    if text in FIELD_PRESETS:
        kind, modulus = FIELD_PRESETS[text]
        return FieldSpec(kind, modulus)
    if text.startswith("prime:"):
        try:
            modulus = int(text.split(":", 1)[1])
        except ValueError:
            raise FieldValueError(f"素数の指定が不正です: {text}") from None
        return FieldSpec(FieldKind.PRIME, modulus)
    raise FieldValueError(f"未対応の体指定です: {text}")


def verify_presets() -> None:
    """組み込み素数の素数性を確認する（起動時の自己診断）。"""
    for name, (kind, modulus) in FIELD_PRESETS.items():
        if kind is FieldKind.PRIME and not isprime(modulus):
            raise FieldValueError(f"プリセット {name} が素数ではありません")
    logger.debug("Field presets verified: %s", ", ".join(FIELD_PRESETS))


# ---------------------------------------------------------------------------
# 体の元・ベクトル
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldElement:
    value: int
    spec: FieldSpec

    def __post_init__(self):
        if not 0 <= self.value < self.spec.order:
            raise FieldValueError(f"体の位数の範囲外です: {self.value}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return ff_add(self, other)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        return ff_sub(self, other)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return ff_mul(self, other)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        return ff_mul(self, ff_inv(other))

    def __neg__(self) -> "FieldElement":
        return FieldElement(self.spec.neg(self.value), self.spec)

    def __int__(self) -> int:
        return self.value

    def inverse(self) -> "FieldElement":
        return ff_inv(self)


def _check_same_field(a: FieldElement, b: FieldElement) -> None:
    if a.spec != b.spec:
        raise FieldMismatchError(f"異なる体の元は演算できません: {a.spec} と {b.spec}")


def ff_add(a: FieldElement, b: FieldElement) -> FieldElement:
    _check_same_field(a, b)
    return FieldElement(a.spec.add(a.value, b.value), a.spec)


def ff_sub(a: FieldElement, b: FieldElement) -> FieldElement:
    _check_same_field(a, b)
    return FieldElement(a.spec.sub(a.value, b.value), a.spec)


def ff_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    _check_same_field(a, b)
    return FieldElement(a.spec.mul(a.value, b.value), a.spec)


def ff_inv(a: FieldElement) -> FieldElement:
    return FieldElement(a.spec.inv(a.value), a.spec)


def ff_serialize(a: FieldElement) -> bytes:
    """ceil(word_bits/8) バイト固定長のビッグエンディアン表現。"""
    return a.spec.to_bytes(a.value)


def ff_deserialize(data: bytes, spec: FieldSpec) -> FieldElement:
    return FieldElement(spec.from_bytes(data), spec)


@dataclass(frozen=True)
class FieldVector:
    """同一の体の元からなる長さ 1 以上のベクトル（値は整数表現で保持）。"""

    spec: FieldSpec
    values: tuple[int, ...]

    def __post_init__(self):
        if not self.values:
            raise FieldValueError("FieldVector の長さは 1 以上である必要があります")
        order = self.spec.order
        if not all(0 <= v < order for v in self.values):
            raise FieldValueError("体の位数の範囲外の成分を含みます")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i: int) -> int:
        return self.values[i]

    def element(self, i: int) -> FieldElement:
        return FieldElement(self.values[i], self.spec)

    @classmethod
    def from_elements(cls, elements: Sequence[FieldElement]) -> "FieldVector":
        if not elements:
            raise FieldValueError("FieldVector の長さは 1 以上である必要があります")
        spec = elements[0].spec
        for e in elements[1:]:
            if e.spec != spec:
                raise FieldMismatchError("異なる体の元が混在しています")
        return cls(spec, tuple(e.value for e in elements))

    @classmethod
    def zeros(cls, spec: FieldSpec, length: int) -> "FieldVector":
        return cls(spec, (0,) * length)

    @classmethod
    def basis(cls, spec: FieldSpec, length: int, index: int) -> "FieldVector":
        """標準基底ベクトル e_index（index は 1 始まり）。"""
        values = [0] * length
        values[index - 1] = 1
        return cls(spec, tuple(values))

    def to_bytes(self) -> bytes:
        return b"".join(self.spec.to_bytes(v) for v in self.values)

    @classmethod
    def from_bytes(cls, spec: FieldSpec, data: bytes, length: int) -> "FieldVector":
        width = spec.byte_width
        if len(data) != width * length:
            raise FieldValueError(f"ベクトルのバイト長が不正です: {len(data)}")
        return cls(spec, tuple(
            spec.from_bytes(data[i * width:(i + 1) * width]) for i in range(length)
        ))
