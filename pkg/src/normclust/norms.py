"""Monotone symmetric norms on nonnegative cost vectors.

Values are exact: ints and :class:`fractions.Fraction` in, the same out.
Lp norms are the exception, their p-th root is irrational in general, so
:func:`eval_norm` returns an :class:`LpValue` carrying the exact power sum
next to the float root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

Number = int | Fraction


def as_exact(x) -> Number:
    """Convert to int or Fraction.  Floats are converted exactly."""
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, Rational):
        f = Fraction(int(x.numerator), int(x.denominator))
        return f.numerator if f.denominator == 1 else f
    if isinstance(x, str):
        f = Fraction(x)
        return f.numerator if f.denominator == 1 else f
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        f = Fraction(x)
        return f.numerator if f.denominator == 1 else f
    # numpy scalars
    if hasattr(x, "item"):
        return as_exact(x.item())
    raise TypeError(f"cannot convert {type(x).__name__} to an exact number")


def _floor(x: Number) -> int:
    return math.floor(x)


@dataclass(frozen=True)
class LpValue:
    """Lp norm value: exact power sum and float root."""

    power_sum: Number
    p: Number
    root: float

    def __float__(self) -> float:
        return self.root


KINDS = ("linf", "l1", "lp", "topl", "ordered")


@dataclass(frozen=True)
class NormSpec:
    kind: str
    p: Number | None = None
    ell: Number | None = None
    weights: tuple[Number, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "lp":
            if self.p is None or self.p < 1:
                raise ValueError("Lp needs p >= 1")
            object.__setattr__(self, "p", as_exact(self.p))
        if self.kind == "topl":
            if self.ell is None or self.ell < 0:
                raise ValueError("TopL needs ell >= 0")
            object.__setattr__(self, "ell", as_exact(self.ell))
        if self.kind == "ordered":
            if self.weights is None:
                raise ValueError("Ordered needs weights")
            w = tuple(as_exact(x) for x in self.weights)
            check_weights(w)
            object.__setattr__(self, "weights", w)

    # constructors
    @classmethod
    def linf(cls) -> "NormSpec":
        return cls("linf")

    @classmethod
    def l1(cls) -> "NormSpec":
        return cls("l1")

    @classmethod
    def lp(cls, p) -> "NormSpec":
        return cls("lp", p=p)

    @classmethod
    def topl(cls, ell) -> "NormSpec":
        return cls("topl", ell=ell)

    @classmethod
    def ordered(cls, weights: Sequence) -> "NormSpec":
        return cls("ordered", weights=tuple(weights))

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        """Parse ``linf``, ``l1``, ``lp:2``, ``topl:3``, ``topl:5/2``, ``ordered:3,2,1``."""
        kind, _, arg = text.strip().lower().partition(":")
        if kind in ("linf", "l1"):
            return cls(kind)
        if kind == "lp":
            return cls.lp(as_exact(arg))
        if kind == "topl":
            return cls.topl(as_exact(arg))
        if kind == "ordered":
            return cls.ordered([as_exact(x) for x in arg.split(",") if x])
        raise ValueError(f"cannot parse norm {text!r}")

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.p is not None:
            out["p"] = rat_str(self.p)
        if self.ell is not None:
            out["ell"] = rat_str(self.ell)
        if self.weights is not None:
            out["weights"] = [rat_str(w) for w in self.weights]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "NormSpec":
        kind = obj["kind"]
        if kind == "lp":
            return cls.lp(as_exact(obj["p"]))
        if kind == "topl":
            return cls.topl(as_exact(obj["ell"]))
        if kind == "ordered":
            return cls.ordered([as_exact(w) for w in obj["weights"]])
        return cls(kind)

    def label(self) -> str:
        if self.kind == "lp":
            return f"lp:{rat_str(self.p)}"
        if self.kind == "topl":
            return f"topl:{rat_str(self.ell)}"
        if self.kind == "ordered":
            return "ordered:" + ",".join(rat_str(w) for w in self.weights)
        return self.kind

    def is_lp_representable(self) -> bool:
        return self.kind != "lp"

    def ordered_weights(self, n: int) -> tuple[Number, ...]:
        """Weights w (length n) with norm == ordered_norm(w, .) on length-n vectors."""
        if self.kind == "linf":
            return tuple([1] + [0] * (n - 1)) if n else ()
        if self.kind == "l1":
            return (1,) * n
        if self.kind == "topl":
            ell = self.ell
            if ell > n:
                raise ValueError(f"ell={ell} exceeds vector length {n}")
            fl = _floor(ell)
            w = [1] * fl + [0] * (n - fl)
            if fl < n:
                w[fl] = as_exact(ell - fl)
            return tuple(w)
        if self.kind == "ordered":
            return _pad_weights(self.weights, n)
        raise ValueError("Lp is not an ordered norm")

    def top_l_decomposition(self, n: int) -> list[tuple[int, Number]]:
        """[(ell, coeff)] with coeff > 0 such that norm = sum coeff * top_ell (integer ell)."""
        w = self.ordered_weights(n)
        out = []
        for ell in range(1, n + 1):
            nxt = w[ell] if ell < n else 0
            coeff = w[ell - 1] - nxt
            if coeff:
                out.append((ell, coeff))
        return out


def rat_str(x) -> str:
    x = as_exact(x)
    if isinstance(x, int):
        return str(x)
    return f"{x.numerator}/{x.denominator}"


def check_weights(w: Sequence[Number]) -> None:
    for a in w:
        if a < 0:
            raise ValueError("ordered weights must be nonnegative")
    for a, b in zip(w, w[1:]):
        if b > a:
            raise ValueError("ordered weights must be nonincreasing")


def _pad_weights(w: Sequence[Number], n: int) -> tuple[Number, ...]:
    w = tuple(w)
    if len(w) > n:
        if any(w[n:]):
            raise ValueError(f"weight vector of length {len(w)} for vector of length {n}")
        return w[:n]
    return w + (0,) * (n - len(w))


def _check_vector(v: Sequence) -> list[Number]:
    out = [as_exact(x) for x in v]
    for x in out:
        if x < 0:
            raise ValueError("cost vectors are nonnegative")
    return out


def top_l(v: Sequence, ell) -> Number:
    """Sum of the floor(ell) largest entries plus the fractional part times the next one."""
    v = _check_vector(v)
    ell = as_exact(ell)
    if ell < 0 or ell > len(v):
        raise ValueError(f"ell={ell} outside [0, {len(v)}]")
    s = sorted(v, reverse=True)
    fl = _floor(ell)
    total = sum(s[:fl], 0)
    if fl < len(s):
        total += (ell - fl) * s[fl]
    return as_exact(total)


def top_l_via_threshold(v: Sequence, ell, t) -> Number:
    """sum_j (v_j - t)^+ + ell * t."""
    v = _check_vector(v)
    ell, t = as_exact(ell), as_exact(t)
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return as_exact(sum((x - t for x in v if x > t), 0) + ell * t)


def top_l_min_threshold(v: Sequence, ell) -> tuple[Number, Number]:
    """(min value, argmin t) of the threshold form over t in {entries} U {0}."""
    v = _check_vector(v)
    best = None
    for t in sorted(set(v) | {0}):
        val = top_l_via_threshold(v, ell, t)
        if best is None or val < best[0]:
            best = (val, t)
    return best


def ordered_norm(w: Sequence, v: Sequence) -> Number:
    v = _check_vector(v)
    w = tuple(as_exact(x) for x in w)
    check_weights(w)
    w = _pad_weights(w, len(v))
    s = sorted(v, reverse=True)
    return as_exact(sum((a * b for a, b in zip(w, s)), 0))


def ordered_norm_by_top_l(w: Sequence, v: Sequence) -> Number:
    """sum_ell (w_ell - w_{ell+1}) * top_ell(v)."""
    v = _check_vector(v)
    w = tuple(as_exact(x) for x in w)
    check_weights(w)
    w = _pad_weights(w, len(v)) + (0,)
    return as_exact(sum(((w[i] - w[i + 1]) * top_l(v, i + 1) for i in range(len(v))), 0))


def lp_value(v: Sequence, p) -> LpValue:
    v = _check_vector(v)
    p = as_exact(p)
    if isinstance(p, int):
        ps = as_exact(sum((x**p for x in v), 0))
        root = float(ps) ** (1.0 / p)
    else:
        # non-integer exponents leave the rationals; keep the float
        ps = sum(float(x) ** float(p) for x in v)
        root = ps ** (1.0 / float(p))
    return LpValue(ps, p, root)


def eval_norm(spec: NormSpec, v: Sequence):
    """Exact norm value.  Returns :class:`LpValue` for Lp norms."""
    v = _check_vector(v)
    if spec.kind == "linf":
        return max(v, default=0)
    if spec.kind == "l1":
        return as_exact(sum(v, 0))
    if spec.kind == "topl":
        return top_l(v, spec.ell)
    if spec.kind == "ordered":
        return ordered_norm(spec.weights, v)
    return lp_value(v, spec.p)


def comparable(value) -> Number | float:
    """Key that orders norm values; Lp compares by power sum."""
    if isinstance(value, LpValue):
        return value.power_sum
    return value


def norm_float(value) -> float:
    return value.root if isinstance(value, LpValue) else float(value)


def sampled_max_norm(weight_family: Sequence[Sequence], v: Sequence) -> Number:
    """max over a finite family of ordered norms."""
    return max(ordered_norm(w, v) for w in weight_family)
