"""Predictor functions as sparse polynomial term lists.

A predictor is a product of per-factor pieces ``g(x_j) ** e`` times a
coefficient, where ``g`` is one of a few fixed transforms.  Keeping
predictors symbolic gives exact partial derivatives with respect to the
continuous factors, which the sensitivity search needs.

Terms can be written as strings::

    "1"   "x1"   "x1*x2"   "x3^2"   "0.5*x1*log1p(x2)"
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch

_TRANSFORMS = {
    "id": (lambda x: x, lambda x: np.ones_like(x)),
    "log": (np.log, lambda x: 1.0 / x),
    "log1p": (np.log1p, lambda x: 1.0 / (1.0 + x)),
    "exp": (np.exp, np.exp),
}


@dataclass(frozen=True)
class Factor:
    index: int
    power: int = 1
    transform: str = "id"

    def __post_init__(self):
        if self.transform not in _TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.power < 1:
            raise ValueError("factor powers must be positive integers")


@dataclass(frozen=True)
class Term:
    coef: float = 1.0
    factors: tuple[Factor, ...] = ()

    def max_index(self) -> int:
        return max((f.index for f in self.factors), default=-1)


_PIECE = re.compile(
    r"^(?:(?P<fn>[A-Za-z_][A-Za-z0-9_]*)\((?P<arg>[A-Za-z_][A-Za-z0-9_]*)\)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*))(?:\^(?P<pow>\d+))?$"
)


def parse_term(text: str, names: Sequence[str]) -> Term:
    """Parse one product term such as ``"2*x1*log1p(x2)^2"``."""
    lookup = {n: i for i, n in enumerate(names)}
    coef = 1.0
    collected: dict[tuple[int, str], int] = {}
    pieces = [s.strip() for s in text.replace("**", "^").split("*")]
    if not text.strip() or any(not s for s in pieces):
        raise ValueError(f"malformed predictor term {text!r}")
    for piece in pieces:
        try:
            coef *= float(piece)
            continue
        except ValueError:
            pass
        m = _PIECE.match(piece)
        if m is None:
            raise ValueError(f"cannot parse {piece!r} in predictor term {text!r}")
        name = m.group("arg") or m.group("name")
        fn = m.group("fn") or "id"
        if fn not in _TRANSFORMS:
            raise ValueError(f"unknown transform {fn!r} in {text!r}")
        if name not in lookup:
            raise ValueError(f"unknown factor {name!r} in {text!r}; known: {list(names)}")
        key = (lookup[name], fn)
        collected[key] = collected.get(key, 0) + int(m.group("pow") or 1)
    factors = tuple(Factor(i, e, fn) for (i, fn), e in sorted(collected.items()))
    return Term(coef, factors)


class Predictors:
    """An ordered list of predictor terms ``h(x) = (h_1(x), ..., h_q(x))``."""

    def __init__(self, terms: Sequence[Term], d: int):
        self.terms = tuple(terms)
        self.d = int(d)
        for t in self.terms:
            if t.max_index() >= self.d:
                raise DimensionMismatch(f"term references factor {t.max_index()} but d={self.d}")

    @classmethod
    def parse(cls, specs: Sequence[str], names: Sequence[str]) -> "Predictors":
        return cls([parse_term(s, names) for s in specs], len(names))

    @classmethod
    def linear(cls, d: int, intercept: bool = True) -> "Predictors":
        terms = [Term()] if intercept else []
        terms += [Term(1.0, (Factor(j),)) for j in range(d)]
        return cls(terms, d)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"Predictors(q={len(self)}, d={self.d})"

    def evaluate(self, X) -> np.ndarray:
        """Rows of ``X`` (n, d) -> matrix (n, q); a single point gives shape (q,)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"points have {X.shape[1]} coordinates, expected {self.d}")
        out = np.empty((X.shape[0], len(self.terms)))
        for c, t in enumerate(self.terms):
            col = np.full(X.shape[0], t.coef)
            for f in t.factors:
                col = col * _TRANSFORMS[f.transform][0](X[:, f.index]) ** f.power
            out[:, c] = col
        return out[0] if single else out

    def jacobian(self, x, k: int) -> np.ndarray:
        """Exact partials ``dh_i / dx_j`` for the first ``k`` (continuous) factors, shape (q, k)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"point has shape {x.shape}, expected ({self.d},)")
        out = np.zeros((len(self.terms), k))
        for c, t in enumerate(self.terms):
            vals = [_TRANSFORMS[f.transform][0](x[f.index]) ** f.power for f in t.factors]
            for a, f in enumerate(t.factors):
                if f.index >= k:
                    continue
                g, dg = _TRANSFORMS[f.transform]
                piece = f.power * g(x[f.index]) ** (f.power - 1) * dg(x[f.index])
                rest = np.prod([v for b, v in enumerate(vals) if b != a])
                out[c, f.index] += t.coef * piece * rest
        return out
