"""Pearson correlation between rating features, sentiment and the overall rating."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .data import Category, Dataset

P_FLOOR = 1e-300


class InsufficientPairs(ValueError):
    pass


class DegenerateVariable(ValueError):
    pass


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 1000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_test_p(r: float, n: int) -> float:
    """Two-sided p-value for H0: rho = 0 given sample correlation r over n pairs."""
    df = n - 2
    if abs(r) >= 1.0:
        return 0.0
    # t^2 = r^2 df / (1 - r^2)  =>  df / (df + t^2) = 1 - r^2
    p = betainc_regularized(df / 2.0, 0.5, 1.0 - r * r)
    return 0.0 if p < P_FLOOR else min(1.0, p)


def pearson(x: Sequence[float | None], y: Sequence[float | None]) -> tuple[float, float, int]:
    """Pairwise-complete Pearson r with its two-sided p-value.

    Returns ``(r, p, n)`` where ``n`` counts the pairs with both values present.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    xs, ys = [], []
    for a, b in zip(x, y):
        if a is not None and b is not None:
            xs.append(float(a))
            ys.append(float(b))
    n = len(xs)
    if n < 3:
        raise InsufficientPairs(f"insufficient pairs: {n} < 3")
    if min(xs) == max(xs) or min(ys) == max(ys):
        raise DegenerateVariable("degenerate variable: zero variance")

    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [a - mx for a in xs]
    dy = [b - my for b in ys]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return r, t_test_p(r, n), n


@dataclass(frozen=True)
class CorrelationReport:
    category: Category
    variables: tuple[str, ...]
    r: tuple[tuple[float | None, ...], ...]
    p: tuple[tuple[float | None, ...], ...]
    n: tuple[tuple[int, ...], ...]

    def index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise KeyError(f"no variable {name!r} in report") from None

    def get(self, a: str, b: str) -> float | None:
        return self.r[self.index(a)][self.index(b)]

    def p_value(self, a: str, b: str) -> float | None:
        return self.p[self.index(a)][self.index(b)]

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "variables": list(self.variables),
            "r": [list(row) for row in self.r],
            "p": [list(row) for row in self.p],
            "n": [list(row) for row in self.n],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CorrelationReport":
        return cls(
            category=Category.parse(obj["category"]),
            variables=tuple(obj["variables"]),
            r=tuple(tuple(row) for row in obj["r"]),
            p=tuple(tuple(row) for row in obj["p"]),
            n=tuple(tuple(row) for row in obj["n"]),
        )

    def write_json(self, path, header: dict | None = None) -> None:
        obj = {**({"config": header} if header else {}), **self.to_dict()}
        Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def read_json(cls, path) -> "CorrelationReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def write_csv(self, path, header: dict | None = None) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            if header:
                fh.write(f"# {json.dumps(header, sort_keys=True)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["variable", *self.variables])
            for name, row in zip(self.variables, self.r):
                w.writerow([name, *("" if v is None else repr(v) for v in row)])


def correlation_matrix(d: Dataset) -> CorrelationReport:
    """Pearson r, p and pairwise-complete n for every pair of variables."""
    variables = (*d.schema.features, "overall", "sentiment")
    columns = [[rec.value(v) for rec in d.records] for v in variables]
    k = len(variables)
    r = [[None] * k for _ in range(k)]
    p = [[None] * k for _ in range(k)]
    n = [[0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            pairs = sum(1 for a, b in zip(columns[i], columns[j]) if a is not None and b is not None)
            n[i][j] = n[j][i] = pairs
            if i == j:
                if pairs >= 2:
                    r[i][i], p[i][i] = 1.0, 0.0
                continue
            try:
                rij, pij, _ = pearson(columns[i], columns[j])
            except ValueError:
                continue
            r[i][j] = r[j][i] = rij
            p[i][j] = p[j][i] = pij
    return CorrelationReport(
        d.category, variables,
        tuple(map(tuple, r)), tuple(map(tuple, p)), tuple(map(tuple, n)),
    )


def ranked_correlates(rep: CorrelationReport, target: str = "overall",
                      exclude: Sequence[str] = ("sentiment",)) -> list[tuple[str, float]]:
    """Variables ordered by r with ``target``, highest first; ties by name."""
    t = rep.index(target)
    out = []
    for name, row in zip(rep.variables, rep.r):
        if name == target or name in exclude or row[t] is None:
            continue
        out.append((name, row[t]))
    out.sort(key=lambda item: (-item[1], item[0]))
    return out


def select_features(rep: CorrelationReport, threshold: float = 0.3, *,
                    include_overall: bool = True,
                    include_sentiment: bool = False) -> list[str]:
    """Features whose correlation with the overall rating exceeds ``threshold``."""
    exclude = () if include_sentiment else ("sentiment",)
    chosen = [(name, r) for name, r in ranked_correlates(rep, "overall", exclude) if r > threshold]
    if include_overall:
        own = rep.get("overall", "overall")
        if own is not None and own > threshold:
            chosen.append(("overall", own))
    chosen.sort(key=lambda item: (-item[1], item[0]))
    return [name for name, _ in chosen]
