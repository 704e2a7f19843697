"""Kruskal-Wallis omnibus test, Dunn's post-hoc test with Benjamini-Yekutieli
adjustment, and the Vargha-Delaney effect size with scaled magnitude bands.

The chi-squared and normal survival functions are implemented here so that
nothing beyond the standard library is needed at run time.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

DEFAULT_ALPHA = 0.01

# |scaled A12| lower bounds of small, medium and large
BANDS = ((0.474, "large"), (0.33, "medium"), (0.147, "small"))


@dataclass(frozen=True)
class SampleGroup:
    label: str
    observations: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "observations", tuple(float(x) for x in self.observations))
        if not self.observations:
            raise ValueError(f"group {self.label!r} is empty")


@dataclass(frozen=True)
class PairwiseComparison:
    group1: str
    group2: str
    z: float
    p_raw: float
    p_adjusted: float
    a12: float = math.nan
    scaled: float = math.nan
    magnitude: str = ""
    verdict: str = ""


# -- special functions ----------------------------------------------------------

_EPS = 1e-16
_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    n = a
    for _ in range(10_000):
        n += 1
        term *= x / n
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_continued_fraction(a: float, x: float) -> float:
    # modified Lentz
    b = x + 1 - a
    c = 1 / _TINY
    d = 1 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = _TINY if abs(d) < _TINY else d
        c = b + an / c
        c = _TINY if abs(c) < _TINY else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0 or x < 0:
        raise ValueError("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1:
        return max(0.0, 1.0 - _gamma_p_series(a, x))
    return _gamma_q_continued_fraction(a, x)


def chi2_sf(x: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be >= 1")
    return 1.0 if x <= 0 else gamma_q(df / 2, x / 2)


def norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


# -- ranks ----------------------------------------------------------------------


def midranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    """1-based mid-ranks and the sizes of the tie groups."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def _pooled(groups: Sequence[SampleGroup]) -> tuple[list[list[float]], int, float]:
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    values = [x for g in groups for x in g.observations]
    ranks, ties = midranks(values)
    out, pos = [], 0
    for g in groups:
        out.append(ranks[pos : pos + len(g.observations)])
        pos += len(g.observations)
    return out, len(values), float(sum(t**3 - t for t in ties))


def kruskal_wallis(groups: Sequence[SampleGroup]) -> tuple[float, float]:
    ranks, n, tie_sum = _pooled(groups)
    correction = 1 - tie_sum / (n**3 - n) if n > 1 else 0.0
    if correction <= 0:
        return 0.0, 1.0
    h = 12 / (n * (n + 1)) * sum(sum(r) ** 2 / len(r) for r in ranks) - 3 * (n + 1)
    h = max(h, 0.0) / correction
    return h, chi2_sf(h, len(groups) - 1)


def benjamini_yekutieli(pvalues: Sequence[float]) -> list[float]:
    m = len(pvalues)
    if m == 0:
        return []
    c_m = sum(1 / i for i in range(1, m + 1))
    order = sorted(range(m), key=pvalues.__getitem__)
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        idx = order[rank - 1]
        running = min(running, pvalues[idx] * m * c_m / rank)
        adjusted[idx] = min(running, 1.0)
    return adjusted


def dunn_posthoc(groups: Sequence[SampleGroup]) -> list[PairwiseComparison]:
    """All pairs in input order, p values adjusted together."""
    ranks, n, tie_sum = _pooled(groups)
    variance = n * (n + 1) / 12 - tie_sum / (12 * (n - 1)) if n > 1 else 0.0
    means = [sum(r) / len(r) for r in ranks]
    pairs = list(itertools.combinations(range(len(groups)), 2))
    zs, raw = [], []
    for i, j in pairs:
        se = math.sqrt(variance * (1 / len(ranks[i]) + 1 / len(ranks[j]))) if variance > 0 else 0.0
        z = (means[i] - means[j]) / se if se > 0 else 0.0
        zs.append(z)
        raw.append(min(1.0, 2 * norm_sf(abs(z))))
    adjusted = benjamini_yekutieli(raw)
    return [
        PairwiseComparison(groups[i].label, groups[j].label, z, p, q)
        for (i, j), z, p, q in zip(pairs, zs, raw, adjusted)
    ]


# -- effect size ------------------------------------------------------------------


def magnitude(scaled: float) -> str:
    size = abs(scaled)
    for bound, name in BANDS:
        if size >= bound:
            return name
    return "negligible"


def scale_a12(a12: float) -> float:
    return (a12 - 0.5) * 2


def vda(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, str]:
    """A12 = P(a > b) + 0.5 P(a = b), its scaled form and magnitude."""
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    greater = equal = 0
    for x in a:
        for y in b:
            if x > y:
                greater += 1
            elif x == y:
                equal += 1
    a12 = (greater + 0.5 * equal) / (len(a) * len(b))
    scaled = scale_a12(a12)
    return a12, scaled, magnitude(scaled)


def verdict(p_adjusted: float, a12: float, mag: str, alpha: float, lower_is_better: bool = False) -> str:
    if p_adjusted >= alpha or mag == "negligible" or a12 == 0.5:
        return "equal"
    first_higher = a12 > 0.5
    return "better" if first_higher != lower_is_better else "worse"


@dataclass
class ComparisonReport:
    metric: str
    h: float
    p: float
    alpha: float
    pairs: list[PairwiseComparison] = field(default_factory=list)

    @property
    def significant(self) -> bool:
        return self.p < self.alpha


def compare_all(
    groups: Sequence[SampleGroup], alpha: float = DEFAULT_ALPHA, lower_is_better: bool = False, metric: str = ""
) -> ComparisonReport:
    h, p = kruskal_wallis(groups)
    report = ComparisonReport(metric, h, p, alpha)
    if p >= alpha:
        return report
    obs = {g.label: g.observations for g in groups}
    for pc in dunn_posthoc(groups):
        a12, scaled, mag = vda(obs[pc.group1], obs[pc.group2])
        report.pairs.append(
            PairwiseComparison(
                pc.group1, pc.group2, pc.z, pc.p_raw, pc.p_adjusted, a12, scaled, mag,
                verdict(pc.p_adjusted, a12, mag, alpha, lower_is_better),
            )
        )
    return report


TABLE_COLUMNS = ("metric", "model1", "model2", "comparison", "p", "A12", "magnitude")


def to_csv(reports: Sequence[ComparisonReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS + ("H", "p_omnibus"))
    for rep in reports:
        if not rep.pairs:
            w.writerow([rep.metric, "", "", "", "", "", "", f"{rep.h:.6g}", f"{rep.p:.6g}"])
        for pc in rep.pairs:
            w.writerow([rep.metric, pc.group1, pc.group2, pc.verdict, f"{pc.p_adjusted:.4g}", f"{pc.a12:.3g}", pc.magnitude, f"{rep.h:.6g}", f"{rep.p:.6g}"])
    return buf.getvalue()


def to_text(reports: Sequence[ComparisonReport]) -> str:
    lines = [f"{'Metric':<14} {'Model 1':<12} {'Model 2':<12} {'Comparison':<10} {'p-value':>10} {'A12':>7}  Magnitude"]
    for rep in reports:
        if not rep.pairs:
            lines.append(f"{rep.metric:<14} (omnibus H={rep.h:.3f}, p={rep.p:.3g}; no post-hoc)")
        for pc in rep.pairs:
            lines.append(
                f"{rep.metric:<14} {pc.group1:<12} {pc.group2:<12} {pc.verdict:<10} {pc.p_adjusted:>10.3g} {pc.a12:>7.3g}  {pc.magnitude}"
            )
    return "\n".join(lines)
