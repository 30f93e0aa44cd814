"""Statistical machinery: Welch's t, two-way ANOVA (Type II), Games-Howell.

The t and F distribution functions are computed from the regularized
incomplete beta function, evaluated with the modified Lentz continued
fraction to an absolute tolerance of 1e-10. The studentized range CDF is
the textbook double integral (range of k standard normals, studentized by
an independent chi-scaled error estimate) evaluated with adaptive
quadrature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, ParseError, ValidationError

_BETA_EPS = 1e-15
_BETA_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
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
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise NumericalError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise DomainError("beta parameters must be positive")
    if x < 0.0 or x > 1.0:
        raise DomainError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided p-value for a t statistic with df degrees of freedom."""
    if df <= 0:
        raise DomainError("df must be positive")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def f_sf(f_stat: float, df1: float, df2: float) -> float:
    """P(F > f) for the F distribution."""
    if df1 <= 0 or df2 <= 0:
        raise DomainError("degrees of freedom must be positive")
    if f_stat <= 0:
        return 1.0
    x = df2 / (df2 + df1 * f_stat)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


class WelchResult(NamedTuple):
    t: float
    df: float
    p: float
    degenerate: bool = False


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t-test (two-sided).

    Degenerate zero-variance inputs do not raise: equal means give t=0 at
    the pooled df, unequal means give an infinite t with p=0, both flagged.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DomainError("each sample needs at least 2 observations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("samples must be finite")
    na, nb = a.size, b.size
    mean_a, mean_b = float(np.mean(a)), float(np.mean(b))
    var_a = float(np.var(a, ddof=1))
    var_b = float(np.var(b, ddof=1))
    se2 = var_a / na + var_b / nb
    if se2 == 0.0:
        if mean_a == mean_b:
            return WelchResult(t=0.0, df=float(na + nb - 2), p=1.0, degenerate=True)
        t = math.inf if mean_a > mean_b else -math.inf
        return WelchResult(t=t, df=float(na + nb - 2), p=0.0, degenerate=True)
    t = (mean_a - mean_b) / math.sqrt(se2)
    df = se2 * se2 / (
        (var_a / na) ** 2 / (na - 1) + (var_b / nb) ** 2 / (nb - 1)
    )
    return WelchResult(t=t, df=df, p=t_sf_two_sided(t, df))


# ---------------------------------------------------------------------------
# Studentized range distribution


def _phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _Phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _range_cdf(w: float, k: int) -> float:
    """CDF of the range of k iid standard normals."""
    if w <= 0.0:
        return 0.0

    def integrand(z: float) -> float:
        return _phi(z) * (_Phi(z) - _Phi(z - w)) ** (k - 1)

    value, abserr = integrate.quad(integrand, -10.0, 10.0, epsabs=1e-12, epsrel=1e-10,
                                   limit=200)
    if abserr > 1e-8:
        raise NumericalError(f"inner range integral error {abserr:.2e} at w={w}, k={k}")
    return min(1.0, k * value)


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """P(Q <= q) for the studentized range with k groups and df error dof.

    Outer integral runs over the distribution of s = sqrt(chi2_df / df);
    absolute error target 1e-5 (typically far better).
    """
    if q < 0:
        raise DomainError("q must be non-negative")
    if k < 2:
        raise DomainError("k must be at least 2")
    if df <= 0:
        raise DomainError("df must be positive")
    if q == 0.0:
        return 0.0

    # log-density of s, with the normalization constant via lgamma so large
    # df cannot overflow: f(s) = 2 (df/2)^(df/2) / Gamma(df/2) s^(df-1) e^(-df s^2/2)
    half = df / 2.0
    ln_const = math.log(2.0) + half * math.log(half) - math.lgamma(half)

    def outer(s: float) -> float:
        if s <= 0.0:
            return 0.0
        ln_f = ln_const + (df - 1.0) * math.log(s) - half * s * s
        if ln_f < -745.0:
            return 0.0
        return math.exp(ln_f) * _range_cdf(q * s, k)

    sigma = 1.0 / math.sqrt(2.0 * df)
    lo = max(1e-12, 1.0 - 40.0 * sigma)
    hi = 1.0 + 40.0 * sigma
    value, abserr = integrate.quad(outer, lo, hi, epsabs=1e-10, epsrel=1e-9, limit=300)
    if abserr > 1e-6:
        raise NumericalError(
            f"studentized range quadrature error {abserr:.2e} at q={q}, k={k}, df={df}"
        )
    return min(1.0, max(0.0, value))


# ---------------------------------------------------------------------------
# Two-way ANOVA (Type II sums of squares)


@dataclass(frozen=True)
class Observation:
    terminology: str
    correctness: int
    value: float


@dataclass(frozen=True)
class AnovaEffect:
    name: str
    ss: float
    df: float
    ms: float
    f: float
    p: float


@dataclass
class AnovaTable:
    effects: list[AnovaEffect]
    factor_a: str = "terminology"
    factor_b: str = "correctness"
    interaction_dropped: bool = False
    degenerate: bool = False
    warnings: list[str] = field(default_factory=list)

    def effect(self, name: str) -> AnovaEffect:
        for e in self.effects:
            if e.name == name:
                return e
        raise KeyError(name)


def _design_columns(levels: list, values: list) -> np.ndarray:
    """Full-rank dummy coding: one indicator per non-reference level."""
    cols = []
    for level in levels[1:]:
        cols.append(np.asarray([1.0 if v == level else 0.0 for v in values]))
    if cols:
        return np.column_stack(cols)
    return np.empty((len(values), 0))


def _rss(design: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    """Residual sum of squares and model rank from least squares."""
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), int(rank)


def two_way_anova(observations: Sequence[Observation]) -> AnovaTable:
    """Type II two-way ANOVA via nested least-squares model comparisons.

    Safe for unbalanced designs. Configurations with empty cells drop the
    interaction term (additive model) and attach a warning; Type II main
    effects remain well defined.
    """
    obs = list(observations)
    if not obs:
        raise DomainError("no observations")
    y = np.asarray([o.value for o in obs], dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("observation values must be finite")
    a_values = [o.terminology for o in obs]
    b_values = [o.correctness for o in obs]
    a_levels = sorted(set(a_values))
    b_levels = sorted(set(b_values))
    cells = {(a, b) for a, b in zip(a_values, b_values)}
    if len(cells) < 2:
        raise DomainError("need at least 2 non-empty cells")
    n = len(obs)
    if n <= len(cells):
        raise DomainError("need more observations than non-empty cells")

    warnings: list[str] = []
    full_grid = {(a, b) for a in a_levels for b in b_levels}
    empty_cells = sorted(full_grid - cells)
    interaction_dropped = bool(empty_cells)
    if interaction_dropped:
        warnings.append(
            "empty cells "
            + ", ".join(f"({a}, {b})" for a, b in empty_cells)
            + ": interaction dropped, main effects computed on the additive model"
        )

    intercept = np.ones((n, 1))
    xa = _design_columns(a_levels, a_values)
    xb = _design_columns(b_levels, b_values)
    if xa.shape[1] and xb.shape[1]:
        xab = np.column_stack(
            [xa[:, i] * xb[:, j] for i in range(xa.shape[1]) for j in range(xb.shape[1])]
        )
    else:
        xab = np.empty((n, 0))

    design_b = np.column_stack([intercept, xb])
    design_a = np.column_stack([intercept, xa])
    design_ab = np.column_stack([intercept, xa, xb])
    rss_b, _ = _rss(design_b, y)
    rss_a, _ = _rss(design_a, y)
    rss_additive, rank_additive = _rss(design_ab, y)

    ss_a = max(0.0, rss_b - rss_additive)
    ss_b = max(0.0, rss_a - rss_additive)
    df_a = float(len(a_levels) - 1)
    df_b = float(len(b_levels) - 1)

    effects: list[AnovaEffect] = []
    if interaction_dropped:
        rss_resid, rank_model = rss_additive, rank_additive
        ss_ab = df_ab = None
    else:
        design_full = np.column_stack([intercept, xa, xb, xab])
        rss_full, rank_full = _rss(design_full, y)
        ss_ab = max(0.0, rss_additive - rss_full)
        df_ab = float(rank_full - rank_additive)
        rss_resid, rank_model = rss_full, rank_full

    df_resid = float(n - rank_model)
    total_var = float(np.var(y))
    degenerate = total_var == 0.0
    ms_resid = rss_resid / df_resid if df_resid > 0 else 0.0

    def make_effect(name: str, ss: float, dfe: float) -> AnovaEffect:
        ms = ss / dfe if dfe > 0 else 0.0
        if degenerate or ms_resid == 0.0 or dfe <= 0 or df_resid <= 0:
            return AnovaEffect(name, ss, dfe, ms, 0.0, 1.0)
        f_stat = ms / ms_resid
        return AnovaEffect(name, ss, dfe, ms, f_stat, f_sf(f_stat, dfe, df_resid))

    effects.append(make_effect("A", ss_a, df_a))
    effects.append(make_effect("B", ss_b, df_b))
    if not interaction_dropped:
        effects.append(make_effect("A×B", ss_ab, df_ab))
    effects.append(
        AnovaEffect("Residual", rss_resid, df_resid,
                    ms_resid, float("nan"), float("nan"))
    )
    if degenerate:
        warnings.append("all observations identical: every SS is zero")
    return AnovaTable(
        effects=effects,
        interaction_dropped=interaction_dropped,
        degenerate=degenerate,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Games-Howell post hoc test


@dataclass(frozen=True)
class GamesHowellRow:
    group_i: str
    group_j: str
    mean_diff: float
    se: float
    t: float
    df: float
    p_adj: float
    degenerate: bool = False


@dataclass(frozen=True)
class GamesHowellResult:
    rows: tuple[GamesHowellRow, ...]

    def row(self, group_i: str, group_j: str) -> GamesHowellRow:
        wanted = {group_i, group_j}
        for r in self.rows:
            if {r.group_i, r.group_j} == wanted:
                return r
        raise KeyError(f"no pair {group_i}/{group_j}")


def games_howell(groups: Sequence[tuple[str, Sequence[float]]]) -> GamesHowellResult:
    """Pairwise comparisons without the equal-variance assumption.

    Per pair: Welch standard error and Satterthwaite df; the statistic
    q = |mean difference| * sqrt(2) / se is referred to the studentized
    range distribution with k = number of groups.
    """
    if len(groups) < 2:
        raise DomainError("need at least 2 groups")
    stats = []
    for label, values in groups:
        arr = np.asarray(values, dtype=float)
        if arr.size < 2:
            raise DomainError(f"group {label!r} needs at least 2 observations")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"group {label!r} contains non-finite values")
        stats.append((label, float(np.mean(arr)), float(np.var(arr, ddof=1)), arr.size))
    k = len(stats)
    rows = []
    for i in range(k):
        for j in range(i + 1, k):
            label_i, mean_i, var_i, n_i = stats[i]
            label_j, mean_j, var_j, n_j = stats[j]
            diff = mean_i - mean_j
            se2 = var_i / n_i + var_j / n_j
            if se2 == 0.0:
                if diff == 0.0:
                    rows.append(GamesHowellRow(label_i, label_j, 0.0, 0.0, 0.0,
                                               float(n_i + n_j - 2), 1.0, True))
                else:
                    t = math.inf if diff > 0 else -math.inf
                    rows.append(GamesHowellRow(label_i, label_j, diff, 0.0, t,
                                               float(n_i + n_j - 2), 0.0, True))
                continue
            se = math.sqrt(se2)
            t = diff / se
            df = se2 * se2 / (
                (var_i / n_i) ** 2 / (n_i - 1) + (var_j / n_j) ** 2 / (n_j - 1)
            )
            q = abs(diff) * math.sqrt(2.0) / se
            p_adj = 1.0 - studentized_range_cdf(q, k, df)
            rows.append(GamesHowellRow(label_i, label_j, diff, se, t, df,
                                       min(1.0, max(0.0, p_adj))))
    return GamesHowellResult(rows=tuple(rows))


# ---------------------------------------------------------------------------
# CSV interfaces


OBSERVATION_CSV_COLUMNS = ["terminology", "correctness", "value"]


def read_observations_csv(stream: IO) -> list[Observation]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header != OBSERVATION_CSV_COLUMNS:
        raise ParseError(f"unexpected observation CSV header: {header}", 1)
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", lineno)
        correctness = int(row[1])
        if correctness not in (0, 1):
            raise ValidationError(f"line {lineno}: correctness must be 0 or 1")
        out.append(Observation(row[0], correctness, float(row[2])))
    return out


def write_observations_csv(observations: Sequence[Observation], sink: IO) -> int:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(OBSERVATION_CSV_COLUMNS)
    for o in observations:
        writer.writerow([o.terminology, o.correctness, repr(o.value)])
    return len(observations)


def write_anova_csv(table: AnovaTable, sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["effect", "ss", "df", "ms", "F", "p"])
    for e in table.effects:
        writer.writerow([
            e.name, repr(e.ss), repr(e.df), repr(e.ms),
            "" if math.isnan(e.f) else repr(e.f),
            "" if math.isnan(e.p) else repr(e.p),
        ])
    for w in table.warnings:
        writer.writerow(["warning", w, "", "", "", ""])


def write_games_howell_csv(result: GamesHowellResult, sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["group_i", "group_j", "mean_diff", "se", "t", "df", "p_adj"])
    for r in result.rows:
        writer.writerow([
            r.group_i, r.group_j, repr(r.mean_diff), repr(r.se),
            repr(r.t), repr(r.df), repr(r.p_adj),
        ])
