"""Photo demographics, the census join, and the statistics run on them."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_regression_inputs
from .corpus import LegislatorRecord, load_table
from .exceptions import (
    CollinearityError,
    IdentificationError,
    InsufficientDataError,
    JoinError,
    ReferenceIntegrityError,
    SchemaError,
)
from .imagecore import Rect
from .neuralnet import RACE_LABELS

log = logging.getLogger(__name__)

# column suffix used for each label in tables
RACE_KEYS = {"White": "white", "AfricanAmerican": "black", "Asian": "asian", "Hispanic": "hispanic"}
ACS_COLUMNS = ["geo_id", "pct_white", "pct_black", "pct_hispanic", "pct_asian"]
DEMOGRAPHIC_COLUMNS = (
    ["member_id", "n_faces"]
    + [f"n_{RACE_KEYS[l]}" for l in RACE_LABELS]
    + [f"fb_prop_{RACE_KEYS[l]}" for l in RACE_LABELS]
    + ["insufficient", "removed_self"]
)
JOINED_COLUMNS = (
    ["member_id", "chamber", "party", "state", "district", "is_white", "n_faces"]
    + [f"fb_prop_{RACE_KEYS[l]}" for l in RACE_LABELS]
    + [f"acs_pct_{RACE_KEYS[l]}" for l in RACE_LABELS]
)


class ClassifiedFace(NamedTuple):
    photo_id: str
    member_id: str
    box: Rect
    label: str
    confidence: float


# --- aggregation -------------------------------------------------------------------


@dataclass(frozen=True)
class MemberPhotoDemographics:
    member_id: str
    counts: dict
    proportions: dict
    n_faces: int
    insufficient: bool = False
    removed_self: int = 0

    def row(self) -> dict:
        out = {"member_id": self.member_id, "n_faces": self.n_faces}
        for label in RACE_LABELS:
            out[f"n_{RACE_KEYS[label]}"] = self.counts[label]
        for label in RACE_LABELS:
            out[f"fb_prop_{RACE_KEYS[label]}"] = self.proportions[label]
        out["insufficient"] = self.insufficient
        out["removed_self"] = self.removed_self
        return out

    @classmethod
    def from_row(cls, row: Mapping) -> "MemberPhotoDemographics":
        counts = {l: int(row[f"n_{RACE_KEYS[l]}"]) for l in RACE_LABELS}
        props = {l: float(row[f"fb_prop_{RACE_KEYS[l]}"]) for l in RACE_LABELS}
        return cls(row["member_id"], counts, props, int(row["n_faces"]),
                   str(row["insufficient"]).lower() == "true", int(row.get("removed_self") or 0))


def aggregate_demographics(faces: Sequence[ClassifiedFace], roster: Sequence[LegislatorRecord],
                           exclude_self: bool = False) -> list:
    """Per-member label counts and proportions, one entry per roster member.

    With ``exclude_self``, each photo of a member flagged ``is_white`` loses
    one face labelled White, on the assumption that it is the member.  The
    roster records no other member race, so other members are not adjusted.
    """
    known = {r.member_id: r for r in roster}
    by_member: dict = {m: {} for m in known}
    for face in faces:
        if face.member_id not in known:
            raise ReferenceIntegrityError(f"face in photo {face.photo_id} references unknown member {face.member_id}")
        if face.label not in RACE_LABELS:
            raise ValueError(f"unknown label {face.label!r}")
        by_member[face.member_id].setdefault(face.photo_id, []).append(face)
    out = []
    total_removed = 0
    for member_id, photos in by_member.items():
        counts = {l: 0 for l in RACE_LABELS}
        removed = 0
        own = "White" if known[member_id].is_white else None
        for photo_id in sorted(photos):
            labels = [f.label for f in sorted(photos[photo_id], key=lambda f: (f.box.y, f.box.x, f.box.w, f.box.h))]
            if exclude_self and own in labels:
                labels.remove(own)
                removed += 1
            for label in labels:
                counts[label] += 1
        n = sum(counts.values())
        props = {l: (counts[l] / n if n else 0.0) for l in RACE_LABELS}
        out.append(MemberPhotoDemographics(member_id, counts, props, n, n == 0, removed))
        total_removed += removed
    if exclude_self:
        log.info("exclude_self removed %d faces across %d members", total_removed, len(out))
    return out


# --- census join -----------------------------------------------------------------------


@dataclass(frozen=True)
class DistrictDemographics:
    geo_id: str
    pct_white: float
    pct_black: float
    pct_hispanic: float
    pct_asian: float

    def __post_init__(self):
        object.__setattr__(self, "geo_id", normalize_geo(self.geo_id))
        for name in ("pct_white", "pct_black", "pct_hispanic", "pct_asian"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise SchemaError(f"{self.geo_id}: {name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)


def normalize_geo(geo_id: str) -> str:
    """``"pa"`` -> ``"PA"``; ``"PA-011"``/``"PA11"`` -> ``"PA-11"``; at-large ``"AK-AL"`` -> ``"AK-0"``."""
    g = str(geo_id).strip().upper().replace("_", "-")
    state, rest = g[:2], g[2:].lstrip("-")
    if not rest:
        return state
    if rest in ("AL", "00"):
        return f"{state}-0"
    return f"{state}-{int(rest)}"


def member_geo(record: LegislatorRecord) -> str:
    if record.chamber == "house":
        return f"{record.state}-{int(record.district)}"
    return str(record.state)


def load_acs(path) -> list:
    return [DistrictDemographics(r["geo_id"], r["pct_white"], r["pct_black"], r["pct_hispanic"], r["pct_asian"])
            for r in load_table(path, ACS_COLUMNS)]


def join_acs(demo: Sequence[MemberPhotoDemographics], acs: Sequence[DistrictDemographics],
             roster: Sequence[LegislatorRecord]) -> list:
    """One analysis row per member: representatives join on district, senators on state."""
    by_geo = {a.geo_id: a for a in acs}
    by_id = {r.member_id: r for r in roster}
    rows, unmatched = [], []
    for d in demo:
        rec = by_id.get(d.member_id)
        if rec is None:
            raise ReferenceIntegrityError(f"demographics for unknown member {d.member_id}")
        geo = by_geo.get(member_geo(rec)) if rec.state else None
        if geo is None:
            unmatched.append(d.member_id)
            continue
        row = {"member_id": rec.member_id, "chamber": rec.chamber, "party": rec.party, "state": rec.state,
               "district": rec.district, "is_white": rec.is_white, "n_faces": d.n_faces}
        for label in RACE_LABELS:
            row[f"fb_prop_{RACE_KEYS[label]}"] = d.proportions[label]
        for label in RACE_LABELS:
            row[f"acs_pct_{RACE_KEYS[label]}"] = getattr(geo, f"pct_{RACE_KEYS[label]}")
        rows.append(row)
    if unmatched:
        raise JoinError(f"no ACS geography for member(s): {', '.join(unmatched)}", unmatched)
    return rows


# --- regression ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegressionResult:
    names: tuple
    coefficients: np.ndarray
    std_errors: np.ndarray
    r_squared: float
    n_obs: int
    residuals: np.ndarray
    fixed_effect_levels: tuple | None = None
    group_intercepts: dict | None = field(default=None)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.std_errors[self.names.index(name)])


def _design(x_columns, names=None):
    if isinstance(x_columns, Mapping):
        names = list(x_columns)
        X = np.column_stack([np.asarray(x_columns[n], dtype=np.float64) for n in names]) if names else None
    else:
        X = np.asarray(x_columns, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        names = list(names) if names is not None else [f"x{i}" for i in range(X.shape[1])]
    return X, names


def _fit_least_squares(X, y, names, dof_extra=0):
    n, p = X.shape
    if n <= p + dof_extra:
        raise InsufficientDataError(f"{n} observations for {p + dof_extra} parameters")
    _, r_piv, _ = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_piv))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 1e3
    rank = int(np.sum(diag > max(tol, 1e-300)))
    if rank < p:
        # scan left to right so the later of two redundant columns is blamed
        kept, dependent = [], []
        for j in range(p):
            if np.linalg.matrix_rank(X[:, kept + [j]], tol=tol) > len(kept):
                kept.append(j)
            else:
                dependent.append(names[j])
        raise CollinearityError(f"design matrix is rank deficient; dependent column(s): {', '.join(dependent)}",
                                dependent)
    q, r = np.linalg.qr(X)
    beta = scipy.linalg.solve_triangular(r, q.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    sigma2 = ssr / (n - p - dof_extra)
    r_inv = scipy.linalg.solve_triangular(r, np.eye(p))
    cov = sigma2 * (r_inv @ r_inv.T)
    return beta, np.sqrt(np.diag(cov)), resid, ssr


def _r_squared(ssr: float, sst: float, y: np.ndarray) -> float:
    # a constant response leaves only rounding noise in sst; report 0 then
    noise = len(y) * (64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(y))))) ** 2
    if sst <= noise:
        return 0.0
    return min(1.0, max(0.0, 1.0 - ssr / sst))


def ols(y, x_columns, intercept: bool = True, names=None) -> RegressionResult:
    """Least squares via QR.  R^2 is centred with an intercept, uncentred without."""
    y = np.asarray(y, dtype=np.float64)
    X, names = _design(x_columns, names)
    if X is None:
        X = np.empty((len(y), 0))
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["intercept"] + names
    if X.shape[1] == 0:
        raise ValueError("no regressors")
    beta, se, resid, ssr = _fit_least_squares(X, y, names)
    sst = float(np.sum((y - y.mean()) ** 2)) if intercept else float(y @ y)
    r2 = _r_squared(ssr, sst, y)
    return RegressionResult(tuple(names), beta, se, r2, len(y), resid)


def ols_fixed_effects(y, x_columns, groups, names=None) -> RegressionResult:
    """Slopes from group-demeaned data (state fixed effects).

    ``r_squared`` is the within R^2.  ``group_intercepts`` maps each group to
    ``mean(y_g) - mean(x_g) . beta``.
    """
    y = np.asarray(y, dtype=np.float64)
    X, names = _design(x_columns, names)
    groups = np.asarray(groups)
    if len(groups) != len(y) or X.shape[0] != len(y):
        raise ValueError("y, x and groups must have equal length")
    levels, inverse = np.unique(groups, return_inverse=True)
    counts = np.bincount(inverse)
    y_means = np.bincount(inverse, weights=y) / counts
    x_means = np.column_stack([np.bincount(inverse, weights=X[:, j]) / counts for j in range(X.shape[1])])
    yd = y - y_means[inverse]
    Xd = X - x_means[inverse]
    scale = max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)
    if np.all(np.abs(Xd) <= 1e-12 * scale):
        raise IdentificationError("no within-group variation in the regressors; slope not identified")
    beta, se, resid, ssr = _fit_least_squares(Xd, yd, names, dof_extra=len(levels))
    r2 = _r_squared(ssr, float(yd @ yd), y)
    intercepts = {str(level): float(y_means[i] - x_means[i] @ beta) for i, level in enumerate(levels)}
    return RegressionResult(tuple(names), beta, se, r2, len(y), resid,
                            tuple(str(l) for l in levels), intercepts)


REGRESSION_COLUMNS = ["model", "party", "outcome", "term", "estimate", "std_error", "ci_low", "ci_high",
                      "r_squared", "n_obs"]


def regression_rows(result: RegressionResult, model: str, party: str = "", outcome: str = "",
                    level: float = 0.95) -> list:
    z = _z(level)
    return [{"model": model, "party": party, "outcome": outcome, "term": name, "estimate": float(b),
             "std_error": float(s), "ci_low": float(b - z * s), "ci_high": float(b + z * s),
             "r_squared": result.r_squared, "n_obs": result.n_obs}
            for name, b, s in zip(result.names, result.coefficients, result.std_errors)]


def _numeric(rows, column):
    return np.asarray([float(r[column]) for r in rows], dtype=np.float64)


def compare_demographics(joined: Sequence[Mapping], races: Sequence[str] = ("white", "black", "hispanic", "asian"),
                         level: float = 0.95):
    """Regressions relating photo shares to census shares.

    For each race and party: OLS of ``fb_prop_<race>`` on ``acs_pct_<race>``,
    and a state fixed-effects fit of ``acs_pct_<race>`` on ``fb_prop_<race>``
    (also pooled over parties).  Members with no classified faces are left
    out.  Returns ``(rows, skipped)``; a fit that cannot be estimated is
    recorded in ``skipped`` instead of aborting the whole comparison.
    """
    usable = [r for r in joined if str(r.get("fb_prop_white", "")).strip() != "" and int(r["n_faces"]) > 0]
    parties = sorted({str(r["party"]) for r in usable})
    rows, skipped = [], []
    for race in races:
        x_col, y_col = f"acs_pct_{race}", f"fb_prop_{race}"
        for party in parties + ["all"]:
            sub = usable if party == "all" else [r for r in usable if r["party"] == party]
            fits = [("fixed_effects", lambda: ols_fixed_effects(_numeric(sub, x_col), {y_col: _numeric(sub, y_col)},
                                                                [r["state"] for r in sub]), x_col)]
            if party != "all":
                fits.insert(0, ("ols", lambda: ols(_numeric(sub, y_col), {x_col: _numeric(sub, x_col)}), y_col))
            for model, fit, outcome in fits:
                try:
                    result = fit()
                except (InsufficientDataError, CollinearityError, IdentificationError) as exc:
                    skipped.append(f"{model} {party} {race}: {exc}")
                    continue
                rows.extend(regression_rows(result, model, party, outcome, level))
    return rows, skipped


def party_box_groups(joined: Sequence[Mapping], races=("black", "hispanic", "asian")) -> dict:
    """``{"<party>:fb_prop_<race>": values}`` for box-plot summaries."""
    usable = [r for r in joined if int(r["n_faces"]) > 0]
    groups = {}
    for race in races:
        for party in sorted({str(r["party"]) for r in usable}):
            vals = [float(r[f"fb_prop_{race}"]) for r in usable if r["party"] == party]
            if vals:
                groups[f"{party}:fb_prop_{race}"] = vals
    return groups


BOX_COLUMNS = ["group", "n", "minimum", "q1", "median", "q3", "maximum", "whisker_low", "whisker_high",
               "n_outliers"]


def box_rows(groups: Mapping[str, Sequence[float]]) -> list:
    stats_ = boxplot_stats(groups)
    return [{"group": name, "n": len(groups[name]), **{k: getattr(b, k) for k in BOX_COLUMNS[2:-1]},
             "n_outliers": len(b.outliers)} for name, b in stats_.items()]


class OLSRegressor(RegressorMixin, BaseEstimator):
    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = check_regression_inputs(X, y)
        self.result_ = ols(y, X, intercept=self.fit_intercept)
        coefs = self.result_.coefficients
        self.intercept_ = float(coefs[0]) if self.fit_intercept else 0.0
        self.coef_ = coefs[1:] if self.fit_intercept else coefs
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X, _ = check_regression_inputs(X, np.zeros(len(X)))
        return X @ self.coef_ + self.intercept_


class FixedEffectsRegressor(RegressorMixin, BaseEstimator):
    """Within estimator; ``groups`` is passed to ``fit`` and ``predict``."""

    def fit(self, X, y, groups=None):
        if groups is None:
            raise ValueError("FixedEffectsRegressor.fit requires groups")
        X, y = check_regression_inputs(X, y)
        self.result_ = ols_fixed_effects(y, X, groups)
        self.coef_ = self.result_.coefficients
        self.group_intercepts_ = self.result_.group_intercepts
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, groups=None):
        check_is_fitted(self, "result_")
        if groups is None:
            raise ValueError("predict requires groups")
        X, _ = check_regression_inputs(X, np.zeros(len(X)))
        try:
            alpha = np.array([self.group_intercepts_[str(g)] for g in groups])
        except KeyError as exc:
            raise ValueError(f"group {exc.args[0]!r} not seen during fit") from None
        return X @ self.coef_ + alpha


# --- tests and intervals -----------------------------------------------------------------

EXACT_MAX_N = 12


class RankSumResult(NamedTuple):
    statistic: float
    pvalue: float
    method: str


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_rank_sum(a, b, method: str = "auto") -> RankSumResult:
    """Two-sided Wilcoxon rank-sum test; the statistic is the rank sum of ``a``.

    Ties get midranks.  ``method="auto"`` enumerates every split exactly when
    ``len(a) + len(b) <= 12`` and otherwise uses the normal approximation
    with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise InsufficientDataError("both samples must be non-empty")
    na, nb = a.size, b.size
    n = na + nb
    ranks = stats.rankdata(np.concatenate([a, b]))
    w = float(ranks[:na].sum())
    expected = na * (n + 1) / 2.0
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "normal"
    if method == "exact":
        dev = abs(w - expected)
        hits = total = 0
        for combo in itertools.combinations(range(n), na):
            total += 1
            if abs(ranks[list(combo)].sum() - expected) >= dev - 1e-9:
                hits += 1
        return RankSumResult(w, min(1.0, hits / total), "exact")
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = na * nb / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return RankSumResult(w, 1.0, "normal")
    z = max(abs(w - expected) - 0.5, 0.0) / math.sqrt(var)
    return RankSumResult(w, min(1.0, 2.0 * _norm_sf(z)), "normal")


def _z(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def normal_interval(p_hat: float, n: int, level: float = 0.95):
    """``p_hat +/- z * sqrt(p_hat (1 - p_hat) / n)`` clipped to [0, 1]."""
    if n < 1:
        raise InsufficientDataError("n must be at least 1")
    half = _z(level) * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
    return p_hat, max(0.0, p_hat - half), min(1.0, p_hat + half)


def proportion_ci(k, n: int, level: float = 0.95):
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    return normal_interval(k / n, n, level)


def mean_ci(values, level: float = 0.95):
    """Student-t interval ``mean +/- t_{n-1} s / sqrt(n)``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise InsufficientDataError(f"mean_ci needs at least 2 values, got {v.size}")
    m = float(v.mean())
    half = float(stats.t.ppf(0.5 + level / 2.0, v.size - 1)) * float(v.std(ddof=1)) / math.sqrt(v.size)
    return m, m - half, m + half


class BoxStats(NamedTuple):
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: tuple


def boxplot_stats(groups: Mapping[str, Sequence[float]]) -> dict:
    """Five-number summaries with type-7 quartiles and 1.5 IQR whiskers.

    ``minimum``/``maximum`` are the data extremes; the whiskers stop at the
    most extreme points inside the fences and everything beyond is an outlier.
    """
    out = {}
    for name, values in groups.items():
        v = np.sort(np.asarray(values, dtype=np.float64).ravel())
        if v.size == 0:
            raise InsufficientDataError(f"group {name!r} is empty")
        q1, med, q3 = (float(q) for q in np.percentile(v, [25, 50, 75], method="linear"))
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= lo_fence) & (v <= hi_fence)]
        outliers = tuple(float(x) for x in v if x < lo_fence or x > hi_fence)
        out[name] = BoxStats(float(v[0]), q1, med, q3, float(v[-1]),
                             float(inside.min()), float(inside.max()), outliers)
    return out


# --- experiment -------------------------------------------------------------------------

DEFAULT_ARMS = ("control", "white_man", "white_woman", "black_man", "black_woman",
                "hispanic_man", "hispanic_woman")
PROPORTION_OUTCOMES = ("party_guess",)
ORDINAL_OUTCOMES = ("shares_values", "trustworthy", "strong_leader", "knowledgeable")
RESPONSE_COLUMNS = ["respondent_id", "arm", "party_guess", *ORDINAL_OUTCOMES, "respondent_race"]
EXPERIMENT_COLUMNS = ["outcome", "group", "n", "mean", "ci_low", "ci_high", "wilcoxon_p"]


class GroupComparison(NamedTuple):
    outcome: str
    group: str
    n: int
    mean: float
    ci_low: float
    ci_high: float
    wilcoxon_p: float | None


def _is_democrat(value: str) -> bool:
    return str(value).strip().lower() in ("d", "democrat", "democratic", "1")


def experiment_table(responses: Sequence[Mapping], arms: Sequence[str] = DEFAULT_ARMS,
                     control: str = "control", level: float = 0.95,
                     exclude_respondent_race: Sequence[str] = ()) -> list:
    """Per-arm summaries for every outcome column present in ``responses``.

    ``party_guess`` is summarised as the share guessing Democrat with a
    normal-approximation interval; the ordinal outcomes get t-intervals on the
    mean and a rank-sum p-value against the control arm.
    """
    excluded = {r.lower() for r in exclude_respondent_race}
    rows = [r for r in responses if str(r.get("respondent_race", "")).lower() not in excluded]
    for r in rows:
        if r.get("arm") not in arms:
            raise SchemaError(f"unknown arm {r.get('arm')!r} (respondent {r.get('respondent_id')})")
    present = [a for a in arms if any(r["arm"] == a for r in rows)]
    columns = set().union(*(r.keys() for r in rows)) if rows else set()
    table = []
    for outcome in PROPORTION_OUTCOMES + ORDINAL_OUTCOMES:
        if outcome not in columns:
            continue
        values = {a: [r[outcome] for r in rows if r["arm"] == a and str(r.get(outcome, "")).strip() != ""]
                  for a in present}
        for arm in present:
            vals = values[arm]
            if not vals:
                continue
            if outcome in PROPORTION_OUTCOMES:
                k = sum(_is_democrat(v) for v in vals)
                p, lo, hi = proportion_ci(k, len(vals), level)
                table.append(GroupComparison(outcome, arm, len(vals), p, lo, hi, None))
                continue
            nums = np.asarray([float(v) for v in vals])
            if nums.size >= 2:
                m, lo, hi = mean_ci(nums, level)
            else:
                m = lo = hi = float(nums[0])
            pval = None
            if arm != control and values.get(control):
                ctrl = np.asarray([float(v) for v in values[control]])
                pval = wilcoxon_rank_sum(ctrl, nums).pvalue
            table.append(GroupComparison(outcome, arm, int(nums.size), m, lo, hi, pval))
    return table


def experiment_rows(table: Sequence[GroupComparison]) -> list:
    return [dict(g._asdict()) for g in table]
