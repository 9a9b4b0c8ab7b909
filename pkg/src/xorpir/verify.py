"""
Correctness oracles, privacy checks, measured complexity and the lower bounds.

Probabilities and bounds are exact :class:`fractions.Fraction` values; floats
only appear as chi-square p-values.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

from scipy import stats

from .core import BitString, Database, ServerStorage, TranscriptReport, enumerate_databases
from .errors import HypothesisNotMet, ParameterError
from .params import Scheme, SchemeParams
from .schemes import QuerySet, impl
from .schemes.base import UserState

log = logging.getLogger(__name__)

DEFAULT_MAX_RUNS = 2**20
DEFAULT_ENUMERATION_LIMIT = 10**6

QueryBuilder = Callable[[SchemeParams, int, Any], QuerySet]


class EnumerationTooLarge(ParameterError):
    """The randomness space is too large to enumerate; use the statistical test instead."""


# ---------------------------------------------------------------- protocol runs


@dataclass(frozen=True)
class ProtocolRun:
    output: BitString
    transcript: TranscriptReport
    queries: QuerySet
    responses: tuple[BitString, ...]


def execute(
    params: SchemeParams,
    storages: Sequence[ServerStorage],
    queries: QuerySet,
) -> ProtocolRun:
    scheme = impl(params)
    responses = tuple(
        scheme.answer(params, storages[r - 1], r, queries.per_server[r - 1]) for r in range(1, params.n + 1)
    )
    output = scheme.reconstruct(params, queries.user_state, responses)
    transcript = TranscriptReport(queries.upload_bits, tuple(c.length for c in responses))
    return ProtocolRun(output, transcript, queries, responses)


def run_protocol(
    params: SchemeParams,
    db: Database,
    ell: int,
    seed: int | None = None,
    *,
    storages: Sequence[ServerStorage] | None = None,
    randomness: Any = None,
) -> tuple[BitString, TranscriptReport]:
    """Encode, query, answer and reconstruct locally.

    The query randomness is drawn from ``random.Random(seed)`` unless given
    explicitly. Returns the recovered record and the exact bit transcript.
    """
    run = run_protocol_full(params, db, ell, seed, storages=storages, randomness=randomness)
    return run.output, run.transcript


def run_protocol_full(params, db, ell, seed=None, *, storages=None, randomness=None) -> ProtocolRun:
    scheme = impl(params)
    params.check_record(ell)
    if storages is None:
        storages = scheme.encode(params, db)
    if randomness is None:
        randomness = scheme.sample_randomness(params, ell, random.Random(seed))
    return execute(params, storages, scheme.build_queries(params, ell, randomness))


# ---------------------------------------------------------------- correctness


@dataclass
class Limits:
    """Enumeration budget. ``max_databases`` caps databases even when the run budget allows all."""

    max_runs: int = DEFAULT_MAX_RUNS
    max_databases: int | None = None
    seed: int = 0


@dataclass
class CorrectnessVerdict:
    scheme: str
    params: dict
    mode: str  # "exhaustive" or "sampled"
    passed: bool
    runs: int
    failures: int
    databases_checked: int
    databases_total: int
    randomness_checked: int
    randomness_total: int
    notes: list[str] = field(default_factory=list)
    first_failure: dict | None = None

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "params": self.params,
            "mode": self.mode,
            "verdict": self.verdict,
            "detail": {
                "runs": self.runs,
                "failures": self.failures,
                "databases_checked": self.databases_checked,
                "databases_total": self.databases_total,
                "randomness_checked": self.randomness_checked,
                "randomness_total": self.randomness_total,
                "notes": self.notes,
                "first_failure": self.first_failure,
            },
        }


def _sample_indices(total: int, count: int, rng: random.Random) -> list[int]:
    return sorted(rng.sample(range(total), count))


def check_correctness_exhaustive(params: SchemeParams, limits: Limits | None = None) -> CorrectnessVerdict:
    """Check reconstruction over all databases, all records and all randomness.

    When the budget is exceeded the check downgrades to seeded sampling, first
    of databases and then of randomness, and says so in ``mode`` and ``notes``.
    """
    limits = limits or Limits()
    scheme = impl(params)
    rng = random.Random(limits.seed)
    k, R = params.k, params.R
    notes: list[str] = []

    db_total = 2 ** (k * R)
    rand_sizes = {ell: scheme.randomness_space_size(params, ell) for ell in range(1, k + 1)}
    rand_total = sum(rand_sizes.values())

    rand_budget = rand_total
    if rand_total > limits.max_runs:
        rand_budget = max(1, limits.max_runs // k) * k
        notes.append(f"randomness sampled: {rand_budget} of {rand_total} (record, randomness) pairs")
    db_budget = min(db_total, max(1, limits.max_runs // rand_budget))
    if limits.max_databases is not None:
        db_budget = min(db_budget, limits.max_databases)
    if db_budget < db_total:
        notes.append(f"databases sampled: {db_budget} of {db_total}")

    # query sets, built once per (ell, randomness)
    query_sets: list[QuerySet] = []
    for ell in range(1, k + 1):
        if rand_budget == rand_total:
            space: Iterable = scheme.randomness_space(params, ell)
        else:
            space = (scheme.sample_randomness(params, ell, rng) for _ in range(rand_budget // k))
        query_sets.extend(scheme.build_queries(params, ell, x) for x in space)

    if db_budget == db_total:
        dbs: Iterable[Database] = enumerate_databases(k, R)
    else:
        dbs = (Database.from_int(v, k, R) for v in _sample_indices(db_total, db_budget, rng))

    runs = failures = 0
    first_failure = None
    for db in dbs:
        storages = scheme.encode(params, db)
        for qs in query_sets:
            out = execute(params, storages, qs).output
            runs += 1
            if out != db.record(qs.user_state.ell):
                failures += 1
                if first_failure is None:
                    first_failure = {
                        "database": [str(x) for x in db.records],
                        "ell": qs.user_state.ell,
                        "randomness": repr(qs.user_state.randomness),
                        "output": str(out),
                    }
    mode = "sampled" if notes else "exhaustive"
    if notes:
        log.warning("correctness check for %s downgraded: %s", params.to_spec(), "; ".join(notes))
    return CorrectnessVerdict(
        scheme=params.scheme.name,
        params=params.to_dict(),
        mode=mode,
        passed=failures == 0 and runs > 0,
        runs=runs,
        failures=failures,
        databases_checked=db_budget,
        databases_total=db_total,
        randomness_checked=len(query_sets),
        randomness_total=rand_total,
        notes=notes,
        first_failure=first_failure,
    )


# ---------------------------------------------------------------- privacy


@dataclass
class PrivacyReport:
    scheme: str
    params: dict
    server: int
    mode: str  # "exact" or "statistical"
    verdict: str  # "pass", "fail" or "inconclusive"
    detail: dict

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "params": self.params,
            "server": self.server,
            "mode": self.mode,
            "verdict": self.verdict,
            "detail": self.detail,
        }


def default_builder(params: SchemeParams, ell: int, randomness: Any) -> QuerySet:
    return impl(params).build_queries(params, ell, randomness)


def leaky_con3_builder(params: SchemeParams, ell: int, randomness: Any) -> QuerySet:
    """Negative control: a CON3 variant that sends b_ell = ell mod n to every server."""
    if params.scheme is not Scheme.CON3:
        raise ParameterError("the leaky builder is a CON3 variant")
    scheme = impl(params)
    n = params.n
    qs = []
    for _ in range(n):
        b = list(randomness)
        b[ell - 1] = ell % n
        qs.append(tuple(b))
    bits = tuple(scheme.serialize_query(params, r, q) for r, q in enumerate(qs, start=1))
    return QuerySet(bits, UserState(ell, randomness, tuple(qs)))


def randomness_space_size(params: SchemeParams) -> int:
    scheme = impl(params)
    return max(scheme.randomness_space_size(params, ell) for ell in range(1, params.k + 1))


def exact_privacy_distribution(
    params: SchemeParams,
    r: int,
    ell: int,
    *,
    limit: int = DEFAULT_ENUMERATION_LIMIT,
    builder: QueryBuilder = default_builder,
) -> dict[BitString, Fraction]:
    """Exact distribution of server ``r``'s serialized query when record ``ell`` is sought."""
    params.check_server(r)
    params.check_record(ell)
    scheme = impl(params)
    size = scheme.randomness_space_size(params, ell)
    if size > limit:
        raise EnumerationTooLarge(
            f"randomness space of {size} outcomes exceeds the limit {limit}; use statistical_privacy_test"
        )
    counts: Counter[BitString] = Counter()
    for x in scheme.randomness_space(params, ell):
        counts[builder(params, ell, x).per_server[r - 1]] += 1
    return {q: Fraction(c, size) for q, c in counts.items()}


def check_privacy_exact(
    params: SchemeParams,
    r: int,
    *,
    limit: int = DEFAULT_ENUMERATION_LIMIT,
    builder: QueryBuilder = default_builder,
) -> PrivacyReport:
    """Pass iff server ``r`` sees literally the same distribution for every record."""
    dists = {ell: exact_privacy_distribution(params, r, ell, limit=limit, builder=builder) for ell in range(1, params.k + 1)}
    reference = dists[1]
    differing = [ell for ell, d in dists.items() if d != reference]
    masses = sorted({m for d in dists.values() for m in d.values()})
    return PrivacyReport(
        scheme=params.scheme.name,
        params=params.to_dict(),
        server=r,
        mode="exact",
        verdict="fail" if differing else "pass",
        detail={
            "support_sizes": {ell: len(d) for ell, d in dists.items()},
            "distinct_masses": [str(m) for m in masses[:8]],
            "differing_records": differing,
        },
    )


def _coordinates(q) -> tuple:
    return tuple(q)


def statistical_privacy_test(
    params: SchemeParams,
    r: int,
    trials: int,
    significance: float = 0.01,
    *,
    seed: int = 0,
    builder: QueryBuilder = default_builder,
) -> PrivacyReport:
    """Chi-square test of each record's empirical query distribution against the pooled one.

    Uses the whole query as the category when every record got at least 100
    samples per observed value; otherwise falls back to per-coordinate
    marginals (Bonferroni-combined) and reports the coarsening.
    """
    params.check_server(r)
    scheme = impl(params)
    rng = random.Random(seed)
    samples: dict[int, list[tuple]] = {}
    for ell in range(1, params.k + 1):
        rows = []
        for _ in range(trials):
            qs = builder(params, ell, scheme.sample_randomness(params, ell, rng))
            rows.append(_coordinates(qs.user_state.queries[r - 1]))
        samples[ell] = rows

    base = {"trials_per_record": trials, "significance": significance, "seed": seed}
    support = {q for rows in samples.values() for q in rows}
    if trials >= 100 * len(support):
        pvalues = {ell: _chi2_vs_pooled(samples, ell, lambda q: q) for ell in samples}
        coarsening = "full query"
        categories = len(support)
    else:
        width = len(next(iter(support)))
        per_coord = [{q[c] for rows in samples.values() for q in rows} for c in range(width)]
        categories = max(len(s) for s in per_coord)
        if trials < 100 * categories:
            return PrivacyReport(
                params.scheme.name, params.to_dict(), r, "statistical", "inconclusive",
                {**base, "reason": f"undersampled: {trials} trials for {categories} values per coordinate"},
            )
        pvalues = {}
        for ell in samples:
            ps = [_chi2_vs_pooled(samples, ell, lambda q, c=c: q[c]) for c in range(width)]
            pvalues[ell] = min(1.0, min(ps) * width)
        coarsening = f"per-coordinate marginals ({width} coordinates, Bonferroni)"
    verdict = "pass" if all(p >= significance for p in pvalues.values()) else "fail"
    return PrivacyReport(
        params.scheme.name, params.to_dict(), r, "statistical", verdict,
        {**base, "coarsening": coarsening, "categories": categories, "p_values": pvalues},
    )


def _chi2_vs_pooled(samples: dict[int, list], ell: int, feature: Callable) -> float:
    pooled = Counter(feature(q) for rows in samples.values() for q in rows)
    total = sum(pooled.values())
    observed = Counter(feature(q) for q in samples[ell])
    n = len(samples[ell])
    keys = sorted(pooled)
    if len(keys) < 2:
        return 1.0
    f_obs = [observed.get(key, 0) for key in keys]
    f_exp = [pooled[key] * n / total for key in keys]
    return float(stats.chisquare(f_obs, f_exp).pvalue)


# ---------------------------------------------------------------- bounds


def lower_bound_download(n: int, k: int, R: int) -> int:
    """Largest proven lower bound on download complexity for (n, k, R).

    R + 1 whenever k >= 2; ceil(n R / (n - 1)) additionally when n >= 2 and
    k >= ceil(R / (n - 1)) + 1; R for a single record.
    """
    if n < 1 or k < 1 or R < 1:
        raise ParameterError("n, k and R must be positive")
    if k == 1:
        return R
    bound = R + 1
    if n >= 2 and k >= -(-R // (n - 1)) + 1:
        bound = max(bound, -(-n * R // (n - 1)))
    return bound


def alpha_upper_bound(k: int, R: int) -> Fraction:
    """Upper bound (R + 1)/(kR + 1) on the chance an R+1-download scheme moves only R bits."""
    if k < 3:
        raise HypothesisNotMet(f"the bound needs k >= 3 records, got k = {k}")
    return Fraction(R + 1, k * R + 1)


def optimal_download(n: int, k: int, R: int) -> Fraction:
    """(1 - 1/n^k) (n/(n-1)) R."""
    return (1 - Fraction(1, n**k)) * Fraction(n * R, n - 1)


@dataclass(frozen=True)
class BoundsReport:
    n: int
    k: int
    R: int
    lower_bound_bits: int
    optimal_rate_download_bits: Fraction
    alpha_upper: Fraction | None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "R": self.R,
            "lower_bound_bits": self.lower_bound_bits,
            "optimal_rate_download_bits": str(self.optimal_rate_download_bits),
            "alpha_upper": None if self.alpha_upper is None else str(self.alpha_upper),
        }


def bounds(n: int, k: int, R: int) -> BoundsReport:
    alpha = alpha_upper_bound(k, R) if k >= 3 else None
    opt = optimal_download(n, k, R) if n >= 2 else Fraction(k * R)
    return BoundsReport(n, k, R, lower_bound_download(n, k, R), opt, alpha)


# ---------------------------------------------------------------- measurement


def _enumerated_runs(params: SchemeParams, db: Database, limit: int, seed: int):
    """Yield a ProtocolRun for every (ell, randomness), or a seeded sample if the space exceeds ``limit``."""
    scheme = impl(params)
    storages = scheme.encode(params, db)
    total = sum(scheme.randomness_space_size(params, ell) for ell in range(1, params.k + 1))
    rng = random.Random(seed)
    for ell in range(1, params.k + 1):
        if total <= limit:
            space: Iterable = scheme.randomness_space(params, ell)
        else:
            space = (scheme.sample_randomness(params, ell, rng) for _ in range(max(1, limit // params.k)))
        for x in space:
            yield execute(params, storages, scheme.build_queries(params, ell, x))


@dataclass(frozen=True)
class DownloadMeasurement:
    worst: int
    mean: Fraction
    runs: int
    exhaustive: bool


def measure_download(
    params: SchemeParams, *, db: Database | None = None, limit: int = 2**16, seed: int = 0
) -> DownloadMeasurement:
    """Worst and mean total download over records and randomness, from real transcripts."""
    scheme = impl(params)
    if db is None:
        db = Database.random(params.k, params.R, random.Random(seed))
    total = sum(scheme.randomness_space_size(params, ell) for ell in range(1, params.k + 1))
    worst, acc, runs = 0, 0, 0
    for run in _enumerated_runs(params, db, limit, seed):
        d = run.transcript.total_download
        worst = max(worst, d)
        acc += d
        runs += 1
    # every record has an equally sized randomness space, so the plain mean is the uniform-ell mean
    return DownloadMeasurement(worst, Fraction(acc, runs), runs, total <= limit)


def empirical_alpha(
    params: SchemeParams, trials: int | None = None, *, seed: int = 0
) -> Fraction:
    """Fraction of runs (uniform record, uniform randomness) that download exactly R bits.

    Exhaustive when ``trials`` is None. Runs CON1 in skip-zero mode.
    """
    if params.scheme is not Scheme.CON1:
        raise ParameterError("empirical alpha is defined for CON1")
    params = params.with_skip_zero(True)
    scheme = impl(params)
    rng = random.Random(seed)
    db = Database.random(params.k, params.R, rng)
    storages = scheme.encode(params, db)
    hits = runs = 0
    if trials is None:
        cases = ((ell, x) for ell in range(1, params.k + 1) for x in scheme.randomness_space(params, ell))
    else:
        cases = (
            (ell, scheme.sample_randomness(params, ell, rng))
            for ell in (rng.randint(1, params.k) for _ in range(trials))
        )
    for ell, x in cases:
        run = execute(params, storages, scheme.build_queries(params, ell, x))
        if run.output != db.record(ell):
            raise AssertionError("reconstruction failed while measuring alpha")
        runs += 1
        hits += run.transcript.total_download == params.R
    return Fraction(hits, runs)


def response_lengths_by_query(params: SchemeParams, queries: Sequence[QuerySet], dbs: Iterable[Database]):
    """Map (server, serialized query) -> set of response lengths seen across ``dbs``."""
    scheme = impl(params)
    seen: dict[tuple[int, BitString], set[int]] = {}
    for db in dbs:
        storages = scheme.encode(params, db)
        for qs in queries:
            for r in range(1, params.n + 1):
                q = qs.per_server[r - 1]
                seen.setdefault((r, q), set()).add(scheme.answer(params, storages[r - 1], r, q).length)
    return seen


def all_query_sets(params: SchemeParams) -> list[QuerySet]:
    scheme = impl(params)
    return [
        scheme.build_queries(params, ell, x)
        for ell in range(1, params.k + 1)
        for x in scheme.randomness_space(params, ell)
    ]
