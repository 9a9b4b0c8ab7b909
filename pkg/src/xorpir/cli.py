"""
Command-line entry point ``pir``.

Exit codes: 0 success, 1 a verification failed, 2 usage error, 3 I/O or
network error. Every random choice flows from ``--seed`` (default: the
``PIR_SEED`` environment variable; failing that a fresh seed is drawn and
printed so the run can be repeated).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import random
import re
import secrets
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import net, verify
from .core import Database, load_database, save_database, save_storage
from .errors import FormatError, ParameterError, PIRError, ProtocolError, RetrievalError
from .params import Scheme, SchemeParams
from .schemes import impl, load_storage
from .sj_graph import build_gamma, format_vertex

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

# demo refuses transcripts longer than this many bits
DEMO_MAX_BITS = 4096


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def emit(args, payload: dict | list, human: str | None = None, rows: list[dict] | None = None) -> None:
    fmt = args.format
    if fmt == "json":
        print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    elif fmt == "csv":
        rows = rows if rows is not None else (payload if isinstance(payload, list) else [payload])
        buf = io.StringIO()
        fields = list(dict.fromkeys(k for row in rows for k in row))
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _flat(v) for k, v in row.items()})
        print(buf.getvalue(), end="")
    else:
        print(human if human is not None else json.dumps(_jsonable(payload), indent=2))


def _flat(v: Any) -> Any:
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(_jsonable(v), sort_keys=True)
    if isinstance(v, Fraction):
        return _jsonable(v)
    return v


def table(rows: list[dict], columns: Sequence[str]) -> str:
    cells = [[str(_jsonable(r.get(c, ""))) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


# ---------------------------------------------------------------- argument helpers


def resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("PIR_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"PIR_SEED must be an integer, got {env!r}") from None
    seed = secrets.randbits(32)
    print(f"# seed {seed}", file=sys.stderr)
    return seed


def params_from_args(args) -> SchemeParams:
    if args.params:
        p = SchemeParams.parse(args.params)
        return p.with_skip_zero(True) if args.skip_zero else p
    if not args.scheme:
        raise UsageError("give --scheme (with --k/--record-bits) or --params")
    if args.k is None or args.record_bits is None:
        raise UsageError("--k and --record-bits are required")
    return SchemeParams(
        scheme=Scheme.parse(args.scheme),
        k=args.k,
        R=args.record_bits,
        n=args.n,
        s=args.s,
        t=args.t,
        merge=args.merge if args.merge is not None else 1,
        skip_zero=args.skip_zero,
    )


def add_param_flags(p: argparse.ArgumentParser, multi: bool = False) -> None:
    kind = str if multi else int
    g = p.add_argument_group("scheme parameters")
    g.add_argument("--scheme", help="CHOR2, CON1 ... CON6")
    g.add_argument("--params", help="compact form, e.g. CON3:n=3,k=2,R=2")
    g.add_argument("--n", type=kind, help="number of servers")
    g.add_argument("--k", type=kind, help="number of records")
    g.add_argument("--record-bits", type=kind, help="record length R in bits")
    g.add_argument("--s", type=kind, help="CON4 block size")
    g.add_argument("--t", type=kind, help="CON4 number of server classes")
    g.add_argument("--merge", type=kind, help="CON4 blocks per server (default 1)")
    g.add_argument("--skip-zero", action="store_true", help="omit replies to all-zero queries (CON1, CON3)")


def add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("human", "json", "csv"), default="human")
    p.add_argument("--json", dest="format", action="store_const", const="json", help="same as --format json")
    p.add_argument("--seed", type=int, help="RNG seed (default: $PIR_SEED)")


def parse_int_list(text: str | int | None, name: str) -> list[int | None]:
    """'2,3,5' or '2-5' or '2,4-6' -> list of ints."""
    if text is None:
        return [None]
    if isinstance(text, int):
        return [text]
    out: list[int | None] = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not m:
            raise UsageError(f"bad value {part!r} for {name}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo:
            raise UsageError(f"empty range {part!r} for {name}")
        out.extend(range(lo, hi + 1))
    return out


def load_db(args, params: SchemeParams, seed: int) -> Database:
    if getattr(args, "db", None):
        db = load_database(args.db)
        if (db.k, db.R) != (params.k, params.R):
            raise UsageError(f"database has k={db.k}, R={db.R} but the parameters say k={params.k}, R={params.R}")
        return db
    return Database.random(params.k, params.R, random.Random(seed))


# ---------------------------------------------------------------- subcommands


def cmd_encode(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    db = load_db(args, params, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if not args.db:
        save_database(db, out / "database.pirdb")
        files.append(str(out / "database.pirdb"))
    for st in impl(params).encode(params, db):
        path = out / f"server{st.server_id}.pirst"
        save_storage(st, path)
        files.append(str(path))
    payload = {"params": params.to_dict(), "spec": params.to_spec(), "files": files}
    emit(args, payload, "\n".join([f"params {params.to_spec()}"] + files))
    return EXIT_OK


def cmd_serve(args) -> int:
    params = params_from_args(args)
    storage = load_storage(args.storage, params)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    net.serve(storage, params, args.listen)
    return EXIT_OK


def cmd_query(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    endpoints = [e.strip() for e in args.servers.split(",") if e.strip()]
    if len(endpoints) != params.n:
        raise UsageError(f"{params.scheme.name} needs {params.n} servers, got {len(endpoints)}")
    out, tr = net.fetch_record(endpoints, params, args.record, seed, timeout=args.timeout)
    payload = {"record": args.record, "seed": seed, "output": str(out), "transcript": tr.to_dict()}
    emit(args, payload, _run_human(params, args.record, str(out), tr))
    return EXIT_OK


def _run_human(params, ell, output, tr) -> str:
    return "\n".join([
        f"params    {params.to_spec()}",
        f"record    {ell}",
        f"output    {output}",
        f"upload    {list(tr.upload_bits_per_server)} total {tr.total_upload}",
        f"download  {list(tr.download_bits_per_server)} total {tr.total_download}",
    ])


def cmd_run(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    db = load_db(args, params, seed)
    out, tr = verify.run_protocol(params, db, args.record, seed)
    ok = out == db.record(args.record)
    payload = {
        "params": params.to_dict(), "record": args.record, "seed": seed,
        "output": str(out), "correct": ok, "transcript": tr.to_dict(),
    }
    emit(args, payload, _run_human(params, args.record, out, tr) + f"\ncorrect   {ok}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_correctness(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    limits = verify.Limits(max_runs=args.max_runs, max_databases=args.max_databases, seed=seed)
    v = verify.check_correctness_exhaustive(params, limits)
    d = v.to_dict()
    human = (
        f"{v.scheme} {params.to_spec()}: {v.verdict.upper()} ({v.mode}) "
        f"runs={v.runs} failures={v.failures} databases={v.databases_checked}/{v.databases_total} "
        f"randomness={v.randomness_checked}/{v.randomness_total}"
    )
    if v.notes:
        human += "\n" + "\n".join(f"note: {x}" for x in v.notes)
    row = {"scheme": v.scheme, "params": params.to_spec(), "mode": v.mode, "verdict": v.verdict, **{
        key: d["detail"][key] for key in ("runs", "failures", "databases_checked", "randomness_checked")}}
    emit(args, d, human, [row])
    return EXIT_OK if v.passed else EXIT_FAIL


def cmd_verify_privacy(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    servers = [args.server] if args.server else range(1, params.n + 1)
    reports = []
    for r in servers:
        if args.trials:
            reports.append(verify.statistical_privacy_test(params, r, args.trials, args.significance, seed=seed))
        else:
            try:
                reports.append(verify.check_privacy_exact(params, r, limit=args.limit))
            except verify.EnumerationTooLarge as e:
                raise UsageError(f"{e} (pass --trials N)") from None
    human = "\n".join(f"server {p.server}: {p.verdict.upper()} ({p.mode})" for p in reports)
    rows = [{"scheme": p.scheme, "params": params.to_spec(), "server": p.server, "mode": p.mode,
             "verdict": p.verdict} for p in reports]
    emit(args, [p.to_dict() for p in reports], human, rows)
    if any(p.verdict == "fail" for p in reports):
        return EXIT_FAIL
    return EXIT_OK if all(p.passed for p in reports) else EXIT_FAIL


def cmd_verify_bounds(args) -> int:
    if args.n is None or args.k is None or args.record_bits is None:
        raise UsageError("bounds needs --n, --k and --record-bits")
    rep = verify.bounds(args.n, args.k, args.record_bits)
    d = rep.to_dict()
    human = "\n".join(f"{key:28} {val}" for key, val in d.items())
    status = EXIT_OK
    if args.scheme or args.params:
        params = params_from_args(args)
        seed = resolve_seed(args)
        m = verify.measure_download(params, seed=seed)
        d["measured_worst_download"] = m.worst
        d["respects_lower_bound"] = m.worst >= rep.lower_bound_bits
        human += f"\n{'measured_worst_download':28} {m.worst}\n{'respects_lower_bound':28} {d['respects_lower_bound']}"
        status = EXIT_OK if d["respects_lower_bound"] else EXIT_FAIL
    emit(args, d, human)
    return status


def cmd_verify_alpha(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    alpha = verify.empirical_alpha(params, args.trials, seed=seed)
    try:
        bound = verify.alpha_upper_bound(params.k, params.R)
    except ParameterError as e:
        bound, note = None, str(e)
    else:
        note = None
    ok = bound is None or alpha <= bound
    d = {"params": params.to_dict(), "alpha": alpha, "alpha_upper_bound": bound,
         "mode": "exhaustive" if args.trials is None else "sampled", "within_bound": ok, "note": note}
    human = f"alpha {alpha} ({float(alpha):.4f}), bound {bound if bound is not None else 'n/a'}: {'PASS' if ok else 'FAIL'}"
    if note:
        human += f"\nnote: {note}"
    emit(args, d, human)
    return EXIT_OK if ok else EXIT_FAIL


def bench_points(args) -> list[SchemeParams]:
    if args.params:
        return [params_from_args(args)]
    if not args.scheme or args.k is None or args.record_bits is None:
        raise UsageError("bench needs --scheme, --k and --record-bits (or --params)")
    lists = [parse_int_list(getattr(args, f), f) for f in ("n", "k", "record_bits", "s", "t", "merge")]
    points = []
    for n, k, R, s, t, merge in itertools.product(*lists):
        try:
            points.append(SchemeParams(Scheme.parse(args.scheme), k, R, n, s, t, merge or 1, args.skip_zero))
        except ParameterError as e:
            raise UsageError(f"invalid point n={n} k={k} R={R}: {e}") from None
    return points


def bench_row(params: SchemeParams, trials: int, seed: int) -> dict:
    scheme = impl(params)
    prof = scheme.profile(params)
    rng = random.Random(seed)
    db = Database.random(params.k, params.R, rng)
    storages = scheme.encode(params, db)
    m = verify.measure_download(params, db=db, limit=trials, seed=seed)
    qs = scheme.build_queries(params, 1, scheme.sample_randomness(params, 1, rng))
    upload = sum(qs.upload_bits)
    storage_total = sum(st.bits for st in storages)

    start = time.perf_counter()
    answers = 0
    for i in range(trials):
        r = i % params.n + 1
        scheme.answer(params, storages[r - 1], r, qs.per_server[r - 1])
        answers += 1
    elapsed = time.perf_counter() - start

    # skip-zero runs are judged on the mean, which only equals the expectation when enumerated
    if params.skip_zero:
        download_ok = m.worst <= prof.worst_download_bits and (not m.exhaustive or m.mean == prof.expected_download_bits)
    else:
        download_ok = m.worst == prof.worst_download_bits
    ok = download_ok and upload == prof.upload_bits and storage_total == prof.total_storage_bits
    return {
        "scheme": params.scheme.name,
        "n": params.n,
        "k": params.k,
        "R": params.R,
        "upload_theory": prof.upload_bits,
        "upload_measured": upload,
        "download_theory": prof.worst_download_bits,
        "download_measured": m.worst,
        "download_mean": m.mean,
        "expected_theory": prof.expected_download_bits,
        "storage_theory": prof.total_storage_bits,
        "storage_measured": storage_total,
        "lower_bound": verify.lower_bound_download(params.n, params.k, params.R),
        "runs": m.runs,
        "answers_per_s": round(answers / elapsed) if elapsed > 0 else None,
        "status": "ok" if ok else "FAIL",
    }


def cmd_bench(args) -> int:
    seed = resolve_seed(args)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    rows = [bench_row(p, args.trials, seed) for p in bench_points(args)]
    cols = ["scheme", "n", "k", "R", "upload_theory", "upload_measured", "download_theory",
            "download_measured", "download_mean", "storage_measured", "lower_bound", "answers_per_s", "status"]
    emit(args, rows, table(rows, cols), rows)
    return EXIT_FAIL if any(r["status"] != "ok" for r in rows) else EXIT_OK


def cmd_graph(args) -> int:
    if args.n is None or args.k is None:
        raise UsageError("graph needs --n and --k")
    g = build_gamma(args.record, args.n, args.k)
    if args.format == "dot":
        print(g.to_dot(), end="")
        return EXIT_OK
    d = g.to_dict()
    lines = [
        f"Gamma for record {args.record}, n={args.n}, k={args.k}: {len(g.vertices)} vertices, "
        f"{len(g.part1)} in part 1, {len(g.components)} components, {len(g.isolated)} isolated",
    ]
    for comp in g.components:
        lines.append("  " + " ".join(format_vertex(x) for x in comp))
    emit(args, d, "\n".join(lines))
    return EXIT_OK


def demo_trace(params: SchemeParams, seed: int) -> list[str]:
    scheme = impl(params)
    rng = random.Random(seed)
    db = Database.random(params.k, params.R, rng)
    ell = rng.randint(1, params.k)
    randomness = scheme.sample_randomness(params, ell, rng)
    run = verify.run_protocol_full(params, db, ell, randomness=randomness)
    state = run.queries.user_state

    lines = [f"params {params.to_spec()}, seed {seed}"]
    lines += [f"X_{i} = {x}" for i, x in enumerate(db.records, start=1)]
    lines.append(f"wanted record ell = {ell}")
    lines.append(f"randomness: {_show_randomness(randomness)}")
    for r in range(1, params.n + 1):
        q = state.queries[r - 1]
        c = run.responses[r - 1]
        lines.append(
            f"server {r}: query {_show_query(q)} ({run.queries.per_server[r - 1].length} bits) "
            f"-> reply {c if c.length else '(omitted)'}"
        )
    lines += _recovery_lines(params, state)
    lines.append(f"recovered X_{ell} = {run.output} ({'correct' if run.output == db.record(ell) else 'WRONG'})")
    lines.append(f"upload {run.transcript.total_upload} bits, download {run.transcript.total_download} bits")
    return lines


def _show_randomness(x) -> str:
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[1], tuple) and isinstance(x[0], tuple):
        f, psi = x
        fs = ", ".join(f"f_{i}={list(fi)}" for i, fi in enumerate(f, start=1) if fi is not None)
        return f"{fs}; psi={list(psi)}"
    return _show_query(x)


def _show_query(q) -> str:
    if isinstance(q, tuple):
        return "(" + ",".join(str(v) for v in q) + ")"
    return str(q)


def _recovery_lines(params: SchemeParams, state) -> list[str]:
    sc = params.scheme
    scheme = impl(params)
    if sc is Scheme.CHOR2:
        return ["recover: X_ell = c_1 XOR c_2"]
    if sc is Scheme.CON1:
        last = params.R + 1
        return [f"recover: bit {r} = c_{r} XOR c_{last}" for r in range(1, params.R + 1)]
    if sc in (Scheme.CON2, Scheme.CON3, Scheme.CON4):
        return [f"recover: block {j} = c_{a} XOR c_{b}" for j, a, b in scheme.recovery_pairs(params, state)]
    if sc is Scheme.CON6:
        n = params.n
        col = [q[state.ell - 1] for q in state.queries]
        lines = []
        for x in itertools.product(range(n), repeat=params.k):
            shifted = [(b + x[state.ell - 1]) % n for b in col]
            zero = shifted.index(0) + 1
            for j in range(1, n):
                other = shifted.index(j) + 1
                lines.append(f"recover: block ({j},{''.join(map(str, x))}) = c_({zero},x) XOR c_({other},x)")
        return lines
    lines = []
    for j, (vertex, center) in enumerate(scheme.recovery_plan(params, state), start=1):
        how = f"s{format_vertex(vertex)}" if center is None else f"s{format_vertex(vertex)} XOR s{format_vertex(center)}"
        lines.append(f"recover: block {j} = psi^-1({j}) = {format_vertex(vertex)} -> {how}")
    return lines


def cmd_demo(args) -> int:
    params = params_from_args(args)
    seed = resolve_seed(args)
    prof = impl(params).profile(params)
    size = prof.upload_bits + prof.worst_download_bits + params.k * params.R
    if size > DEMO_MAX_BITS or params.n > 16:
        raise UsageError(f"parameters too large for a readable trace ({float(size):.0f} bits > {DEMO_MAX_BITS})")
    lines = demo_trace(params, seed)
    emit(args, {"trace": lines}, "\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pir", description="Multi-server XOR private information retrieval")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help, multi=False):
        p = sub.add_parser(name, help=help)
        add_param_flags(p, multi)
        add_output_flags(p)
        p.set_defaults(func=fn)
        return p

    p = command("encode", cmd_encode, "split a database into per-server storage files")
    p.add_argument("--db", help="PIRDB1 database file (default: random database from the seed)")
    p.add_argument("--out", required=True, help="output directory")

    p = command("serve", cmd_serve, "run one server daemon")
    p.add_argument("--storage", required=True, help="PIRST1 storage file")
    p.add_argument("--listen", default="127.0.0.1:7000", help="HOST:PORT")

    p = command("query", cmd_query, "retrieve a record from live daemons")
    p.add_argument("--servers", required=True, help="comma-separated HOST:PORT list, server 1 first")
    p.add_argument("--record", type=int, required=True)
    p.add_argument("--timeout", type=float, default=10.0)

    p = command("run", cmd_run, "run one retrieval locally")
    p.add_argument("--db", help="PIRDB1 database file (default: random database from the seed)")
    p.add_argument("--record", type=int, default=1)

    vp = sub.add_parser("verify", help="correctness, privacy and bound checks")
    vsub = vp.add_subparsers(dest="check", required=True)

    def vcommand(name, fn, help):
        p = vsub.add_parser(name, help=help)
        add_param_flags(p)
        add_output_flags(p)
        p.set_defaults(func=fn)
        return p

    p = vcommand("correctness", cmd_verify_correctness, "all databases x records x randomness")
    p.add_argument("--max-runs", type=int, default=verify.DEFAULT_MAX_RUNS)
    p.add_argument("--max-databases", type=int)
    p = vcommand("privacy", cmd_verify_privacy, "exact or chi-square privacy check")
    p.add_argument("--server", type=int, help="one server (default: all)")
    p.add_argument("--trials", type=int, help="statistical test with this many samples per record")
    p.add_argument("--significance", type=float, default=0.01)
    p.add_argument("--limit", type=int, default=verify.DEFAULT_ENUMERATION_LIMIT)
    vcommand("bounds", cmd_verify_bounds, "lower bounds; with --scheme also the measured download")
    p = vcommand("alpha", cmd_verify_alpha, "fraction of CON1 runs that download only R bits")
    p.add_argument("--trials", type=int, help="sample instead of enumerating")

    p = command("bench", cmd_bench, "theoretical vs measured complexity", multi=True)
    p.add_argument("--trials", type=int, default=256, help="runs per point and answers timed")

    p = sub.add_parser("graph", help="the star graph used by CON5")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--record", type=int, default=1)
    p.add_argument("--format", choices=("human", "json", "dot"), default="human")
    p.add_argument("--json", dest="format", action="store_const", const="json")
    p.set_defaults(func=cmd_graph)

    p = command("demo", cmd_demo, "annotated trace of one retrieval")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG)
    try:
        return args.func(args)
    except (UsageError, ParameterError) as e:
        print(f"pir: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RetrievalError as e:
        print(f"pir: retrieval failed at server {e.server}: {e.reason}", file=sys.stderr)
        return EXIT_IO
    except (FormatError, ProtocolError, OSError) as e:
        print(f"pir: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_IO
    except PIRError as e:
        print(f"pir: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
