"""Command-line front-end: corpus generation, single runs, grid sweeps,
latency benchmarks, and trace/corpus analysis.

Exit codes: 0 success, 1 configuration error, 2 invariant violation,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

from . import io as sio
from .bench import latency_benchmark, scaling_benchmark
from .catalog import (CatalogConfig, Workload, build_manifests, generate_catalog,
                      generate_participants, generate_users)
from .cluster import GIB, ClusterConfig, run_simulation
from .errors import ConfigError, InvariantViolation, WorkloadError
from .metrics import (expected_overlap_study, overlap_stats, pareto_fit,
                      summarize)
from .policies import POLICY_NAMES, CacheConfig
from .reorder import displacement_histogram

ENV_OUT_DIR = "SVCACHE_OUT"

DEFAULT_CONFIG = {
    "seed": 42,
    "catalog": {"n_videos": 5_000_000, "alpha": 1.62},
    "participants": {"n_participants": 100, "days": 110},
    "users": {"n_users": 10_000, "videos_per_user": 150, "window_days": 4,
              "batch_size": 100, "batch_shift_days": 1, "beta": 1.0},
    "manifest_len": 30,
    "cluster": {"n_servers": 10, "per_server_capacity_gb": 10.0,
                "initial_clients": 10, "max_clients": 500,
                "client_add_interval": 0.01, "manifest_refill_threshold": 10,
                "duration_scale": 1.0},
}

CORPUS_FILES = ("catalog.csv", "participants.jsonl", "users.jsonl", "manifests.jsonl")

# Policies that evict; topk is static and compared separately.
DYNAMIC_POLICIES = ("llf", "fif", "lru", "lfu", "fifo", "gdsf", "lfuda",
                    "random", "lecar")


def _merge_config(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge_config(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        user_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
    if not isinstance(user_cfg, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    return _merge_config(DEFAULT_CONFIG, user_cfg)


def _default_out_dir() -> str:
    return os.environ.get(ENV_OUT_DIR, "svcache-out")


# ---------------------------------------------------------------- generate --
def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    seed = config["seed"]
    out_dir = sio.ensure_dir(args.out)

    cat_cfg = CatalogConfig(n_videos=config["catalog"]["n_videos"],
                            alpha=config["catalog"]["alpha"], seed=seed)
    catalog = generate_catalog(cat_cfg)
    participants = generate_participants(
        catalog, config["participants"]["n_participants"],
        config["participants"]["days"], seed=seed)
    ucfg = config["users"]
    users = generate_users(participants, ucfg["n_users"], ucfg["videos_per_user"],
                           ucfg["window_days"], ucfg["batch_size"],
                           ucfg["batch_shift_days"], ucfg["beta"], seed,
                           catalog=catalog)
    manifests = {u.user_id: build_manifests(u, config["manifest_len"]) for u in users}

    sep = "\t" if args.sep == "tab" else ","
    sio.write_catalog(catalog, out_dir / "catalog.csv", sep=sep)
    sio.write_participants(participants, out_dir / "participants.jsonl")
    sio.write_users(users, out_dir / "users.jsonl")
    sio.write_manifests(manifests, out_dir / "manifests.jsonl")
    sio.write_index(out_dir, seed, config, CORPUS_FILES)
    print(f"corpus written to {out_dir} ({len(catalog)} videos, "
          f"{len(participants)} participants, {len(users)} users)")
    return 0


# -------------------------------------------------------------------- runs --
def _load_corpus(corpus_dir: str):
    corpus = Path(corpus_dir)
    for name in CORPUS_FILES + ("index.json",):
        if not (corpus / name).exists():
            raise ConfigError(f"missing corpus file: {corpus / name}")
    index = sio.read_index(corpus)
    catalog = sio.read_catalog(corpus / "catalog.csv")
    participants = sio.read_participants(corpus / "participants.jsonl")
    return index, catalog, participants


def _build_workload(index, catalog, participants, corpus_dir,
                    beta: float, manifest_len: int) -> Workload:
    config = index["config"]
    ucfg = config["users"]
    if beta == ucfg["beta"] and manifest_len == config["manifest_len"]:
        users = sio.read_users(Path(corpus_dir) / "users.jsonl")
        manifests = sio.read_manifests(Path(corpus_dir) / "manifests.jsonl")
    else:
        users = generate_users(participants, ucfg["n_users"], ucfg["videos_per_user"],
                               ucfg["window_days"], ucfg["batch_size"],
                               ucfg["batch_shift_days"], beta, index["seed"],
                               catalog=catalog)
        manifests = {u.user_id: build_manifests(u, manifest_len) for u in users}
    return Workload(catalog, users, manifests, beta, manifest_len)


def _cluster_from_config(config: dict, cluster_gb: float | None,
                         manifest_len: int, reorder: bool, seed: int) -> ClusterConfig:
    ccfg = config["cluster"]
    n_servers = ccfg["n_servers"]
    if cluster_gb is None:
        per_server = int(ccfg["per_server_capacity_gb"] * GIB)
    else:
        total = int(cluster_gb * GIB)
        if total % n_servers != 0:
            raise ConfigError(
                f"cluster size {total} bytes is not divisible by n_servers={n_servers}")
        per_server = total // n_servers
    # Refill when roughly a third of the manifest remains, capped by the
    # configured threshold; keeps lookahead depth proportional to manifest
    # length across manifest-length sweeps.
    refill = min(ccfg["manifest_refill_threshold"], manifest_len // 3)
    return ClusterConfig(
        n_servers=n_servers,
        per_server_capacity_bytes=per_server,
        initial_clients=ccfg["initial_clients"],
        max_clients=ccfg["max_clients"],
        client_add_interval=ccfg["client_add_interval"],
        manifest_refill_threshold=refill,
        reorder_enabled=reorder,
        duration_scale=ccfg.get("duration_scale", 1.0),
        seed=seed,
    )


def policy_label(policy: str, reorder: bool) -> str:
    if policy == "llf":
        return "silc" if reorder else "silc_nr"
    return f"{policy}_r" if reorder else policy


def _check_run_invariants(result, report, policy: str) -> None:
    served = sum(ev.bytes for ev in result.events if ev.kind == "video")
    hit_b = sum(ev.bytes for ev in result.events if ev.kind == "video" and ev.hit)
    if served != hit_b + report.midgress_bytes:
        raise InvariantViolation("flow conservation failed: "
                                 f"{served} != {hit_b} + {report.midgress_bytes}")
    if abs(report.byte_hit_rate + report.byte_miss_rate - 1.0) > 1e-9:
        raise InvariantViolation("byte rates do not sum to 1")
    if abs(report.object_hit_rate + report.object_miss_rate - 1.0) > 1e-9:
        raise InvariantViolation("object rates do not sum to 1")
    if policy in DYNAMIC_POLICIES and report.byte_miss_rate < report.compulsory_floor - 1e-12:
        raise InvariantViolation(
            f"byte miss rate {report.byte_miss_rate} below the compulsory floor "
            f"{report.compulsory_floor}")


def run_cell(index, catalog, participants, corpus_dir, *, policy: str,
             beta: float, cluster_gb: float | None, manifest_len: int,
             reorder: bool, seed: int | None = None):
    """One (workload, policy, cache size, manifest length, reorder) simulation."""
    config = index["config"]
    workload = _build_workload(index, catalog, participants, corpus_dir,
                               beta, manifest_len)
    cluster = _cluster_from_config(config, cluster_gb, manifest_len, reorder,
                                   index["seed"] if seed is None else seed)
    cache = CacheConfig(capacity_bytes=cluster.per_server_capacity_bytes,
                        policy=policy)
    result = run_simulation(workload, cluster, cache)
    label = policy_label(policy, reorder)
    report = summarize(result.events, workload_label=workload.label, policy=label,
                       cache_bytes=cluster.per_server_capacity_bytes * cluster.n_servers,
                       compulsory_floor=result.compulsory_floor)
    _check_run_invariants(result, report, policy)
    return result, report


def cmd_run(args) -> int:
    index, catalog, participants = _load_corpus(args.corpus)
    reorder = args.reorder == "on"
    result, report = run_cell(index, catalog, participants, args.corpus,
                              policy=args.policy, beta=args.beta,
                              cluster_gb=args.cluster_gb,
                              manifest_len=args.manifest_len, reorder=reorder,
                              seed=args.seed)
    reports_path = Path(args.reports)
    sio.ensure_dir(reports_path.parent)
    sio.write_reports_csv([report], reports_path, append=True)
    echo_dir = sio.ensure_dir(reports_path.parent / "configs")
    cell = (f"{report.policy}-b{args.beta:g}-c{report.cache_gb:g}"
            f"-l{args.manifest_len}")
    (echo_dir / f"{cell}.json").write_text(json.dumps({
        "corpus": str(args.corpus), "policy": args.policy, "beta": args.beta,
        "cluster_gb": report.cache_gb, "manifest_len": args.manifest_len,
        "reorder": reorder, "seed": args.seed if args.seed is not None else index["seed"],
    }, indent=2) + "\n", encoding="utf-8")
    if args.trace:
        sio.write_trace(result.events, args.trace)
    if args.decisions:
        sio.write_decisions(result.reorder_decisions, args.decisions)
    print(report.csv_row())
    return 0


# ------------------------------------------------------------------- sweep --
def _expand_grid(args) -> list[dict]:
    cells = []
    for beta in args.betas:
        for policy in args.policies:
            if policy not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {policy!r}")
            if args.reorder == "both":
                modes = (True, False) if policy == "llf" else (False,)
            else:
                modes = (args.reorder == "on",)
            for gb in args.cluster_gbs:
                for mflen in args.manifest_lens:
                    for mode in modes:
                        cells.append({"beta": beta, "policy": policy,
                                      "cluster_gb": gb, "manifest_len": mflen,
                                      "reorder": mode})
    return cells


_WORKER_CORPUS = {}


def _sweep_worker(payload):
    corpus_dir, cell = payload
    if corpus_dir not in _WORKER_CORPUS:
        _WORKER_CORPUS[corpus_dir] = _load_corpus(corpus_dir)
    index, catalog, participants = _WORKER_CORPUS[corpus_dir]
    result, report = run_cell(index, catalog, participants, corpus_dir, **cell)
    hist = displacement_histogram(result.reorder_decisions) if cell["reorder"] else {}
    return report, dict(hist)


def cmd_sweep(args) -> int:
    out_dir = sio.ensure_dir(args.out)
    cells = _expand_grid(args)
    payloads = [(args.corpus, cell) for cell in cells]
    reports = []
    displacement = {}
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(_sweep_worker, payloads))
    else:
        outputs = [_sweep_worker(p) for p in payloads]
    for report, hist in outputs:
        reports.append(report)
        for key, cnt in hist.items():
            displacement[key] = displacement.get(key, 0) + cnt
    if len(reports) != len(cells):
        raise InvariantViolation(
            f"sweep produced {len(reports)} rows for {len(cells)} cells")
    sio.write_reports_csv(reports, out_dir / "reports.csv")
    if displacement:
        sio.write_displacement_csv(displacement, out_dir / "displacement.csv")
    (out_dir / "sweep_config.json").write_text(json.dumps({
        "corpus": str(args.corpus), "betas": args.betas, "policies": args.policies,
        "cluster_gbs": args.cluster_gbs, "manifest_lens": args.manifest_lens,
        "reorder": args.reorder, "jobs": args.jobs,
    }, indent=2) + "\n", encoding="utf-8")
    print(f"{len(reports)} rows -> {out_dir / 'reports.csv'}")
    return 0


# ------------------------------------------------------------------- bench --
def cmd_bench(args) -> int:
    stats = latency_benchmark(policies=tuple(args.policies),
                              n_requests=args.requests, n_objects=args.objects,
                              seed=args.seed)
    for policy, st in stats.items():
        print(f"{policy:6s} median={st.median_us:.3f}us p90={st.p90_us:.3f}us "
              f"p99={st.p99_us:.3f}us mean={st.mean_us:.3f}us")
    payload = {p: vars(st) for p, st in stats.items()}
    if args.scaling:
        scaling = scaling_benchmark(n_requests=args.scaling_requests, seed=args.seed)
        payload["scaling"] = {str(n): vars(st) for n, st in scaling.items()}
        for n, st in scaling.items():
            print(f"llf @ {n} objects: median={st.median_us:.3f}us")
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n",
                                   encoding="utf-8")
    return 0


# ----------------------------------------------------------------- analyze --
def cmd_analyze(args) -> int:
    if args.what == "overlap":
        _, _, participants = _load_corpus(args.corpus)
        stats = overlap_stats(participants)
        payload = {"fraction_multiwatched": stats.fraction_multiwatched,
                   "gap_histogram": {str(k): v for k, v in
                                     sorted(stats.gap_histogram.items())}}
        print(json.dumps(payload, indent=2))
        if args.json:
            Path(args.json).write_text(json.dumps(payload, indent=2) + "\n",
                                       encoding="utf-8")
        return 0

    if args.what == "pareto-fit":
        if args.catalog:
            catalog = sio.read_catalog(args.catalog)
        else:
            if not args.corpus:
                raise ConfigError("pareto-fit needs --corpus or --catalog")
            catalog = sio.read_catalog(Path(args.corpus) / "catalog.csv")
        fit = pareto_fit(catalog.play_counts)
        payload = {"alpha_hat": fit.alpha_hat, "ccdf_slope": fit.ccdf_slope,
                   "n": fit.n}
        print(json.dumps(payload, indent=2))
        if args.json:
            Path(args.json).write_text(json.dumps(payload, indent=2) + "\n",
                                       encoding="utf-8")
        return 0

    if args.what == "overlap-alpha":
        results = expected_overlap_study(args.alphas, n_users=args.users,
                                         n_samples=args.samples, n_runs=args.runs,
                                         seed=args.seed, n_videos=args.videos)
        for alpha in sorted(results):
            print(f"alpha={alpha:g}:mean_overlap={results[alpha]:.4f}")
        if args.out:
            sio.write_overlap_alpha_csv(results, args.out)
        return 0

    if args.what == "displacement":
        decisions = sio.read_decisions(args.decisions)
        hist = displacement_histogram(decisions)
        sio.write_displacement_csv(hist, args.out)
        print(f"{sum(hist.values())} displacements -> {args.out}")
        return 0

    if args.what == "figures":
        return _render_figures(args)

    raise ConfigError(f"unknown analyze action {args.what!r}")


def _render_figures(args) -> int:
    exe = shutil.which("svcache-plots")
    if exe is None:
        raise ConfigError("svcache-plots is not installed; install the plots "
                          "package to render figures")
    out_dir = sio.ensure_dir(args.outdir)
    jobs = []
    if args.reports:
        jobs += [("beta_missrate", ["--reports", args.reports]),
                 ("cache_sweep", ["--reports", args.reports]),
                 ("topk", ["--reports", args.reports])]
    if args.displacement_csv:
        jobs.append(("displacement", ["--csv", args.displacement_csv]))
    if args.overlap_alpha_csv:
        jobs.append(("overlap_alpha", ["--csv", args.overlap_alpha_csv]))
    if args.catalog:
        jobs.append(("pareto", ["--catalog", args.catalog]))
    if args.mflen_series:
        series = []
        for item in args.mflen_series:
            series += ["--series", item]
        jobs.append(("mflen", series))
    if not jobs:
        raise ConfigError("analyze figures: no inputs given")
    for figure_id, extra in jobs:
        out = out_dir / f"{figure_id}.svg"
        cmd = [exe, figure_id, "--out", str(out)] + extra
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise InvariantViolation(
                f"svcache-plots {figure_id} failed: {proc.stderr.strip()}")
        print(f"rendered {out}")
    return 0


# -------------------------------------------------------------------- main --
class _Parser(argparse.ArgumentParser):
    # Route CLI misuse through the config-error exit code (1), not argparse's 2.
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="svcache",
        description="Trace-driven short-video CDN cache simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic corpus")
    p.add_argument("--config", help="JSON config file (defaults are built in)")
    p.add_argument("--out", default=_default_out_dir())
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sep", choices=("comma", "tab"), default="comma")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run one simulation cell")
    p.add_argument("--corpus", required=True)
    p.add_argument("--policy", required=True, choices=POLICY_NAMES)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--cluster-gb", type=float, default=None,
                   help="total cluster cache size in GiB")
    p.add_argument("--manifest-len", type=int, default=30)
    p.add_argument("--reorder", choices=("on", "off"), default="off")
    p.add_argument("--reports", default=str(Path(_default_out_dir()) / "reports.csv"))
    p.add_argument("--trace", default=None)
    p.add_argument("--decisions", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of simulation cells")
    p.add_argument("--corpus", required=True)
    p.add_argument("--betas", type=float, nargs="+",
                   default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    p.add_argument("--policies", nargs="+", default=list(DYNAMIC_POLICIES))
    p.add_argument("--cluster-gbs", type=float, nargs="+", default=[100.0])
    p.add_argument("--manifest-lens", type=int, nargs="+", default=[30])
    p.add_argument("--reorder", choices=("on", "off", "both"), default="both")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=_default_out_dir())
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="serve-latency microbenchmark")
    p.add_argument("--policies", nargs="+", default=["llf", "lru"])
    p.add_argument("--requests", type=int, default=1_000_000)
    p.add_argument("--objects", type=int, default=10_000)
    p.add_argument("--scaling", action="store_true",
                   help="also measure llf latency vs cache object count")
    p.add_argument("--scaling-requests", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="corpus / trace analysis")
    asub = p.add_subparsers(dest="what", required=True)

    a = asub.add_parser("overlap", help="cross-viewer overlap of a corpus")
    a.add_argument("--corpus", required=True)
    a.add_argument("--json", default=None)
    a.set_defaults(func=cmd_analyze)

    a = asub.add_parser("pareto-fit", help="popularity shape refit")
    a.add_argument("--corpus", default=None)
    a.add_argument("--catalog", default=None)
    a.add_argument("--json", default=None)
    a.set_defaults(func=cmd_analyze)

    a = asub.add_parser("overlap-alpha", help="overlap vs shape study")
    a.add_argument("--alphas", type=float, nargs="+",
                   default=[1.0, 1.31, 1.62, 2.0, 2.5, 3.0])
    a.add_argument("--users", type=int, default=100)
    a.add_argument("--samples", type=int, default=150)
    a.add_argument("--runs", type=int, default=100)
    a.add_argument("--videos", type=int, default=10_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_analyze)

    a = asub.add_parser("displacement", help="displacement histogram from decisions")
    a.add_argument("--decisions", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    a = asub.add_parser("figures", help="render figures via svcache-plots")
    a.add_argument("--reports", default=None)
    a.add_argument("--displacement-csv", default=None)
    a.add_argument("--overlap-alpha-csv", default=None)
    a.add_argument("--catalog", default=None)
    a.add_argument("--mflen-series", nargs="+", default=None,
                   help="label=reports.csv pairs, one per manifest length")
    a.add_argument("--outdir", default=str(Path(_default_out_dir()) / "figures"))
    a.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, WorkloadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
