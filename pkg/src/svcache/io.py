"""On-disk formats: catalog table, corpus JSONL files, traces, report CSV,
and the generated-corpus index."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .catalog import Catalog, EmulatedUser, ManifestFile, ParticipantHistory
from .cluster import RequestEvent
from .errors import ConfigError
from .metrics import REPORT_CSV_HEADER, RunReport

CATALOG_FIELDS = ("video_id", "size_bytes", "duration_ms", "play_count")


# -- catalog table ---------------------------------------------------------
def write_catalog(catalog: Catalog, path, sep: str = ",") -> None:
    """One record per line; the header line declares the separator."""
    if sep not in (",", "\t"):
        raise ConfigError("catalog separator must be ',' or tab")
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(sep.join(CATALOG_FIELDS) + "\n")
        chunk = 200_000
        for start in range(0, len(catalog), chunk):
            stop = min(start + chunk, len(catalog))
            rows = zip(catalog.video_ids[start:stop].tolist(),
                       catalog.size_bytes[start:stop].tolist(),
                       catalog.duration_ms[start:stop].tolist(),
                       catalog.play_counts[start:stop].tolist())
            fh.write("\n".join(f"{v}{sep}{s}{sep}{d}{sep}{p}" for v, s, d, p in rows))
            fh.write("\n")


def read_catalog(path) -> Catalog:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        sep = "\t" if "\t" in header else ","
        if header.split(sep) != list(CATALOG_FIELDS):
            raise ConfigError(f"unexpected catalog header: {header!r}")
        data = np.loadtxt(fh, delimiter=sep, dtype=np.int64, ndmin=2)
    if data.shape[0] and data.shape[1] != 4:
        raise ConfigError(f"catalog rows must have 4 fields, got {data.shape[1]}")
    return Catalog(data[:, 0].astype(np.uint64), data[:, 1], data[:, 2], data[:, 3])


# -- corpus JSONL ----------------------------------------------------------
def write_participants(histories, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for h in histories:
            rec = {"participant_id": h.participant_id,
                   "events": [[round(t, 3), v] for t, v in
                              zip(h.times.tolist(), h.video_ids.tolist())]}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_participants(path) -> list[ParticipantHistory]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            ev = rec["events"]
            times = np.array([e[0] for e in ev], dtype=np.float64)
            vids = np.array([e[1] for e in ev], dtype=np.uint64)
            out.append(ParticipantHistory(rec["participant_id"], times, vids))
    return out


def write_users(users, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for u in users:
            rec = {"user_id": u.user_id, "personality": list(u.personality),
                   "window": [u.window[0], u.window[1]], "beta": u.beta,
                   "video_sequence": list(u.video_sequence)}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_users(path) -> list[EmulatedUser]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out.append(EmulatedUser(rec["user_id"], tuple(rec["personality"]),
                                    (rec["window"][0], rec["window"][1]),
                                    rec["beta"], rec["video_sequence"]))
    return out


def write_manifests(manifests_by_user: dict, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for user_id in sorted(manifests_by_user):
            for m in manifests_by_user[user_id]:
                rec = {"user_id": m.user_id, "sequence_no": m.sequence_no,
                       "entries": list(m.entries)}
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_manifests(path) -> dict:
    out: dict[int, list[ManifestFile]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out.setdefault(rec["user_id"], []).append(
                ManifestFile(rec["user_id"], rec["sequence_no"], tuple(rec["entries"])))
    for ms in out.values():
        ms.sort(key=lambda m: m.sequence_no)
    return out


# -- traces ------------------------------------------------------------------
def write_trace(events, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ev in events:
            rec = {"tick": round(ev.tick, 6), "user": ev.user_id, "kind": ev.kind,
                   "video": ev.video_id, "server": ev.server, "hit": ev.hit,
                   "bytes": ev.bytes}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_trace(path) -> list[RequestEvent]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out.append(RequestEvent(rec["tick"], rec["user"], rec["kind"],
                                    rec["video"], rec["server"], rec["hit"],
                                    rec["bytes"]))
    return out


# -- reorder decisions ---------------------------------------------------------
def write_decisions(decisions, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in decisions:
            rec = {"original": list(d.original), "reordered": list(d.reordered),
                   "displacement": list(d.displacement)}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_decisions(path):
    from .reorder import ReorderDecision
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out.append(ReorderDecision(tuple(rec["original"]),
                                       tuple(rec["reordered"]),
                                       tuple(rec["displacement"])))
    return out


# -- report CSV ---------------------------------------------------------------
def write_reports_csv(reports, path, append: bool = False) -> None:
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", encoding="utf-8") as fh:
        if fresh:
            fh.write(REPORT_CSV_HEADER + "\n")
        for r in reports:
            fh.write(r.csv_row() + "\n")


def read_reports_csv(path) -> list[dict]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != REPORT_CSV_HEADER:
            raise ConfigError(f"unexpected report header: {header!r}")
        names = header.split(",")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(names):
                raise ConfigError(f"malformed report row: {line!r}")
            rows.append(dict(zip(names, parts)))
    return rows


# -- auxiliary CSVs consumed by the plots package -----------------------------
def write_displacement_csv(histogram: dict, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("displacement,count\n")
        for key in sorted(histogram):
            fh.write(f"{key},{histogram[key]}\n")


def write_overlap_alpha_csv(results: dict, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("alpha,mean_overlap\n")
        for alpha in sorted(results):
            fh.write(f"{alpha:g},{results[alpha]:.6f}\n")


# -- corpus index -------------------------------------------------------------
def _sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_index(out_dir, seed: int, config: dict, file_names) -> None:
    out_dir = Path(out_dir)
    entries = []
    for name in file_names:
        p = out_dir / name
        entries.append({"name": name, "sha256": _sha256_of(p),
                        "bytes": p.stat().st_size})
    index = {"seed": seed, "config": config, "files": entries}
    (out_dir / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_index(out_dir) -> dict:
    p = Path(out_dir) / "index.json"
    if not p.exists():
        raise ConfigError(f"missing corpus index: {p}")
    return json.loads(p.read_text(encoding="utf-8"))


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
