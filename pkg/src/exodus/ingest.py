"""Parse newline-delimited comment dumps and persist a columnar event cache.

Parsing is single-pass and streaming: memory use is bounded per line, so
arbitrarily large dumps can be ingested. The cache is a small custom columnar
container (one file per dataset split plus a manifest) chosen over generic
archive formats because the round trip must be lossless and byte-deterministic
for identical input.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import logging
from array import array
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, TYPE_CHECKING, Iterable, Iterator, Mapping

import numpy as np

from .errors import CacheVersionError, DataError, SchemaError

if TYPE_CHECKING:
    from .cohort import InterventionSpec

logger = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1
_MAGIC = b"XCOL1\n"

# Record fields as they appear in public comment dumps; callers may remap.
DEFAULT_SCHEMA = {
    "event_id": "id",
    "user_id": "author",
    "community_id": "subreddit",
    "timestamp": "created_utc",
    "body": "body",
    "vote_score": "score",
    "parent_id": "parent_id",
    "is_stickied": "stickied",
}

_REQUIRED = ("event_id", "user_id", "community_id", "timestamp", "body")


@dataclass(frozen=True)
class CommentEvent:
    """One timestamped comment.

    `timestamp` is UTC seconds since the epoch; fractional seconds are
    retained when present because the bot heuristic needs sub-second gaps.
    """

    event_id: str
    user_id: str
    community_id: str
    timestamp: float
    body: str
    vote_score: int = 0
    parent_id: str | None = None
    is_thread_root: bool = True
    is_stickied: bool = False


class SplitTag(str, Enum):
    BANNED_BEFORE = "banned_before"
    NONBANNED_BEFORE = "nonbanned_before"
    NONBANNED_AFTER = "nonbanned_after"


@dataclass
class DatasetSplit:
    tag: SplitTag
    events: list[CommentEvent] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class ParseReport:
    n_lines: int = 0
    n_events: int = 0
    n_skipped: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)
    _max_recorded: int = 100

    def record_skip(self, line_no: int, reason: str) -> None:
        self.n_skipped += 1
        if len(self.skipped) < self._max_recorded:
            self.skipped.append((line_no, reason))


def _is_thread_root(parent_id: str | None) -> bool:
    # A parent of kind "t3_*" is a submission, not a comment, so the comment
    # sits at the top of its thread.
    return parent_id is None or parent_id == "" or parent_id.startswith("t3_")


def _event_from_record(record: Mapping, schema: Mapping[str, str]) -> CommentEvent:
    missing = [f for f in _REQUIRED if schema[f] not in record or record[schema[f]] is None]
    if missing:
        raise ValueError(f"missing fields: {', '.join(schema[f] for f in missing)}")
    ts = float(record[schema["timestamp"]])
    if ts <= 0:
        raise ValueError("timestamp must be > 0")
    raw_parent = record.get(schema["parent_id"])
    parent_id = None if raw_parent in (None, "") else str(raw_parent)
    raw_score = record.get(schema["vote_score"], 0)
    return CommentEvent(
        event_id=str(record[schema["event_id"]]),
        user_id=str(record[schema["user_id"]]),
        community_id=str(record[schema["community_id"]]),
        timestamp=ts,
        body=str(record[schema["body"]]),
        vote_score=int(raw_score) if raw_score is not None else 0,
        parent_id=parent_id,
        is_thread_root=_is_thread_root(parent_id),
        is_stickied=bool(record.get(schema["is_stickied"], False)),
    )


def open_dump(path: str | Path) -> IO[bytes]:
    """Open a dump file for reading; .gz suffixes are decompressed."""
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def iter_dump(
    lines: Iterable[bytes | str],
    schema: Mapping[str, str] | None = None,
    report: ParseReport | None = None,
) -> Iterator[CommentEvent]:
    """Yield events from newline-delimited JSON records, skipping bad lines.

    Malformed lines are counted in `report` and never abort the run; the
    caller should invoke `check_parse_sanity` afterwards to reject inputs
    where the schema mapping is evidently wrong.
    """
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    report = report if report is not None else ParseReport()
    for line_no, raw in enumerate(lines, start=1):
        report.n_lines += 1
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        line = raw.strip()
        if not line:
            report.record_skip(line_no, "empty line")
            continue
        try:
            record = json.loads(line)
            event = _event_from_record(record, schema)
        except (ValueError, TypeError, KeyError) as exc:
            report.record_skip(line_no, str(exc))
            continue
        report.n_events += 1
        yield event


def check_parse_sanity(report: ParseReport) -> None:
    """Reject runs where more than half the lines failed to parse."""
    if report.n_lines > 0 and report.n_skipped > report.n_lines / 2:
        raise SchemaError(
            f"{report.n_skipped}/{report.n_lines} lines malformed; "
            "the schema mapping is probably wrong"
        )


def parse_dump(
    source: str | Path | IO[bytes] | Iterable[str],
    schema: Mapping[str, str] | None = None,
) -> tuple[list[CommentEvent], ParseReport]:
    """Materialize a full dump. Input order is preserved."""
    report = ParseReport()
    if isinstance(source, (str, Path)):
        try:
            fh = open_dump(source)
        except OSError as exc:
            raise DataError(f"cannot read dump {source}: {exc}") from exc
        with fh:
            events = list(iter_dump(fh, schema, report))
    else:
        events = list(iter_dump(source, schema, report))
    check_parse_sanity(report)
    return events, report


# ---------------------------------------------------------------------------
# Partitioning


@dataclass
class PartitionResult:
    banned_before: DatasetSplit
    nonbanned_before: DatasetSplit
    nonbanned_after: DatasetSplit
    n_discarded_at_t0: int = 0
    n_discarded_banned_after: int = 0

    @property
    def splits(self) -> dict[SplitTag, DatasetSplit]:
        return {
            SplitTag.BANNED_BEFORE: self.banned_before,
            SplitTag.NONBANNED_BEFORE: self.nonbanned_before,
            SplitTag.NONBANNED_AFTER: self.nonbanned_after,
        }

    @property
    def n_discarded(self) -> int:
        return self.n_discarded_at_t0 + self.n_discarded_banned_after


def split_for_event(event: CommentEvent, spec: "InterventionSpec") -> SplitTag | None:
    """Route one event to its dataset split; None means discard."""
    if event.timestamp == spec.t0:
        return None
    banned = event.community_id in spec.banned_communities
    before = event.timestamp < spec.t0
    if banned:
        return SplitTag.BANNED_BEFORE if before else None
    return SplitTag.NONBANNED_BEFORE if before else SplitTag.NONBANNED_AFTER


def partition_events(
    events: Iterable[CommentEvent], spec: "InterventionSpec"
) -> PartitionResult:
    """Assign each event to exactly one split or discard it.

    Events at exactly t0 are discarded; events inside banned communities
    after t0 cannot exist by construction and are discarded with a warning.
    """
    if not spec.banned_communities:
        raise DataError("intervention spec has no banned communities")
    result = PartitionResult(
        DatasetSplit(SplitTag.BANNED_BEFORE),
        DatasetSplit(SplitTag.NONBANNED_BEFORE),
        DatasetSplit(SplitTag.NONBANNED_AFTER),
    )
    by_tag = result.splits
    for event in events:
        tag = split_for_event(event, spec)
        if tag is None:
            if event.timestamp == spec.t0:
                result.n_discarded_at_t0 += 1
            else:
                result.n_discarded_banned_after += 1
        else:
            by_tag[tag].events.append(event)
    if result.n_discarded_banned_after:
        logger.warning(
            "discarded %d events inside banned communities after t0",
            result.n_discarded_banned_after,
        )
    return result


# ---------------------------------------------------------------------------
# Columnar cache

_STR_COLUMNS = ("event_id", "user_id", "community_id", "body", "parent_id")
_COLUMN_ORDER = (
    ("event_id", "str"),
    ("user_id", "str"),
    ("community_id", "str"),
    ("timestamp", "f8"),
    ("body", "str"),
    ("vote_score", "i8"),
    ("parent_id", "str"),
    ("has_parent", "b1"),
    ("is_thread_root", "b1"),
    ("is_stickied", "b1"),
)


class _SplitBuffer:
    """Columnar accumulation buffers for one split; strings are stored as a
    UTF-8 blob plus offsets so memory stays compact during large ingests."""

    def __init__(self):
        self.n = 0
        self.t_min = None
        self.t_max = None
        self.blobs = {name: bytearray() for name in _STR_COLUMNS}
        self.offsets = {name: array("q", [0]) for name in _STR_COLUMNS}
        self.timestamp = array("d")
        self.vote_score = array("q")
        self.has_parent = bytearray()
        self.is_thread_root = bytearray()
        self.is_stickied = bytearray()

    def add(self, e: CommentEvent) -> None:
        self.n += 1
        self.t_min = e.timestamp if self.t_min is None else min(self.t_min, e.timestamp)
        self.t_max = e.timestamp if self.t_max is None else max(self.t_max, e.timestamp)
        for name, value in (
            ("event_id", e.event_id),
            ("user_id", e.user_id),
            ("community_id", e.community_id),
            ("body", e.body),
            ("parent_id", e.parent_id or ""),
        ):
            blob = self.blobs[name]
            blob.extend(value.encode("utf-8"))
            self.offsets[name].append(len(blob))
        self.timestamp.append(e.timestamp)
        self.vote_score.append(e.vote_score)
        self.has_parent.append(1 if e.parent_id is not None else 0)
        self.is_thread_root.append(1 if e.is_thread_root else 0)
        self.is_stickied.append(1 if e.is_stickied else 0)

    def _payload(self, name: str, kind: str) -> bytes:
        if kind == "str":
            return bytes(self.offsets[name]) + bytes(self.blobs[name])
        if kind == "f8":
            return self.timestamp.tobytes()
        if kind == "i8":
            return self.vote_score.tobytes()
        return bytes(getattr(self, name))

    def write(self, path: Path, tag: SplitTag) -> None:
        payloads = [(name, kind, self._payload(name, kind)) for name, kind in _COLUMN_ORDER]
        header = {
            "version": CACHE_FORMAT_VERSION,
            "tag": tag.value,
            "n": self.n,
            "columns": [
                {"name": name, "kind": kind, "nbytes": len(data)}
                for name, kind, data in payloads
            ],
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(len(header_bytes).to_bytes(8, "little"))
            fh.write(header_bytes)
            for _, _, data in payloads:
                fh.write(data)


def _read_split_file(path: Path) -> DatasetSplit:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise DataError(f"{path} is not a cache split file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len))
        if header["version"] > CACHE_FORMAT_VERSION:
            raise CacheVersionError(
                f"cache split {path} has format version {header['version']}, "
                f"newer than supported version {CACHE_FORMAT_VERSION}"
            )
        n = header["n"]
        columns: dict[str, object] = {}
        for col in header["columns"]:
            data = fh.read(col["nbytes"])
            if col["kind"] == "str":
                offsets = np.frombuffer(data[: 8 * (n + 1)], dtype="<i8")
                blob = data[8 * (n + 1) :]
                columns[col["name"]] = (offsets, blob)
            elif col["kind"] == "f8":
                columns[col["name"]] = np.frombuffer(data, dtype="<f8")
            elif col["kind"] == "i8":
                columns[col["name"]] = np.frombuffer(data, dtype="<i8")
            else:
                columns[col["name"]] = np.frombuffer(data, dtype=np.uint8)

    def strs(name: str) -> list[str]:
        offsets, blob = columns[name]
        return [
            blob[offsets[i] : offsets[i + 1]].decode("utf-8") for i in range(n)
        ]

    event_ids = strs("event_id")
    user_ids = strs("user_id")
    community_ids = strs("community_id")
    bodies = strs("body")
    parent_ids = strs("parent_id")
    has_parent = columns["has_parent"]
    timestamps = columns["timestamp"]
    vote_scores = columns["vote_score"]
    is_root = columns["is_thread_root"]
    is_stickied = columns["is_stickied"]
    events = [
        CommentEvent(
            event_id=event_ids[i],
            user_id=user_ids[i],
            community_id=community_ids[i],
            timestamp=float(timestamps[i]),
            body=bodies[i],
            vote_score=int(vote_scores[i]),
            parent_id=parent_ids[i] if has_parent[i] else None,
            is_thread_root=bool(is_root[i]),
            is_stickied=bool(is_stickied[i]),
        )
        for i in range(n)
    ]
    return DatasetSplit(SplitTag(header["tag"]), events)


class CacheWriter:
    """Streaming cache builder: routes events into per-split columnar buffers
    and writes the versioned cache directory on close."""

    def __init__(self, out_dir: str | Path, spec: "InterventionSpec"):
        self.out_dir = Path(out_dir)
        self.spec = spec
        self.buffers = {tag: _SplitBuffer() for tag in SplitTag}
        self.n_discarded_at_t0 = 0
        self.n_discarded_banned_after = 0

    def add(self, event: CommentEvent) -> None:
        tag = split_for_event(event, self.spec)
        if tag is None:
            if event.timestamp == self.spec.t0:
                self.n_discarded_at_t0 += 1
            else:
                self.n_discarded_banned_after += 1
            return
        self.buffers[tag].add(event)

    def finish(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for tag in SplitTag:
            buf = self.buffers[tag]
            fname = f"{tag.value}.xcol"
            buf.write(self.out_dir / fname, tag)
            digest = hashlib.sha256((self.out_dir / fname).read_bytes()).hexdigest()
            entries.append(
                {
                    "tag": tag.value,
                    "file": fname,
                    "n_events": buf.n,
                    "t_min": buf.t_min,
                    "t_max": buf.t_max,
                    "sha256": digest,
                }
            )
        manifest = {
            "format_version": CACHE_FORMAT_VERSION,
            "splits": entries,
            "discarded_at_t0": self.n_discarded_at_t0,
            "discarded_banned_after": self.n_discarded_banned_after,
            "intervention": self.spec.to_dict(),
        }
        manifest_path = self.out_dir / "manifest.json"
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        if self.n_discarded_banned_after:
            logger.warning(
                "discarded %d events inside banned communities after t0",
                self.n_discarded_banned_after,
            )
        return manifest_path


def write_cache(
    partition: PartitionResult, out_dir: str | Path, spec: "InterventionSpec"
) -> Path:
    """Persist already-partitioned splits; returns the manifest path."""
    writer = CacheWriter(out_dir, spec)
    for tag, split in partition.splits.items():
        buf = writer.buffers[tag]
        for event in split.events:
            buf.add(event)
    writer.n_discarded_at_t0 = partition.n_discarded_at_t0
    writer.n_discarded_banned_after = partition.n_discarded_banned_after
    return writer.finish()


def read_manifest(cache_dir: str | Path) -> dict:
    path = Path(cache_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"no cache manifest at {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("format_version", 0) > CACHE_FORMAT_VERSION:
        raise CacheVersionError(
            f"cache at {cache_dir} has format version {manifest.get('format_version')}, "
            f"newer than supported version {CACHE_FORMAT_VERSION}"
        )
    return manifest


def read_cache(cache_dir: str | Path) -> dict[SplitTag, DatasetSplit]:
    """Load all splits from a cache directory, verifying the format version."""
    cache_dir = Path(cache_dir)
    manifest = read_manifest(cache_dir)
    splits: dict[SplitTag, DatasetSplit] = {}
    for entry in manifest["splits"]:
        split = _read_split_file(cache_dir / entry["file"])
        if len(split.events) != entry["n_events"]:
            raise DataError(
                f"cache split {entry['file']}: manifest says {entry['n_events']} "
                f"events, file holds {len(split.events)}"
            )
        splits[split.tag] = split
    return splits
