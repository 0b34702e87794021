"""Blinded perceptual-study engine.

A session is a seeded, deterministic shuffle of manifest items plus an
append-only rating log. The shuffle is Fisher-Yates driven by Python's
MT19937 (`random.Random(seed)`), with item tokens drawn from the same
stream, so a (manifest, seed, rater) triple always reproduces the identical
session. Ratings are persisted one JSON record per line and flushed before
they are acknowledged; replaying the log reconstructs the session state
exactly.

Provenance (generated vs ground truth) lives only in operator-side files
(session.json, the analysis reports); nothing rater-facing ever carries it.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import StudyError
from .imageio import DIRECTIONS, load_image

PROVENANCES = ("GENERATED", "GROUND_TRUTH")

REALISM_MIN, REALISM_MAX = 1, 4

SESSION_FILE = "session.json"
EVENTS_FILE = "events.jsonl"


class UnknownTokenError(StudyError):
    pass


class DuplicateRatingError(StudyError):
    pass


class RatingRangeError(StudyError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    """One image offered to raters, with its hidden provenance."""

    image_path: str
    provenance: str
    direction: str
    pair_id: str = ""

    def __post_init__(self):
        if not self.image_path:
            raise StudyError("image_path must be non-empty")
        if self.provenance not in PROVENANCES:
            raise StudyError(
                f"unknown provenance {self.provenance!r} "
                f"(expected one of {', '.join(PROVENANCES)})"
            )
        if self.direction not in DIRECTIONS:
            raise StudyError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class StudyItem:
    token: str
    image_path: str
    provenance: str
    direction: str
    pair_id: str = ""


@dataclass(frozen=True)
class RatingRecord:
    realism: int
    judged_real: bool
    timestamp: str

    def __post_init__(self):
        if not isinstance(self.realism, int) or isinstance(self.realism, bool):
            raise RatingRangeError("realism must be an integer")
        if not REALISM_MIN <= self.realism <= REALISM_MAX:
            raise RatingRangeError(
                f"realism {self.realism} out of range [{REALISM_MIN}, {REALISM_MAX}]"
            )


@dataclass
class StudySession:
    session_id: str
    seed: int
    rater_id: str
    items: tuple[StudyItem, ...]
    ratings: dict[str, RatingRecord] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.items)

    @property
    def completed(self) -> int:
        return len(self.ratings)

    @property
    def is_complete(self) -> bool:
        return self.completed == self.total

    def item_by_token(self, token: str) -> StudyItem:
        for item in self.items:
            if item.token == token:
                return item
        raise UnknownTokenError(f"unknown token {token!r}")

    def next_unrated(self) -> tuple[int, StudyItem] | None:
        """1-based presentation index and item of the next unrated entry."""
        for idx, item in enumerate(self.items, start=1):
            if item.token not in self.ratings:
                return idx, item
        return None

    def to_state_dict(self) -> dict:
        """Canonical state for persistence and replay-equality checks."""
        return {
            "session_id": self.session_id,
            "seed": self.seed,
            "rater_id": self.rater_id,
            "items": [
                {
                    "token": i.token,
                    "image_path": i.image_path,
                    "provenance": i.provenance,
                    "direction": i.direction,
                    "pair_id": i.pair_id,
                }
                for i in self.items
            ],
            "ratings": {
                t: {"realism": r.realism, "judged_real": r.judged_real, "timestamp": r.timestamp}
                for t, r in sorted(self.ratings.items())
            },
        }


def load_study_manifest(path) -> list[ManifestEntry]:
    """Read a study manifest CSV with header image_path,provenance,direction[,pair_id]."""
    path = Path(path)
    if not path.exists():
        raise StudyError(f"study manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"image_path", "provenance", "direction"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise StudyError("study manifest needs header image_path,provenance,direction[,pair_id]")
        entries = [
            ManifestEntry(
                image_path=(row["image_path"] or "").strip(),
                provenance=(row["provenance"] or "").strip(),
                direction=(row["direction"] or "").strip(),
                pair_id=(row.get("pair_id") or "").strip(),
            )
            for row in reader
        ]
    if not entries:
        raise StudyError(f"study manifest is empty: {path}")
    return entries


def build_session(
    entries: list[ManifestEntry],
    seed: int,
    rater_id: str,
    check_images: bool = True,
) -> StudySession:
    """Deterministically shuffle manifest entries into a rated session.

    Fisher-Yates over `random.Random(seed)`; tokens are 64-bit hex values
    drawn from the same stream after the shuffle.
    """
    if not entries:
        raise StudyError("cannot build a session from an empty manifest")
    if not rater_id:
        raise StudyError("rater_id must be non-empty")
    if check_images:
        for entry in entries:
            load_image(entry.image_path)
    rng = random.Random(seed)
    order = list(range(len(entries)))
    for i in range(len(order) - 1, 0, -1):
        j = rng.randrange(i + 1)
        order[i], order[j] = order[j], order[i]
    tokens: list[str] = []
    seen: set[str] = set()
    for _ in order:
        token = f"{rng.getrandbits(64):016x}"
        while token in seen:
            token = f"{rng.getrandbits(64):016x}"
        seen.add(token)
        tokens.append(token)
    items = tuple(
        StudyItem(
            token=tokens[pos],
            image_path=entries[src].image_path,
            provenance=entries[src].provenance,
            direction=entries[src].direction,
            pair_id=entries[src].pair_id,
        )
        for pos, src in enumerate(order)
    )
    session_id = f"{rater_id}-{seed & 0xFFFFFFFFFFFFFFFF:016x}"
    return StudySession(session_id=session_id, seed=seed, rater_id=rater_id, items=items)


def record_rating(
    session: StudySession,
    token: str,
    realism: int,
    judged_real: bool,
    timestamp: str | None = None,
) -> RatingRecord:
    """Validate and store one rating; each token is ratable exactly once."""
    item_tokens = {i.token for i in session.items}
    if token not in item_tokens:
        raise UnknownTokenError(f"unknown token {token!r}")
    if token in session.ratings:
        raise DuplicateRatingError(f"token {token!r} already rated")
    record = RatingRecord(
        realism=realism,
        judged_real=bool(judged_real),
        timestamp=timestamp or _utc_now(),
    )
    session.ratings[token] = record
    return record


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class SessionStats:
    mean: float
    std: float
    real_pct: float
    count: int


def session_stats(session: StudySession, provenance: str | None = None) -> SessionStats:
    """Mean/sample-std of realism and percent judged real over rated items.

    provenance filters to one class; None aggregates every rated item.
    """
    if provenance is not None and provenance not in PROVENANCES:
        raise StudyError(f"unknown provenance {provenance!r}")
    ratings = [
        session.ratings[i.token]
        for i in session.items
        if i.token in session.ratings and (provenance is None or i.provenance == provenance)
    ]
    if not ratings:
        raise StudyError("no ratings match the filter")
    n = len(ratings)
    values = [r.realism for r in ratings]
    mean = sum(values) / n
    std = 0.0 if n == 1 else math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    real_pct = 100.0 * sum(1 for r in ratings if r.judged_real) / n
    return SessionStats(mean=mean, std=std, real_pct=real_pct, count=n)


@dataclass(frozen=True)
class ConcordanceResult:
    """Pearson correlation, Lin's concordance, and the bias-correction factor.

    Sample (N-1) moments are used consistently in every term.
    """

    pearson_rho: float
    ccc_rho_c: float
    c_beta: float


def concordance(x: list[float], y: list[float]) -> ConcordanceResult:
    """Lin's concordance between two equal-length rating vectors."""
    if len(x) != len(y):
        raise StudyError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise StudyError("concordance needs at least 3 paired values")
    mx = sum(x) / n
    my = sum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = sum(d * d for d in dx) / (n - 1)
    syy = sum(d * d for d in dy) / (n - 1)
    sxy = sum(a * b for a, b in zip(dx, dy)) / (n - 1)
    if sxx == 0.0 or syy == 0.0:
        raise StudyError("concordance undefined for zero-variance input")
    pearson = sxy / math.sqrt(sxx * syy)
    ccc = 2.0 * sxy / (sxx + syy + (mx - my) ** 2)
    if pearson != 0.0:
        c_beta = ccc / pearson
    else:
        c_beta = 2.0 * math.sqrt(sxx * syy) / (sxx + syy + (mx - my) ** 2)
    return ConcordanceResult(pearson_rho=pearson, ccc_rho_c=ccc, c_beta=c_beta)


# --- persistence -------------------------------------------------------------


def save_session(session: StudySession, directory) -> None:
    """Write session.json (operator-side; includes provenance) and seed an
    empty event log if none exists."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = session.to_state_dict()
    del state["ratings"]  # ratings live in the event log only
    with open(directory / SESSION_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(state, fh, indent=2, sort_keys=True)
        fh.write("\n")
    (directory / EVENTS_FILE).touch()


def load_session(directory) -> StudySession:
    """Rebuild a session from session.json plus an event-log replay."""
    directory = Path(directory)
    session_path = directory / SESSION_FILE
    if not session_path.exists():
        raise StudyError(f"no {SESSION_FILE} in {directory}")
    with open(session_path, encoding="utf-8") as fh:
        state = json.load(fh)
    items = tuple(
        StudyItem(
            token=i["token"],
            image_path=i["image_path"],
            provenance=i["provenance"],
            direction=i["direction"],
            pair_id=i.get("pair_id", ""),
        )
        for i in state["items"]
    )
    session = StudySession(
        session_id=state["session_id"],
        seed=state["seed"],
        rater_id=state["rater_id"],
        items=items,
    )
    events_path = directory / EVENTS_FILE
    if events_path.exists():
        for event in read_events(events_path):
            record_rating(
                session,
                token=event["token"],
                realism=event["realism"],
                judged_real=event["judged_real"],
                timestamp=event["ts"],
            )
    return session


def read_events(path) -> list[dict]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StudyError(f"{path}:{lineno}: corrupt event record: {exc}") from exc
    return events


class SessionStore:
    """Durable wrapper around one session directory.

    Ratings are appended to the event log and flushed to disk before the
    in-memory state changes, so a crash never acknowledges an unlogged
    rating. One lock serializes submissions per session.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.session = load_session(self.directory)
        self._lock = threading.Lock()

    def record_rating(self, token: str, realism: int, judged_real: bool) -> RatingRecord:
        with self._lock:
            # validate first so rejected submissions leave no log entry
            item_tokens = {i.token for i in self.session.items}
            if token not in item_tokens:
                raise UnknownTokenError(f"unknown token {token!r}")
            if token in self.session.ratings:
                raise DuplicateRatingError(f"token {token!r} already rated")
            record = RatingRecord(
                realism=realism, judged_real=bool(judged_real), timestamp=_utc_now()
            )
            event = {
                "ts": record.timestamp,
                "token": token,
                "realism": record.realism,
                "judged_real": record.judged_real,
                "rater_id": self.session.rater_id,
            }
            with open(self.directory / EVENTS_FILE, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self.session.ratings[token] = record
            return record


# --- analysis (Table-4/5-shaped reports) -------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    rater_id: str
    direction: str
    provenance: str
    mean: float
    std: float
    real_pct: float
    count: int


@dataclass(frozen=True)
class AgreementRow:
    rater_id: str
    direction: str
    pearson_rho: float
    ccc_rho_c: float
    c_beta: float
    n_pairs: int


def perceptual_summary(session: StudySession) -> list[SummaryRow]:
    """Per-direction, per-provenance rating statistics for one rater."""
    rows: list[SummaryRow] = []
    for direction in DIRECTIONS:
        for provenance in PROVENANCES:
            ratings = [
                session.ratings[i.token]
                for i in session.items
                if i.token in session.ratings
                and i.direction == direction
                and i.provenance == provenance
            ]
            if not ratings:
                continue
            n = len(ratings)
            values = [r.realism for r in ratings]
            mean = sum(values) / n
            std = 0.0 if n == 1 else math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
            real_pct = 100.0 * sum(1 for r in ratings if r.judged_real) / n
            rows.append(
                SummaryRow(
                    rater_id=session.rater_id,
                    direction=direction,
                    provenance=provenance,
                    mean=mean,
                    std=std,
                    real_pct=real_pct,
                    count=n,
                )
            )
    return rows


def agreement_rows(session: StudySession) -> list[AgreementRow]:
    """Generated-vs-ground-truth concordance per direction for one rater.

    Items are aligned by pair_id; directions without at least 3 fully rated
    pairs (or without pair ids at all) produce no row.
    """
    rows: list[AgreementRow] = []
    for direction in DIRECTIONS:
        gen: dict[str, int] = {}
        truth: dict[str, int] = {}
        for item in session.items:
            if item.direction != direction or not item.pair_id:
                continue
            rating = session.ratings.get(item.token)
            if rating is None:
                continue
            target = gen if item.provenance == "GENERATED" else truth
            target[item.pair_id] = rating.realism
        shared = sorted(set(gen) & set(truth))
        if len(shared) < 3:
            continue
        x = [float(gen[p]) for p in shared]
        y = [float(truth[p]) for p in shared]
        try:
            result = concordance(x, y)
        except StudyError:
            continue  # zero-variance ratings: agreement undefined
        rows.append(
            AgreementRow(
                rater_id=session.rater_id,
                direction=direction,
                pearson_rho=result.pearson_rho,
                ccc_rho_c=result.ccc_rho_c,
                c_beta=result.c_beta,
                n_pairs=len(shared),
            )
        )
    return rows


_PROVENANCE_DISPLAY = {"GENERATED": "Model", "GROUND_TRUTH": "Ground truth"}


def render_study_report(sessions: list[StudySession], fmt: str = "markdown") -> bytes:
    """Render rating summaries and agreement statistics for 1..2 sessions."""
    if not sessions:
        raise StudyError("no sessions to analyze")
    if fmt not in ("markdown", "csv", "json"):
        raise StudyError(f"unknown format {fmt!r}")
    summaries = [row for s in sessions for row in perceptual_summary(s)]
    agreements = [row for s in sessions for row in agreement_rows(s)]
    if fmt == "json":
        payload = {
            "ratings": [vars(r) for r in summaries],
            "agreement": [vars(r) for r in agreements],
        }
        return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "csv":
        lines = ["section,rater_id,direction,source,mean,std,real_pct,n,pearson_rho,ccc_rho_c,c_beta"]
        for r in summaries:
            lines.append(
                f"ratings,{r.rater_id},{r.direction},{_PROVENANCE_DISPLAY[r.provenance]},"
                f"{r.mean:.4f},{r.std:.4f},{r.real_pct:.2f},{r.count},,,"
            )
        for r in agreements:
            lines.append(
                f"agreement,{r.rater_id},{r.direction},,,,,{r.n_pairs},"
                f"{r.pearson_rho:.4f},{r.ccc_rho_c:.4f},{r.c_beta:.4f}"
            )
        return ("\n".join(lines) + "\n").encode("utf-8")
    out: list[str] = []
    for direction in DIRECTIONS:
        block = [r for r in summaries if r.direction == direction]
        if not block:
            continue
        out.append(f"## {direction}")
        out.append("")
        out.append("| Source | Rater | Mean | Std | Real% |")
        out.append("| --- | --- | --- | --- | --- |")
        for r in block:
            out.append(
                f"| {_PROVENANCE_DISPLAY[r.provenance]} | {r.rater_id} "
                f"| {r.mean:.2f} | {r.std:.2f} | {r.real_pct:.2f}% |"
            )
        out.append("")
    if agreements:
        out.append("## Agreement of generated and ground-truth ratings")
        out.append("")
        out.append("| Rater | Direction | Pearson rho | Lin rho_c | C_beta | Pairs |")
        out.append("| --- | --- | --- | --- | --- | --- |")
        for r in agreements:
            out.append(
                f"| {r.rater_id} | {r.direction} | {r.pearson_rho:.2f} "
                f"| {r.ccc_rho_c:.2f} | {r.c_beta:.2f} | {r.n_pairs} |"
            )
        out.append("")
    return ("\n".join(out)).encode("utf-8")
