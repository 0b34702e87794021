"""Batch metric evaluation over a manifest, with Table-style aggregation.

evaluate_manifest runs pairs in parallel but the outputs are bit-identical
for any worker count: per-pair results are re-ordered by manifest index
before serialization, and aggregation sorts by a total key before reducing.
Per-pair failures are collected, never fatal to the batch.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import metrics as m
from .errors import EvalError
from .imageio import EvalManifest, PairRecord, load_image

METRIC_NAMES = ("psnr", "ssim", "uqi", "vif")


class BatchError(EvalError):
    """Batch-level failure (empty inputs, unknown metric or format)."""


@dataclass(frozen=True)
class PairResult:
    record: PairRecord
    metrics: m.MetricRecord


@dataclass(frozen=True)
class PairFailure:
    record: PairRecord
    error: str


@dataclass(frozen=True)
class AggregateRow:
    """Per-(model, direction) statistics: mean and sample (N-1) std.

    Pairs with infinite PSNR are excluded from the PSNR mean/std and counted
    in psnr_infinite instead. A metric that was not computed for the group is
    carried as None.
    """

    model_id: str
    direction: str
    n_pairs: int
    psnr_avg: float | None
    psnr_std: float | None
    psnr_infinite: int
    ssim_avg: float | None
    ssim_std: float | None
    uqi_avg: float | None
    uqi_std: float | None
    vif_avg: float | None
    vif_std: float | None

    def metric_avg(self, name: str) -> float | None:
        _check_metric_name(name)
        return getattr(self, f"{name}_avg")


def _check_metric_name(name: str) -> None:
    if name not in METRIC_NAMES:
        raise BatchError(f"unknown metric {name!r} (expected one of {', '.join(METRIC_NAMES)})")


def evaluate_pair(
    record: PairRecord,
    selection: tuple[str, ...] = METRIC_NAMES,
    ssim_params: m.SsimParams | None = None,
    vif_params: m.VifParams | None = None,
) -> PairResult:
    """Compute the selected metrics for one pair.

    The reference plane is the real-modality image; the generated image is
    the distorted operand (the ordering only matters for VIF).
    """
    for name in selection:
        _check_metric_name(name)
    reference = load_image(record.reference_path)
    generated = load_image(record.generated_path)
    values: dict[str, float] = {}
    if "psnr" in selection:
        values["psnr_db"] = m.psnr(reference, generated)
    if "ssim" in selection:
        values["ssim"] = m.ssim(reference, generated, ssim_params)
    if "uqi" in selection:
        values["uqi"] = m.uqi(reference, generated)
    if "vif" in selection:
        values["vif"] = m.vif(reference, generated, vif_params)
    return PairResult(record=record, metrics=m.MetricRecord(**values))


def evaluate_manifest(
    manifest: EvalManifest,
    selection: tuple[str, ...] = METRIC_NAMES,
    threads: int | None = None,
    ssim_params: m.SsimParams | None = None,
    vif_params: m.VifParams | None = None,
) -> tuple[list[PairResult], list[PairFailure]]:
    """Evaluate every manifest pair, collecting per-pair failures.

    Returns (results, failures), each in manifest order regardless of the
    thread count.
    """
    for name in selection:
        _check_metric_name(name)

    def run(indexed: tuple[int, PairRecord]):
        idx, record = indexed
        try:
            return idx, evaluate_pair(record, selection, ssim_params, vif_params), None
        except EvalError as exc:
            return idx, None, PairFailure(record=record, error=str(exc))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        outcomes = list(pool.map(run, enumerate(manifest.records)))
    outcomes.sort(key=lambda t: t[0])
    results = [r for _, r, f in outcomes if f is None]
    failures = [f for _, r, f in outcomes if f is not None]
    return results, failures


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    n = len(values)
    avg = sum(values) / n
    if n == 1:
        return avg, 0.0
    var = sum((v - avg) ** 2 for v in values) / (n - 1)
    return avg, math.sqrt(var)


def aggregate(results: list[PairResult]) -> list[AggregateRow]:
    """Group results by (model_id, direction) into rows sorted by that key.

    Reduction happens over a totally ordered copy of the inputs, so the rows
    are bit-identical under any permutation of `results`.
    """
    if not results:
        raise BatchError("no results to aggregate")
    ordered = sorted(
        results,
        key=lambda r: (
            r.record.model_id,
            r.record.direction,
            r.record.generated_path,
            r.record.reference_path,
        ),
    )
    rows: list[AggregateRow] = []
    group: list[PairResult] = []

    def flush():
        if not group:
            return
        rec = group[0].record
        psnr_values = [
            r.metrics.psnr_db
            for r in group
            if r.metrics.psnr_db is not None and math.isfinite(r.metrics.psnr_db)
        ]
        psnr_inf = sum(
            1
            for r in group
            if r.metrics.psnr_db is not None and math.isinf(r.metrics.psnr_db)
        )
        stats = {}
        for name in ("ssim", "uqi", "vif"):
            vals = [getattr(r.metrics, name) for r in group if getattr(r.metrics, name) is not None]
            stats[f"{name}_avg"], stats[f"{name}_std"] = _mean_std(vals)
        psnr_avg, psnr_std = _mean_std(psnr_values)
        rows.append(
            AggregateRow(
                model_id=rec.model_id,
                direction=rec.direction,
                n_pairs=len(group),
                psnr_avg=psnr_avg,
                psnr_std=psnr_std,
                psnr_infinite=psnr_inf,
                **stats,
            )
        )
        group.clear()

    current: tuple[str, str] | None = None
    for r in ordered:
        key = (r.record.model_id, r.record.direction)
        if key != current:
            flush()
            current = key
        group.append(r)
    flush()
    return rows


def rank_models(rows: list[AggregateRow], metric: str, direction: str) -> list[str]:
    """Model ids in descending order of the metric's average for a direction.

    Ties break by ascending model_id; rows without a value for the metric are
    left out of the ranking.
    """
    _check_metric_name(metric)
    candidates = [r for r in rows if r.direction == direction]
    if not candidates:
        raise BatchError(f"no rows for direction {direction!r}")
    scored = [(r.metric_avg(metric), r.model_id) for r in candidates]
    scored = [(v, mid) for v, mid in scored if v is not None]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [mid for _, mid in scored]


# --- results file (one JSON object per manifest pair, UTF-8) ---------------


def _psnr_to_json(value: float | None):
    if value is None:
        return None
    if math.isinf(value):
        return "inf"
    return value


def _psnr_from_json(value):
    if value == "inf":
        return math.inf
    return value


def write_results(results: list[PairResult], failures: list[PairFailure], path) -> None:
    """Serialize per-pair outcomes as JSON lines, ordered by pair identity."""
    entries = []
    for r in results:
        entries.append(
            {
                "model_id": r.record.model_id,
                "category": r.record.category,
                "direction": r.record.direction,
                "generated_path": r.record.generated_path,
                "reference_path": r.record.reference_path,
                "subject_id": r.record.subject_id,
                "psnr_db": _psnr_to_json(r.metrics.psnr_db),
                "ssim": r.metrics.ssim,
                "uqi": r.metrics.uqi,
                "vif": r.metrics.vif,
            }
        )
    for f in failures:
        entries.append(
            {
                "model_id": f.record.model_id,
                "category": f.record.category,
                "direction": f.record.direction,
                "generated_path": f.record.generated_path,
                "reference_path": f.record.reference_path,
                "subject_id": f.record.subject_id,
                "error": f.error,
            }
        )
    entries.sort(key=lambda e: (e["model_id"], e["direction"], e["generated_path"]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def read_results(path) -> tuple[list[PairResult], list[PairFailure]]:
    """Parse a results file back into pair results and failures."""
    path = Path(path)
    if not path.exists():
        raise BatchError(f"results file not found: {path}")
    results: list[PairResult] = []
    failures: list[PairFailure] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BatchError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            record = PairRecord(
                model_id=entry["model_id"],
                category=entry.get("category", ""),
                direction=entry["direction"],
                generated_path=entry["generated_path"],
                reference_path=entry["reference_path"],
                subject_id=entry.get("subject_id", ""),
            )
            if "error" in entry:
                failures.append(PairFailure(record=record, error=entry["error"]))
            else:
                results.append(
                    PairResult(
                        record=record,
                        metrics=m.MetricRecord(
                            psnr_db=_psnr_from_json(entry.get("psnr_db")),
                            ssim=entry.get("ssim"),
                            uqi=entry.get("uqi"),
                            vif=entry.get("vif"),
                        ),
                    )
                )
    if not results and not failures:
        raise BatchError(f"results file is empty: {path}")
    return results, failures


# --- report rendering -------------------------------------------------------

_FORMATS = ("markdown", "csv", "json")


def _fmt(value: float | None, decimals: int) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


def _cell(avg: float | None, std: float | None, decimals: int) -> str:
    if avg is None:
        return "-"
    return f"{_fmt(avg, decimals)} ±{_fmt(std, decimals)}"


def render_report(rows: list[AggregateRow], fmt: str = "markdown") -> bytes:
    """Render aggregate rows as a UTF-8 report.

    markdown and csv round values (2 decimals for PSNR/SSIM/UQI, 3 for VIF);
    json carries full precision and round-trips exactly.
    """
    if not rows:
        raise BatchError("no rows to render")
    if fmt not in _FORMATS:
        raise BatchError(f"unknown format {fmt!r} (expected one of {', '.join(_FORMATS)})")
    if fmt == "json":
        payload = [
            {
                "model_id": r.model_id,
                "direction": r.direction,
                "n_pairs": r.n_pairs,
                "psnr_avg": r.psnr_avg,
                "psnr_std": r.psnr_std,
                "psnr_infinite": r.psnr_infinite,
                "ssim_avg": r.ssim_avg,
                "ssim_std": r.ssim_std,
                "uqi_avg": r.uqi_avg,
                "uqi_std": r.uqi_std,
                "vif_avg": r.vif_avg,
                "vif_std": r.vif_std,
            }
            for r in rows
        ]
        return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "csv":
        lines = [
            "model_id,direction,n_pairs,psnr_avg,psnr_std,psnr_infinite,"
            "ssim_avg,ssim_std,uqi_avg,uqi_std,vif_avg,vif_std"
        ]
        for r in rows:
            lines.append(
                ",".join(
                    [
                        r.model_id,
                        r.direction,
                        str(r.n_pairs),
                        _fmt(r.psnr_avg, 2),
                        _fmt(r.psnr_std, 2),
                        str(r.psnr_infinite),
                        _fmt(r.ssim_avg, 2),
                        _fmt(r.ssim_std, 2),
                        _fmt(r.uqi_avg, 2),
                        _fmt(r.uqi_std, 2),
                        _fmt(r.vif_avg, 3),
                        _fmt(r.vif_std, 3),
                    ]
                )
            )
        return ("\n".join(lines) + "\n").encode("utf-8")
    # markdown: one table per direction
    out: list[str] = []
    directions = sorted({r.direction for r in rows})
    for direction in directions:
        out.append(f"## {direction}")
        out.append("")
        out.append("| Model | PSNR avg±std | SSIM avg±std | UQI avg±std | VIF avg±std |")
        out.append("| --- | --- | --- | --- | --- |")
        excluded = 0
        for r in rows:
            if r.direction != direction:
                continue
            out.append(
                "| {} | {} | {} | {} | {} |".format(
                    r.model_id,
                    _cell(r.psnr_avg, r.psnr_std, 2),
                    _cell(r.ssim_avg, r.ssim_std, 2),
                    _cell(r.uqi_avg, r.uqi_std, 2),
                    _cell(r.vif_avg, r.vif_std, 3),
                )
            )
            excluded += r.psnr_infinite
        if excluded:
            out.append("")
            out.append(
                f"{excluded} pair(s) with infinite PSNR excluded from PSNR statistics."
            )
        out.append("")
    return ("\n".join(out)).encode("utf-8")
