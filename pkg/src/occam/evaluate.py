"""Reports over completed runs: causal aggregates and localization scores.

Reads a run directory written by :func:`occam.engine.run_dataset` and emits
CSV/JSON reports with a documented, stable column order.  Floats are
formatted to nine significant digits everywhere, so reports are
byte-reproducible across platforms and worker counts.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .backends.embedding import embed_tokens
from .engine import RunResult, load_run_result
from .errors import UndefinedScoreError
from .formatting import round9, sig9
from .io import DatasetManifest, RunStore, dump_json, load_manifest, read_png_mask
from .metrics import (
    NORMALIZED_IMPORTANCE_FORMULA,
    PCT_LOGIT_DROP_FORMULA,
    aggregate_image,
    align_concepts,
    epg,
    hit_rate,
    mask_to_activation,
    nra,
)

CAUSAL_COLUMNS = ("image_id", "predicted_class", "n_records", "adp", "mdp", "mad")
LOCALIZATION_COLUMNS = (
    "image_id", "gt_label", "concept", "similarity", "epg", "nra",
)

Embedder = Union[Callable[[str], np.ndarray], object]


def causal_rows(result: RunResult) -> list[dict]:
    """One row per successfully classified image, ordered by image id.

    Images whose concepts were all discarded report zero aggregates with
    ``n_records`` 0.
    """
    rows = []
    for outcome in result.outcomes:
        if outcome.status != "ok":
            continue
        if outcome.records:
            agg = aggregate_image(outcome.records)
            adp, mdp, mad, n = agg.adp, agg.mdp, agg.mad, agg.n_records
        else:
            adp = mdp = mad = 0.0
            n = 0
        rows.append({
            "image_id": outcome.image_id,
            "predicted_class": outcome.predicted_class_name,
            "n_records": n,
            "adp": adp,
            "mdp": mdp,
            "mad": mad,
        })
    return rows


def causal_summary(result: RunResult) -> dict:
    """Whole-run aggregates; raises on a run with no processed images."""
    rows = causal_rows(result)
    if not rows:
        raise ValueError("run has no successfully processed images to report")
    scored = [r for r in rows if r["n_records"] > 0]

    def mean_of(key: str) -> Optional[float]:
        if not scored:
            return None
        return math.fsum(r[key] for r in scored) / len(scored)

    return {
        "run_id": result.run_id,
        "n_images": result.counters.images_total,
        "n_ok": result.counters.images_ok,
        "n_failed": result.counters.images_failed,
        "n_scored_images": len(scored),
        "n_records": sum(r["n_records"] for r in rows),
        "mean_adp": mean_of("adp"),
        "mean_mdp": mean_of("mdp"),
        "mean_mad": mean_of("mad"),
        "degraded": result.degraded,
        "formulas": {
            "pct_logit_drop": PCT_LOGIT_DROP_FORMULA,
            "normalized_importance": NORMALIZED_IMPORTANCE_FORMULA,
        },
    }


def localization_rows(
    result: RunResult,
    manifest: DatasetManifest,
    store: RunStore,
    embedder: Embedder = embed_tokens,
    min_similarity: Optional[float] = None,
) -> tuple[list[dict], int]:
    """Score stored masks against ground-truth masks, one row per gt label.

    For every annotated label the most text-similar recorded concept is
    selected; its mask (as a binary activation map) is scored with EPG and
    NRA against the label's mask.  Returns the rows plus the number of
    pairs skipped (degenerate ground truth, below-threshold alignment, or
    unannotated images).
    """
    rows: list[dict] = []
    skipped = 0
    for outcome in result.outcomes:
        if outcome.status != "ok" or not outcome.records:
            continue
        try:
            entry = manifest.entry(outcome.image_id)
        except KeyError:
            skipped += 1
            continue
        if not entry.gt_masks:
            skipped += 1
            continue
        concepts = [record.concept for record in outcome.records]
        by_text = {
            record.concept.normalized_text: record for record in outcome.records
        }
        for gt_label, mask_path in entry.gt_masks:
            pair = align_concepts(concepts, gt_label, embedder, min_similarity)
            if pair is None:
                skipped += 1
                continue
            record = by_text[pair.predicted_concept.normalized_text]
            activation = mask_to_activation(store.load_mask(record.mask_ref))
            gt_mask = read_png_mask(manifest.base_dir / mask_path)
            try:
                nra_score = nra(activation, gt_mask)
            except UndefinedScoreError:
                skipped += 1
                continue
            rows.append({
                "image_id": outcome.image_id,
                "gt_label": gt_label,
                "concept": record.concept.normalized_text,
                "similarity": pair.similarity,
                "epg": epg(activation, gt_mask),
                "nra": nra_score,
            })
    rows.sort(key=lambda r: (r["image_id"], r["gt_label"]))
    return rows, skipped


def localization_summary(rows: list[dict], skipped: int) -> dict:
    """Mean EPG/NRA and the fraction of pairs with NRA above one half."""
    if not rows:
        return {"n_pairs": 0, "n_skipped": skipped,
                "mean_epg": None, "mean_nra": None, "hit_rate": None}
    return {
        "n_pairs": len(rows),
        "n_skipped": skipped,
        "mean_epg": math.fsum(r["epg"] for r in rows) / len(rows),
        "mean_nra": math.fsum(r["nra"] for r in rows) / len(rows),
        "hit_rate": hit_rate([r["nra"] for r in rows]),
    }


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                sig9(row[c]) if isinstance(row[c], float) else row[c]
                for c in columns
            ])


def _round_floats(value):
    if isinstance(value, float):
        return round9(value)
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_round_floats(v) for v in value]
    return value


def write_metrics_report(
    run_dir: Union[str, Path],
    out_dir: Union[str, Path, None] = None,
    manifest_path: Union[str, Path, None] = None,
    embedder: Embedder = embed_tokens,
    min_similarity: Optional[float] = None,
) -> dict[str, Path]:
    """Write causal (and, when ground truth exists, localization) reports.

    Returns the mapping of report name to written path.  The localization
    section is produced only when a dataset manifest with ground-truth
    masks is supplied.
    """
    run_dir = Path(run_dir)
    result = load_run_result(run_dir)
    summary = causal_summary(result)  # raises on an empty run

    out = Path(out_dir) if out_dir is not None else run_dir / "reports"
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    causal_path = out / "causal.csv"
    _write_csv(causal_path, CAUSAL_COLUMNS, causal_rows(result))
    written["causal"] = causal_path

    if manifest_path is not None:
        manifest = load_manifest(manifest_path)
        if any(entry.gt_masks for entry in manifest.entries):
            rows, skipped = localization_rows(
                result, manifest, RunStore(run_dir), embedder, min_similarity
            )
            loc_path = out / "localization.csv"
            _write_csv(loc_path, LOCALIZATION_COLUMNS, rows)
            written["localization"] = loc_path
            summary["localization"] = localization_summary(rows, skipped)

    summary_path = out / "summary.json"
    dump_json(_round_floats(summary), summary_path)
    written["summary"] = summary_path
    return written
