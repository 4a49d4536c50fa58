"""Hand-built runs and records shared by the graph/report tests."""

from __future__ import annotations

from occam.engine import ImageOutcome, RunCounters, RunResult
from occam.metrics import confidence_drop_pct, logit_delta, pct_logit_drop
from occam.types import EvidenceRecord, RunConfig, evidence_id, normalize_concept


def make_record(run_id, image_id, concept_text, s=0.8, s_i=0.6, area=10.0,
                class_index=0, class_name="class_a"):
    concept = normalize_concept(concept_text)
    eid = evidence_id(run_id, image_id, concept)
    return EvidenceRecord(
        evidence_id=eid,
        image_id=image_id,
        concept=concept,
        mask_ref=f"{image_id}/{eid}.mask.png",
        edited_image_ref=f"{image_id}/{eid}.edited.png",
        predicted_class_index=class_index,
        predicted_class_name=class_name,
        original_confidence=s,
        post_confidence=s_i,
        contribution=s - s_i,
        mask_area_pct=area,
        confidence_drop_pct=confidence_drop_pct(s, s_i),
        logit_delta=logit_delta(s, s_i),
        pct_logit_drop=pct_logit_drop(s, s_i),
    )


def make_run(run_id, image_specs):
    """image_specs: {image_id: (class_name, [(concept, s, s_i), ...])}."""
    class_index = {}
    outcomes = []
    n_records = 0
    for image_id, (class_name, concept_specs) in sorted(image_specs.items()):
        index = class_index.setdefault(class_name, len(class_index))
        records = tuple(
            make_record(run_id, image_id, text, s=s, s_i=s_i,
                        class_index=index, class_name=class_name)
            for text, s, s_i in concept_specs
        )
        n_records += len(records)
        outcomes.append(ImageOutcome(
            image_id=image_id,
            status="ok",
            predicted_class_index=index,
            predicted_class_name=class_name,
            original_confidence=concept_specs[0][1] if concept_specs else 0.5,
            records=records,
        ))
    counters = RunCounters(
        images_total=len(outcomes), images_ok=len(outcomes),
        proposed_raw=n_records, proposed=n_records, grounded=n_records,
        edited=n_records, scored=n_records,
    )
    return RunResult(run_id=run_id, config=RunConfig(run_id=run_id),
                     outcomes=tuple(outcomes), counters=counters)
