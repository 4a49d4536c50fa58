"""Intervention pipeline: oracle equivalence, filtering, counters,
persistence, and determinism."""

from __future__ import annotations

import numpy as np
import pytest

from occam.backends import OperatorSuite, SyntheticSuite, build_suite, OperatorEndpoint
from occam.datasets import (
    GenerationParams,
    classify_descriptor,
    generate_scene,
    load_scenes,
    make_scene,
    write_scene_dataset,
)
from occam.engine import (
    ConceptInterventionExplainer,
    RunCounters,
    run_dataset,
    run_image,
)
from occam.errors import GroundingFailure
from occam.io import load_manifest, read_png_rgb
from occam.types import BinaryMask, ImageRecord, RunConfig, ScoreVector


def synthetic_setup(tmp_path, n_scenes=12, seed=0, params=GenerationParams()):
    data_dir = tmp_path / "data"
    manifest_path, world_path = write_scene_dataset(
        data_dir, n_scenes, seed=seed, params=params
    )
    suite = build_suite(OperatorEndpoint(kind="synthetic", locator=str(world_path)))
    return manifest_path, world_path, suite


class StubSuite(OperatorSuite):
    """Tiny hand-scripted backend: proposes a fixed list, grounds only
    'net', and classifies by whether the pixels were touched."""

    def __init__(self, original_pixels):
        self.original = np.array(original_pixels, copy=True)
        self.proposals = ["Net", "net ", "sand", "  "]

    def propose_concepts(self, image):
        return list(self.proposals)

    def ground_concept(self, image, concept):
        if concept.normalized_text == "net":
            bits = np.zeros((image.height, image.width), dtype=bool)
            bits[:2, :2] = True
            return BinaryMask.from_array(bits)
        raise GroundingFailure(f"cannot ground {concept.normalized_text!r}")

    def remove_region(self, image, mask):
        out = np.array(image.pixels, copy=True)
        out[mask.bits] = 0
        return out

    def classify(self, image):
        untouched = np.array_equal(image.pixels, self.original)
        scores = [0.8, 0.2] if untouched else [0.6, 0.4]
        return ScoreVector(
            scores=np.asarray(scores), class_names=("class_x", "class_y")
        )

    def embed_text(self, text):
        return np.asarray([1.0, 0.0])


def stub_image():
    pixels = np.full((8, 8, 3), 100, dtype=np.uint8)
    return ImageRecord(image_id="img-0", pixels=pixels)


# --- per-image flow --------------------------------------------------------


def test_dedup_grounding_and_counters_with_stub():
    image = stub_image()
    suite = StubSuite(image.pixels)
    outcome, counters = run_image(image, RunConfig(run_id="t"), suite)

    assert outcome.status == "ok"
    assert [r.concept.normalized_text for r in outcome.records] == ["net"]
    reasons = {(d.concept_raw, d.reason) for d in outcome.discarded}
    assert ("net ", "duplicate") in reasons
    assert ("sand", "grounding-failure") in reasons
    assert ("  ", "empty-concept") in reasons

    assert counters.proposed_raw == 4
    assert counters.proposed == 2  # net + sand
    assert counters.grounded == 1
    assert counters.grounding_failures == 1
    assert counters.grounded + counters.grounding_failures == counters.proposed
    assert counters.edited == counters.scored == 1


def test_record_arithmetic_with_stub():
    image = stub_image()
    outcome, _ = run_image(image, RunConfig(run_id="t"), StubSuite(image.pixels))
    (record,) = outcome.records
    assert record.predicted_class_name == "class_x"
    assert record.original_confidence == 0.8
    assert record.post_confidence == 0.6
    assert record.contribution == pytest.approx(0.2)
    assert record.confidence_drop_pct == pytest.approx(25.0, abs=1e-6)
    assert record.mask_area_pct == pytest.approx(100 * 4 / 64)


def test_empty_proposals_is_a_clean_outcome():
    image = stub_image()
    suite = StubSuite(image.pixels)
    suite.proposals = []
    outcome, counters = run_image(image, RunConfig(run_id="t"), suite)
    assert outcome.status == "ok"
    assert outcome.records == ()
    assert outcome.discarded == ()
    assert counters.proposed == counters.proposed_raw == 0


def test_classifier_failure_fails_the_image():
    image = stub_image()
    suite = StubSuite(image.pixels)

    def boom(_image):
        raise RuntimeError("no classifier today")

    suite.classify = boom
    outcome, counters = run_image(image, RunConfig(run_id="t"), suite)
    assert outcome.status == "failed"
    assert "classification failed" in outcome.failure_reason
    assert counters.images_failed == 1


# --- oracle equivalence ----------------------------------------------------


def test_pipeline_matches_descriptor_oracle(tmp_path):
    manifest_path, world_path, suite = synthetic_setup(tmp_path, n_scenes=20)
    scenes = load_scenes(manifest_path.parent / "scenes.json")
    result = run_dataset(manifest_path, RunConfig(run_id="oracle"), suite)

    checked = 0
    for outcome in result.outcomes:
        assert outcome.status == "ok"
        desc = scenes[outcome.image_id]
        assert len(outcome.records) == len(desc.objects)
        for record in outcome.records:
            before = classify_descriptor(desc)
            top = before.argmax_index()
            after = classify_descriptor(desc, exclude={record.concept.normalized_text})
            want = before.score_for(top) - after.score_for(top)
            assert abs(record.contribution - want) <= 1e-9
            checked += 1
    assert checked > 0


def test_post_confidence_read_at_original_argmax():
    # seed 0 flips its argmax when 'orange circle' is removed
    desc, image = make_scene(0)
    sv = classify_descriptor(desc)
    top = sv.argmax_index()
    after = classify_descriptor(desc, exclude={"orange circle"})
    assert after.argmax_index() != top  # the flip this test depends on

    suite = SyntheticSuite(desc.class_names, desc.class_weights)
    outcome, _ = run_image(image, RunConfig(run_id="flip"), suite)
    record = next(
        r for r in outcome.records if r.concept.normalized_text == "orange circle"
    )
    assert record.post_confidence == pytest.approx(after.score_for(top), abs=1e-12)
    assert record.post_confidence != pytest.approx(
        after.score_for(after.argmax_index()), abs=1e-12
    )


# --- filtering -------------------------------------------------------------


def test_area_exclusion_discards_near_full_masks():
    desc, image = make_scene(3)

    class NearFullGrounder(SyntheticSuite):
        def propose_concepts(self, image):
            return super().propose_concepts(image) + ["everything"]

        def ground_concept(self, image, concept):
            if concept.normalized_text == "everything":
                bits = np.ones((image.height, image.width), dtype=bool)
                bits[0, 0] = False  # 99.97% of the canvas
                return BinaryMask.from_array(bits)
            return super().ground_concept(image, concept)

    suite = NearFullGrounder(desc.class_names, desc.class_weights)
    outcome, counters = run_image(image, RunConfig(run_id="area"), suite)
    assert all(r.concept.normalized_text != "everything" for r in outcome.records)
    excluded = [d for d in outcome.discarded if d.reason == "area-excluded"]
    assert len(excluded) == 1 and excluded[0].concept == "everything"
    assert counters.area_excluded == 1
    assert all(r.mask_area_pct < 99.0 for r in outcome.records)


def test_area_exclusion_threshold_is_inclusive():
    image = stub_image()

    class FullMaskSuite(StubSuite):
        def ground_concept(self, img, concept):
            if concept.normalized_text == "net":
                return BinaryMask.from_array(np.ones((8, 8), dtype=bool))
            raise GroundingFailure("nope")

    outcome, counters = run_image(
        image, RunConfig(run_id="t"), FullMaskSuite(image.pixels)
    )
    assert outcome.records == ()
    assert counters.area_excluded == 1  # exactly 100% >= 99%


# --- dataset runs ----------------------------------------------------------


def test_artifacts_and_one_at_a_time_invariant(tmp_path):
    manifest_path, world_path, suite = synthetic_setup(tmp_path, n_scenes=6)
    out_root = tmp_path / "runs"
    result = run_dataset(
        manifest_path, RunConfig(run_id="r1"), suite, output_root=out_root
    )
    run_dir = out_root / "r1"
    assert (run_dir / "manifest.json").is_file()
    for outcome in result.outcomes:
        original = read_png_rgb(run_dir / outcome.image_id / "original.png")
        for record in outcome.records:
            mask = run_dir / record.mask_ref
            edited_path = run_dir / record.edited_image_ref
            assert mask.is_file() and edited_path.is_file()
            edited = read_png_rgb(edited_path)
            from occam.io import read_png_mask

            bits = read_png_mask(mask).bits
            # the edit touched nothing outside its own mask
            assert np.array_equal(edited[~bits], original[~bits])
            assert not np.array_equal(edited[bits], original[bits])


def test_worker_count_does_not_change_bytes(tmp_path):
    manifest_path, world_path, _ = synthetic_setup(tmp_path, n_scenes=10)
    results = {}
    for workers in (1, 4):
        suite = build_suite(OperatorEndpoint(kind="synthetic", locator=str(world_path)))
        out_root = tmp_path / f"w{workers}"
        run_dataset(
            manifest_path,
            RunConfig(run_id="same"),
            suite,
            output_root=out_root,
            workers=workers,
        )
        results[workers] = (out_root / "same" / "manifest.json").read_bytes()
    assert results[1] == results[4]


def test_records_ordered_by_image_then_concept(tmp_path):
    manifest_path, _, suite = synthetic_setup(tmp_path, n_scenes=8)
    result = run_dataset(manifest_path, RunConfig(run_id="ord"), suite, workers=3)
    ids = [o.image_id for o in result.outcomes]
    assert ids == sorted(ids)
    for outcome in result.outcomes:
        texts = [r.concept.normalized_text for r in outcome.records]
        assert texts == sorted(texts)


def test_missing_image_recorded_not_fatal(tmp_path):
    manifest_path, world_path, suite = synthetic_setup(tmp_path, n_scenes=4)
    # break one referenced PNG
    doc = load_manifest(manifest_path)
    victim = doc.entries[1]
    (manifest_path.parent / victim.image_path).unlink()
    result = run_dataset(manifest_path, RunConfig(run_id="r"), suite)
    by_id = {o.image_id: o for o in result.outcomes}
    assert by_id[victim.image_id].status == "failed"
    assert "image load failed" in by_id[victim.image_id].failure_reason
    assert result.counters.images_failed == 1
    assert result.counters.images_ok == 3
    assert not result.degraded


def test_majority_failures_mark_run_degraded(tmp_path):
    manifest_path, world_path, suite = synthetic_setup(tmp_path, n_scenes=4)
    doc = load_manifest(manifest_path)
    for entry in doc.entries[:3]:
        (manifest_path.parent / entry.image_path).unlink()
    result = run_dataset(manifest_path, RunConfig(run_id="r"), suite)
    assert result.counters.images_failed == 3
    assert result.degraded


def test_counter_invariant_is_enforced():
    with pytest.raises(ValueError):
        RunCounters(proposed=3, grounded=1, grounding_failures=1)


def test_run_result_round_trips_through_json(tmp_path):
    manifest_path, _, suite = synthetic_setup(tmp_path, n_scenes=5)
    out_root = tmp_path / "runs"
    result = run_dataset(
        manifest_path, RunConfig(run_id="rt"), suite, output_root=out_root
    )
    from occam.engine import load_run_result

    loaded = load_run_result(out_root / "rt")
    assert loaded.to_dict() == result.to_dict()


# --- estimator facade ------------------------------------------------------


def test_explainer_fit_transform_predict(tmp_path):
    manifest_path, world_path, suite = synthetic_setup(tmp_path, n_scenes=6)
    explainer = ConceptInterventionExplainer(suite=suite, run_id="est")
    fitted = explainer.fit(manifest_path)
    assert fitted is explainer
    features = explainer.transform()
    assert features.shape == (6, 4)
    assert (features[:, 0] <= features[:, 1]).all()  # adp <= mdp rowwise
    predictions = explainer.predict()
    assert len(predictions) == 6
    scenes = load_scenes(manifest_path.parent / "scenes.json")
    manifest = load_manifest(manifest_path)
    for entry, predicted in zip(manifest.entries, predictions):
        assert predicted == entry.gt_class  # synthetic gt is the model's argmax


def test_explainer_params_round_trip():
    explainer = ConceptInterventionExplainer(area_exclusion_pct=95.0, workers=2)
    params = explainer.get_params()
    assert params["area_exclusion_pct"] == 95.0
    clone = ConceptInterventionExplainer(**params)
    assert clone.get_params() == params
    explainer.set_params(workers=5)
    assert explainer.workers == 5


def test_explainer_requires_suite(tmp_path):
    with pytest.raises(ValueError):
        ConceptInterventionExplainer().fit("whatever.json")
