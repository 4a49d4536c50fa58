"""Metric unit cases (frozen expected values) and property loops."""

from __future__ import annotations

import math

import numpy as np
import pytest

from occam.backends.embedding import embed_tokens
from occam.errors import UndefinedAggregateError, UndefinedScoreError
from occam.metrics import (
    ActivationMap,
    aggregate_image,
    align_concepts,
    confidence_drop_pct,
    epg,
    hit_rate,
    logit,
    logit_delta,
    mask_area_pct,
    mask_to_activation,
    normalized_importance,
    nra,
    pct_logit_drop,
)
from occam.types import BinaryMask, EvidenceRecord, normalize_concept

from oracles import epg_reference, image_aggregate_reference, nra_reference


def make_mask(bits) -> BinaryMask:
    return BinaryMask.from_array(np.asarray(bits, dtype=bool))


def make_record(
    cdp=0.0, ld=0.0, area=10.0, s=0.8, s_i=0.8, concept="thing", image_id="img"
) -> EvidenceRecord:
    return EvidenceRecord(
        evidence_id="e" * 64,
        image_id=image_id,
        concept=normalize_concept(concept),
        mask_ref="m.png",
        edited_image_ref="x.png",
        predicted_class_index=0,
        predicted_class_name="c0",
        original_confidence=s,
        post_confidence=s_i,
        contribution=s - s_i,
        mask_area_pct=area,
        confidence_drop_pct=cdp,
        logit_delta=ld,
        pct_logit_drop=0.0,
    )


# --- mask area -------------------------------------------------------------


def test_mask_area_full_and_empty():
    assert mask_area_pct(make_mask(np.ones((8, 8)))) == 100.0
    assert mask_area_pct(make_mask(np.zeros((8, 8)))) == 0.0


def test_mask_area_quarter():
    bits = np.zeros((8, 8), dtype=bool)
    bits[:2, :] = True  # 16 of 64
    assert mask_area_pct(make_mask(bits)) == 25.0


# --- confidence drop -------------------------------------------------------


def test_confidence_drop_halved():
    assert confidence_drop_pct(0.8, 0.4, epsilon=1e-8) == pytest.approx(50.0, abs=1e-6)


def test_confidence_drop_clamps_increases_to_zero():
    assert confidence_drop_pct(0.3, 0.9) == 0.0
    assert confidence_drop_pct(0.3, 0.3) == 0.0


def test_confidence_drop_zero_over_zero_guarded():
    assert confidence_drop_pct(0.0, 0.0) == 0.0


def test_confidence_drop_rejects_out_of_range():
    with pytest.raises(ValueError):
        confidence_drop_pct(1.2, 0.5)
    with pytest.raises(ValueError):
        confidence_drop_pct(0.5, -0.1)


# --- log-odds --------------------------------------------------------------


def test_logit_delta_symmetric_point():
    assert logit_delta(0.5, 0.5) == 0.0


def test_logit_delta_frozen_value():
    # ln(1/4) - ln(4) = -2 ln 4
    assert logit_delta(0.8, 0.2) == pytest.approx(-2.772588722239781, abs=1e-5)


def test_logit_clamps_extremes():
    assert logit(1.0) == logit(1.0 - 1e-6)
    assert logit(0.0) == logit(1e-6)
    assert math.isfinite(logit_delta(1.0, 0.0))


def test_pct_logit_drop_no_drop_cases():
    assert pct_logit_drop(0.7, 0.7) == 0.0
    assert pct_logit_drop(0.4, 0.9) == 0.0  # improvement clamps to zero


def test_pct_logit_drop_frozen_value():
    # drop from 0.8 to 0.5 spends exactly all of |l(0.8)|
    assert pct_logit_drop(0.8, 0.5) == pytest.approx(100.0, abs=1e-4)


# --- image aggregates ------------------------------------------------------


def test_aggregate_direct_arithmetic():
    records = [make_record(cdp=10.0), make_record(cdp=30.0), make_record(cdp=50.0)]
    agg = aggregate_image(records)
    assert agg.adp == pytest.approx(30.0)
    assert agg.mdp == 50.0
    assert agg.n_records == 3


def test_aggregate_singleton():
    agg = aggregate_image([make_record(cdp=12.5, ld=-0.25)])
    assert agg.adp == agg.mdp == 12.5
    assert agg.mad == 0.25


def test_aggregate_mad_is_absolute_max():
    agg = aggregate_image([make_record(ld=-2.0), make_record(ld=1.5)])
    assert agg.mad == 2.0


def test_aggregate_empty_is_undefined():
    with pytest.raises(UndefinedAggregateError):
        aggregate_image([])


def test_aggregate_properties_random():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        n = int(rng.integers(1, 8))
        records = [
            make_record(cdp=float(rng.uniform(0, 100)), ld=float(rng.normal(0, 3)))
            for _ in range(n)
        ]
        agg = aggregate_image(records)
        ref_adp, ref_mdp, ref_mad = image_aggregate_reference(
            [r.confidence_drop_pct for r in records], [r.logit_delta for r in records]
        )
        assert agg.adp <= agg.mdp <= 100.0
        assert agg.adp == pytest.approx(ref_adp, abs=1e-12)
        assert agg.mdp == ref_mdp
        assert agg.mad == ref_mad
        # permutation invariance
        shuffled = list(records)
        rng.shuffle(shuffled)
        again = aggregate_image(shuffled)
        assert (again.adp, again.mdp, again.mad) == (agg.adp, agg.mdp, agg.mad)


# --- EPG -------------------------------------------------------------------


def test_epg_perfect_containment():
    bits = np.zeros((6, 6), dtype=bool)
    bits[1:4, 2:5] = True
    gt = make_mask(bits)
    assert epg(mask_to_activation(gt), gt) == 1.0


def test_epg_constant_map_is_zero():
    gt = make_mask(np.eye(5, dtype=bool))
    assert epg(ActivationMap(np.full((5, 5), 3.7)), gt) == 0.0
    # the documented interaction: a full mask lifts to a constant map
    full = make_mask(np.ones((5, 5), dtype=bool))
    assert epg(mask_to_activation(full), full) == 0.0


def test_epg_spec_like_pixel_sum_case():
    values = np.ones((8, 8))
    values[7, 7] = 0.0  # one cold pixel outside gt
    bits = np.zeros((8, 8), dtype=bool)
    bits[:4, :] = True
    got = epg(ActivationMap(values), make_mask(bits))
    assert got == pytest.approx(32 / 63, abs=1e-12)
    assert got == pytest.approx(epg_reference(values, bits), abs=1e-12)


def test_epg_matches_pixel_sum_oracle_random():
    rng = np.random.default_rng(77)
    for _ in range(50):
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        values = rng.uniform(-5, 5, size=(h, w))
        bits = rng.random((h, w)) < 0.4
        got = epg(ActivationMap(values), make_mask(bits))
        assert got == pytest.approx(epg_reference(values, bits), abs=1e-12)
        assert 0.0 <= got <= 1.0


def test_epg_dimension_mismatch():
    with pytest.raises(ValueError):
        epg(ActivationMap(np.ones((3, 3))), make_mask(np.ones((4, 4), dtype=bool)))


# --- NRA -------------------------------------------------------------------


def test_nra_ideal_ranking_is_one():
    rng = np.random.default_rng(5)
    bits = rng.random((10, 10)) < 0.3
    bits[0, 0] = True  # ensure non-empty
    gt = make_mask(bits)
    assert nra(mask_to_activation(gt), gt) == pytest.approx(1.0, abs=1e-9)


def test_nra_frozen_ramp_corner_case():
    values = np.arange(16, dtype=float).reshape(4, 4)
    bits = np.zeros((4, 4), dtype=bool)
    bits[2:, 2:] = True
    got = nra(ActivationMap(values), make_mask(bits))
    assert got == pytest.approx(0.7092450862321781, abs=1e-9)
    assert got == pytest.approx(nra_reference(values, bits), abs=1e-9)


def test_nra_tie_break_is_row_major():
    # constant map: selection order is flat pixel order, so a gt equal to the
    # first pixels is ranked perfectly
    values = np.zeros((4, 4))
    bits = np.zeros((4, 4), dtype=bool)
    bits[0, :2] = True
    assert nra(ActivationMap(values), make_mask(bits)) == pytest.approx(1.0, abs=1e-9)


def test_nra_empty_gt_is_undefined():
    with pytest.raises(UndefinedScoreError):
        nra(ActivationMap(np.ones((4, 4))), make_mask(np.zeros((4, 4), dtype=bool)))


def test_nra_full_gt_is_degenerate():
    with pytest.raises(UndefinedScoreError):
        nra(ActivationMap(np.arange(16.0).reshape(4, 4)),
            make_mask(np.ones((4, 4), dtype=bool)))


def test_nra_matches_exhaustive_reference_random():
    rng = np.random.default_rng(99)
    for _ in range(60):
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        values = rng.normal(size=(h, w))
        bits = rng.random((h, w)) < 0.5
        if not bits.any() or bits.all():
            bits[0, 0] = True
            bits[-1, -1] = False
        got = nra(ActivationMap(values), make_mask(bits))
        assert got == pytest.approx(nra_reference(values, bits), abs=1e-9)
        assert got <= 1.0 + 1e-9


def test_nra_quantized_maps_exercise_ties():
    rng = np.random.default_rng(4242)
    for _ in range(40):
        values = rng.integers(0, 3, size=(6, 6)).astype(float)  # many ties
        bits = rng.random((6, 6)) < 0.4
        if not bits.any() or bits.all():
            bits[2, 3] = True
            bits[0, 0] = False
        got = nra(ActivationMap(values), make_mask(bits))
        assert got == pytest.approx(nra_reference(values, bits), abs=1e-9)


# --- hit rate --------------------------------------------------------------


def test_hit_rate_direct():
    assert hit_rate([0.6, 0.4]) == 0.5
    assert hit_rate([1.0, 1.0, 0.0]) == pytest.approx(2 / 3)


def test_hit_rate_is_strict():
    assert hit_rate([0.5, 0.5, 0.5]) == 0.0


def test_hit_rate_empty_is_undefined():
    with pytest.raises(UndefinedAggregateError):
        hit_rate([])


# --- alignment -------------------------------------------------------------


def test_align_identity_string_wins():
    predicted = [normalize_concept("net"), normalize_concept("sand")]
    pair = align_concepts(predicted, "net", embed_tokens)
    assert pair.predicted_concept.normalized_text == "net"
    assert pair.similarity == pytest.approx(1.0)


def test_align_singleton_returned_regardless():
    predicted = [normalize_concept("volleyball court")]
    pair = align_concepts(predicted, "net", embed_tokens)
    assert pair.predicted_concept.normalized_text == "volleyball court"
    assert pair.similarity == pytest.approx(0.0)


def test_align_tie_keeps_list_order():
    predicted = [normalize_concept("alpha"), normalize_concept("beta")]
    pair = align_concepts(predicted, "gamma", embed_tokens)  # both similarity 0
    assert pair.predicted_concept.normalized_text == "alpha"


def test_align_optional_threshold_filters():
    predicted = [normalize_concept("sand")]
    assert align_concepts(predicted, "net", embed_tokens, min_similarity=0.5) is None
    kept = align_concepts(predicted, "sand", embed_tokens, min_similarity=0.5)
    assert kept is not None and kept.similarity == pytest.approx(1.0)


def test_align_empty_is_an_error():
    with pytest.raises(ValueError):
        align_concepts([], "net", embed_tokens)


# --- normalized importance -------------------------------------------------


def test_normalized_importance_direct():
    assert normalized_importance(make_record(cdp=50.0, area=25.0)) == 2.0


def test_normalized_importance_area_floor():
    assert normalized_importance(make_record(cdp=50.0, area=0.1)) == 100.0
