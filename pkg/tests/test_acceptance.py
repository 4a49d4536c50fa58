"""Release gate: one test per shipped guarantee.

Each test exercises a public guarantee end to end against independent
reference computations and prints exactly one ``PASS`` line (with the
measured evidence) once every assertion holds.  Run with ``pytest -v
tests/test_acceptance.py`` to see one line per guarantee.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from occam.backends import SyntheticSuite
from occam.datasets import load_scenes, oracle_contribution, write_scene_dataset
from occam.engine import run_dataset
from occam.evaluate import write_metrics_report
from occam.metrics import (
    ActivationMap,
    aggregate_image,
    confidence_drop_pct,
    epg,
    logit,
    logit_delta,
    mask_area_pct,
    mask_to_activation,
    nra,
    pct_logit_drop,
)
from occam.ontology import (
    RANKINGS,
    build_graph,
    check_consistency,
    class_concept_stats,
    concept_cooccurrence,
    export_turtle,
    import_turtle,
    top_k_concepts,
)
from occam.reporting import progressive_ablation
from occam.types import BinaryMask, RunConfig

from factories import make_record
from oracles import epg_reference, nra_all_masks_oracle

RNG_SALT = 20240901


def _report(criterion: str, detail: str) -> None:
    print(f"[acceptance] {criterion}: PASS ({detail})")


def _suite_for(world_path: Path) -> SyntheticSuite:
    return SyntheticSuite.from_world_file(str(world_path))


def _run(manifest_path, world_path, run_id, seed=0, workers=1, output_root=None):
    config = RunConfig(run_id=run_id, rng_seed=seed)
    return run_dataset(
        manifest_path,
        config,
        _suite_for(world_path),
        output_root=output_root,
        workers=workers,
    )


# --- 1: pipeline contributions match the closed-form world oracle ----------


def test_contributions_match_closed_form_oracle(tmp_path):
    manifest_path, world_path = write_scene_dataset(
        tmp_path / "scenes", n_scenes=100, seed=101
    )
    scenes = load_scenes(tmp_path / "scenes" / "scenes.json")

    start = time.monotonic()
    result = _run(manifest_path, world_path, "oracle-eq", seed=101)
    elapsed = time.monotonic() - start

    assert result.counters.images_ok == 100
    worst = 0.0
    n_checked = 0
    for outcome in result.outcomes:
        desc = scenes[outcome.image_id]
        assert len(outcome.records) == len(desc.objects)
        for record in outcome.records:
            expected = oracle_contribution(desc, record.concept.normalized_text)
            worst = max(worst, abs(record.contribution - expected))
            n_checked += 1
    assert worst <= 1e-9
    assert elapsed < 60.0
    _report(
        "oracle equivalence",
        f"{n_checked} contributions over 100 scenes, max |delta| = "
        f"{worst:.3e}, run took {elapsed:.1f}s",
    )


# --- 2: causal metric formulas and aggregate ordering ----------------------


def test_metric_unit_cases_and_aggregate_ordering():
    full = BinaryMask(bits=np.ones((8, 8), dtype=bool))
    empty = BinaryMask(bits=np.zeros((8, 8), dtype=bool))
    quarter_bits = np.zeros((8, 8), dtype=bool)
    quarter_bits[:4, :4] = True
    assert mask_area_pct(full) == 100.0
    assert mask_area_pct(empty) == 0.0
    assert mask_area_pct(BinaryMask(bits=quarter_bits)) == 25.0

    assert confidence_drop_pct(0.8, 0.4) == pytest.approx(50.0, abs=1e-6)
    assert confidence_drop_pct(0.4, 0.8) == 0.0
    assert confidence_drop_pct(0.0, 0.0) == 0.0

    assert logit_delta(0.5, 0.5) == 0.0
    assert logit_delta(0.8, 0.2) == pytest.approx(-2.772589, abs=1e-5)
    assert logit(1.0) == logit(1.0 - 1e-6)

    assert pct_logit_drop(0.7, 0.7) == 0.0
    assert pct_logit_drop(0.8, 0.5) == pytest.approx(100.0, abs=1e-4)
    assert pct_logit_drop(0.5, 0.8) == 0.0

    recs = [
        make_record("r", "img", "a", s=0.9, s_i=0.9 * (1 - 0.10 / (1 - 1e-8 / 0.9))),
        make_record("r", "img", "b", s=0.9, s_i=0.9 * (1 - 0.30 / (1 - 1e-8 / 0.9))),
    ]
    single = aggregate_image(recs[:1])
    assert single.adp == single.mdp == recs[0].confidence_drop_pct

    rng = np.random.default_rng([RNG_SALT, 2])
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        records = []
        for j in range(n):
            s = float(rng.uniform(0.05, 0.999))
            s_i = float(rng.uniform(0.001, 0.999))
            records.append(make_record("r", "img", f"c{j}", s=s, s_i=s_i))
        agg = aggregate_image(records)
        assert agg.adp <= agg.mdp
        assert agg.mdp == max(r.confidence_drop_pct for r in records)
        assert agg.mad == max(abs(r.logit_delta) for r in records)
        checked += 1
    _report(
        "metric formulas",
        f"unit cases exact; adp <= mdp held on {checked} random record sets",
    )


# --- 3: region-accuracy score against brute-force enumeration --------------


def test_region_accuracy_against_brute_force():
    rng = np.random.default_rng([RNG_SALT, 3])

    # (a) the map that IS the ground truth scores 1
    worst_ideal = 0.0
    for _ in range(50):
        size = int(rng.integers(1, 256))
        flat = np.zeros(256, dtype=bool)
        flat[rng.choice(256, size=size, replace=False)] = True
        gt = BinaryMask(bits=flat.reshape(16, 16))
        value = nra(mask_to_activation(gt), gt)
        worst_ideal = max(worst_ideal, abs(value - 1.0))
    assert worst_ideal <= 1e-9

    # (b) every 4x4 mask x 20 random maps vs. the exhaustive oracle
    worst_oracle = 0.0
    n_pairs = 0
    for _ in range(20):
        values = rng.random((4, 4))
        amap = ActivationMap(values=values)
        expected = nra_all_masks_oracle(values)
        for code, want in expected.items():
            flat = np.array([(code >> i) & 1 for i in range(16)], dtype=bool)
            got = nra(amap, BinaryMask(bits=flat.reshape(4, 4)))
            worst_oracle = max(worst_oracle, abs(got - want))
            n_pairs += 1
        assert worst_oracle <= 1e-9
    assert n_pairs == 20 * (2**16 - 2)

    # (c) random maps carry no localization signal: mean near 0
    flat = np.zeros(256, dtype=bool)
    flat[rng.choice(256, size=64, replace=False)] = True
    gt = BinaryMask(bits=flat.reshape(16, 16))
    values = [
        nra(ActivationMap(values=rng.random((16, 16))), gt) for _ in range(1000)
    ]
    mean = math.fsum(values) / len(values)
    assert abs(mean) <= 0.05
    _report(
        "region accuracy",
        f"ideal = 1 on 50 masks (max err {worst_ideal:.1e}); "
        f"{n_pairs} exhaustive-oracle pairs max err {worst_oracle:.1e}; "
        f"random-map mean {mean:+.4f}",
    )


# --- 4: energy pointing score against a pixel-summing oracle ---------------


def test_energy_pointing_against_pixel_sums():
    rng = np.random.default_rng([RNG_SALT, 4])

    for _ in range(20):
        flat = np.zeros(64, dtype=bool)
        flat[rng.choice(64, size=int(rng.integers(1, 64)), replace=False)] = True
        gt = BinaryMask(bits=flat.reshape(8, 8))
        assert epg(mask_to_activation(gt), gt) == 1.0

    const = ActivationMap(values=np.full((8, 8), 0.37))
    any_gt = np.zeros((8, 8), dtype=bool)
    any_gt[2:5, 2:5] = True
    assert epg(const, BinaryMask(bits=any_gt)) == 0.0

    worst = 0.0
    for _ in range(50):
        values = rng.random((8, 8))
        flat = np.zeros(64, dtype=bool)
        flat[rng.choice(64, size=int(rng.integers(1, 65)), replace=False)] = True
        gt = BinaryMask(bits=flat.reshape(8, 8))
        got = epg(ActivationMap(values=values), gt)
        worst = max(worst, abs(got - epg_reference(values, gt.bits)))
    assert worst <= 1e-12
    _report(
        "energy pointing",
        f"containment = 1, constant map = 0; 50 random instances vs "
        f"pixel-sum oracle, max err {worst:.1e}",
    )


# --- 5: near-full masks never become evidence ------------------------------


class _NearFullGrounder(SyntheticSuite):
    """Grounds every concept to a mask covering at least 99% of the canvas."""

    def __init__(self, *args, rng_seed: int = 0, **kwargs):
        super().__init__(*args, **kwargs)
        self._rng = np.random.default_rng([rng_seed, 5])
        self.areas_served: list[float] = []

    def ground_concept(self, image, concept):
        total = image.height * image.width
        minimum = math.ceil(0.99 * total)
        size = int(self._rng.integers(minimum, total + 1))
        flat = np.zeros(total, dtype=bool)
        flat[self._rng.choice(total, size=size, replace=False)] = True
        mask = BinaryMask(bits=flat.reshape(image.height, image.width))
        self.areas_served.append(mask_area_pct(mask))
        return mask


def test_near_full_masks_are_excluded_not_scored(tmp_path):
    manifest_path, world_path = write_scene_dataset(
        tmp_path / "scenes", n_scenes=20, seed=55
    )
    base = SyntheticSuite.from_world_file(str(world_path))
    suite = _NearFullGrounder(
        base.class_names, base.class_weights, rng_seed=55
    )
    result = run_dataset(manifest_path, RunConfig(run_id="excl"), suite)

    assert result.counters.images_ok == 20
    assert suite.areas_served, "grounder was never exercised"
    assert min(suite.areas_served) >= 99.0
    n_discarded = 0
    for outcome in result.outcomes:
        assert outcome.records == ()
        assert outcome.discarded, outcome.image_id
        for discarded in outcome.discarded:
            assert discarded.reason == "area-excluded"
            n_discarded += 1
    _report(
        "area exclusion",
        f"{n_discarded} concepts across 20 scenes served masks covering "
        f">= {min(suite.areas_served):.2f}%; zero evidence records",
    )


# --- 6: ontology round-trip and consistency checking -----------------------


def _fresh_graph(manifest_path, world_path):
    return build_graph(_run(manifest_path, world_path, "onto", seed=6))


def test_ontology_round_trip_and_violation_detection(tmp_path):
    manifest_path, world_path = write_scene_dataset(
        tmp_path / "scenes", n_scenes=10, seed=66
    )
    graph = _fresh_graph(manifest_path, world_path)
    assert check_consistency(graph) == []

    text = export_turtle(graph)
    restored = import_turtle(text)
    assert export_turtle(restored) == text

    classes = sorted(nid for kind, nid in graph.nodes if kind == "class")
    assert classes
    n_queries = 0
    for class_name in classes:
        assert class_concept_stats(restored, class_name) == \
            class_concept_stats(graph, class_name)
        assert concept_cooccurrence(restored, class_name) == \
            concept_cooccurrence(graph, class_name)
        for ranking in RANKINGS:
            assert top_k_concepts(restored, class_name, 3, ranking) == \
                top_k_concepts(graph, class_name, 3, ranking)
        n_queries += 2 + len(RANKINGS)

    def evidence_node(g):
        return sorted(nid for kind, nid in g.nodes if kind == "evidence")[0]

    def concepts_of(g):
        return sorted(nid for kind, nid in g.nodes if kind == "concept")

    flagged = []

    g = _fresh_graph(manifest_path, world_path)
    g.nodes[("evidence", evidence_node(g))]["mask_ref"] = ""
    flagged.append({v.kind for v in check_consistency(g)})
    assert "artifact-typing" in flagged[-1]

    g = _fresh_graph(manifest_path, world_path)
    g.add_edge("concept-associated-to-image", ("concept", concepts_of(g)[0]),
               ("image", "no-such-image"))
    flagged.append({v.kind for v in check_consistency(g)})
    assert "dangling-endpoint" in flagged[-1]

    g = _fresh_graph(manifest_path, world_path)
    g.add_edge("evidence-of-image", ("evidence", evidence_node(g)),
               ("class", classes[0]))
    flagged.append({v.kind for v in check_consistency(g)})
    assert "domain-range" in flagged[-1]

    g = _fresh_graph(manifest_path, world_path)
    eid = evidence_node(g)
    current = next(o for _, o in
                   [(e.predicate, e.object) for e in g.edges
                    if e.subject == ("evidence", eid)
                    and e.predicate == "evidence-of-concept"])
    other = next(c for c in concepts_of(g) if c != current[1])
    g.add_edge("evidence-of-concept", ("evidence", eid), ("concept", other))
    flagged.append({v.kind for v in check_consistency(g)})
    assert "evidence-cardinality" in flagged[-1]

    g = _fresh_graph(manifest_path, world_path)
    image = sorted(nid for kind, nid in g.nodes if kind == "image"
                   and not g.nodes[(kind, nid)].get("edited"))[0]
    g.edges = {e for e in g.edges
               if not (e.predicate == "image-predicted-as-class"
                       and e.subject == ("image", image))}
    flagged.append({v.kind for v in check_consistency(g)})
    assert "image-class-cardinality" in flagged[-1]

    _report(
        "ontology round-trip",
        f"turtle re-export byte-identical; {n_queries} queries equal on "
        f"the restored graph; all 5 injected violation types flagged",
    )


# --- 7: removing influential concepts degrades accuracy monotonically ------


def test_progressive_ablation_is_monotone_non_increasing(tmp_path):
    manifest_path, world_path = write_scene_dataset(
        tmp_path / "scenes", n_scenes=200, seed=7
    )
    result = _run(manifest_path, world_path, "abl", seed=7)
    assert result.counters.images_ok == 200
    graph = build_graph(result)

    points = progressive_ablation(
        str(manifest_path),
        _suite_for(world_path),
        graph,
        ks=(0, 1, 2, 3),
        classifier_id="synthetic",
    )
    curve = [p.accuracy for p in points]
    assert [p.k for p in points] == [0, 1, 2, 3]
    assert all(p.n_images == 200 for p in points)
    for earlier, later in zip(curve, curve[1:]):
        assert later <= earlier + 0.02
    _report(
        "ablation trend",
        "accuracy at k=0..3 = ["
        + ", ".join(f"{a:.3f}" for a in curve)
        + "] over 200 scenes, monotone within 0.02",
    )


# --- 8: worker count never changes any produced byte -----------------------


def test_runs_are_byte_identical_across_worker_counts(tmp_path):
    manifest_path, world_path = write_scene_dataset(
        tmp_path / "scenes", n_scenes=12, seed=88
    )
    payloads = {}
    for workers in (1, 8):
        root = tmp_path / f"w{workers}"
        _run(manifest_path, world_path, "det", seed=88, workers=workers,
             output_root=root)
        written = write_metrics_report(
            root / "det",
            out_dir=root / "det" / "reports",
            manifest_path=str(manifest_path),
        )
        files = {"manifest.json": (root / "det" / "manifest.json").read_bytes()}
        for name, path in written.items():
            files[name] = Path(path).read_bytes()
        payloads[workers] = files

    assert set(payloads[1]) == set(payloads[8])
    assert {"manifest.json", "causal", "localization", "summary"} <= set(payloads[1])
    for name in payloads[1]:
        assert payloads[1][name] == payloads[8][name], name
    _report(
        "determinism",
        f"workers 1 vs 8: {len(payloads[1])} artifacts byte-identical "
        "(run manifest + causal/localization/summary reports)",
    )
