"""Scene generation: determinism, geometry, bounds, dataset materialization."""

from __future__ import annotations

import numpy as np
import pytest

from occam.datasets import (
    BACKGROUND,
    PALETTE,
    GenerationParams,
    SceneDescriptor,
    SceneObject,
    footprint_area,
    generate_scene,
    load_scenes,
    make_class_weights,
    make_scene,
    object_mask,
    rasterize_object,
    render_scene,
    shape_membership,
    write_scene_dataset,
)
from occam.io import encode_png_rgb, load_manifest


def test_same_seed_same_bytes():
    desc_a, rec_a = make_scene(42)
    desc_b, rec_b = make_scene(42)
    assert desc_a == desc_b
    assert encode_png_rgb(rec_a.pixels) == encode_png_rgb(rec_b.pixels)


def test_footprints_are_disjoint_and_in_bounds():
    for seed in range(30):
        desc, record = make_scene(seed)
        total = np.zeros((desc.height, desc.width), dtype=int)
        for descriptor in desc.descriptors:
            bits = object_mask(desc, descriptor).bits
            total += bits.astype(int)
        assert total.max() <= 1  # pairwise disjoint


def test_zero_object_scene_is_background_only():
    params = GenerationParams(min_objects=0, max_objects=0)
    desc, record = make_scene(5, params)
    assert desc.objects == ()
    assert (record.pixels == np.asarray(BACKGROUND, dtype=np.uint8)).all()
    assert record.gt_class is None


def test_shape_membership_geometry():
    # triangle area is exactly size^2; square is size^2; circle is counted
    for size in (2, 4, 7):
        assert shape_membership("triangle", size).sum() == size * size
        assert shape_membership("square", size).sum() == size * size
    circle = shape_membership("circle", 2)
    assert circle.shape == (5, 5)
    assert circle.sum() == 13
    assert not circle[0, 0]  # corners stay out


def test_rasterize_respects_canvas_bounds():
    obj = SceneObject(shape="square", color_name="red", row=60, col=60, size=8)
    with pytest.raises(ValueError):
        rasterize_object(obj, 64, 64)


def test_footprint_area_matches_rasterization():
    for shape in ("circle", "square", "triangle"):
        for size in (3, 5, 8):
            obj = SceneObject(shape=shape, color_name="blue", row=0, col=0, size=size)
            assert footprint_area(obj) == shape_membership(shape, size).sum()


def test_descriptor_uniqueness_enforced():
    names, weights = make_class_weights(0)
    obj = SceneObject(shape="circle", color_name="red", row=0, col=0, size=3)
    with pytest.raises(ValueError):
        SceneDescriptor(
            seed=0, height=32, width=32, background=BACKGROUND,
            objects=(obj, obj), class_names=names, class_weights=weights,
        )


def test_scene_json_round_trip():
    desc, _ = make_scene(11)
    again = SceneDescriptor.from_dict(desc.to_dict())
    assert again == desc


def test_render_matches_descriptor_colors():
    desc, record = make_scene(9)
    for obj in desc.objects:
        bits = object_mask(desc, obj.descriptor_text).bits
        assert (record.pixels[bits] == np.asarray(PALETTE[obj.color_name])).all()


def test_write_scene_dataset_layout(tmp_path):
    manifest_path, world_path = write_scene_dataset(tmp_path / "d", n_scenes=5, seed=3)
    manifest = load_manifest(manifest_path)
    assert len(manifest) == 5
    scenes = load_scenes(tmp_path / "d" / "scenes.json")
    assert set(scenes) == {e.image_id for e in manifest.entries}
    for entry in manifest.entries:
        image = manifest.load_image(entry)
        assert entry.gt_class is not None
        assert image.gt_masks is not None
        # gt masks in the manifest equal the analytic footprints
        desc = scenes[entry.image_id]
        for descriptor in desc.descriptors:
            assert np.array_equal(
                image.gt_masks[descriptor].bits, object_mask(desc, descriptor).bits
            )


def test_write_scene_dataset_is_reproducible(tmp_path):
    p1, _ = write_scene_dataset(tmp_path / "a", n_scenes=4, seed=8)
    p2, _ = write_scene_dataset(tmp_path / "b", n_scenes=4, seed=8)
    assert p1.read_text() == p2.read_text()
    for rel in ("images/scene-0000.png", "scenes.json", "world.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_all_scenes_share_one_weight_table(tmp_path):
    manifest_path, world_path = write_scene_dataset(tmp_path / "d", n_scenes=6, seed=1)
    scenes = load_scenes(tmp_path / "d" / "scenes.json")
    tables = {tuple(sorted((c, tuple(sorted(w.items()))) for c, w in s.class_weights.items()))
              for s in scenes.values()}
    assert len(tables) == 1
