import numpy as np
import pytest

from mtmctrack.core import OcclusionStatus, TrackerConfig
from mtmctrack.state_estimation import count_valid_keypoints, estimate_occlusion
from mtmctrack.synth import ScenarioSpec, generate_scenario, scenario_presets

CFG = TrackerConfig()


def clean_spec(**kw):
    kw.setdefault("num_identities", 4)
    kw.setdefault("frames", 60)
    kw.setdefault("seed", 5)
    kw.setdefault("miss_rate", 0.0)
    kw.setdefault("fp_rate", 0.0)
    kw.setdefault("occlusion_radius_px", 0.0)
    return ScenarioSpec(**kw)


class TestBookkeeping:
    def test_noiseless_detections_match_gt_one_to_one(self):
        data = generate_scenario(clean_spec())
        assert len(data.detections) == len(data.gt_rows)
        det_keys = sorted((d.camera_id, d.frame, i) for d, i in zip(data.detections, data.det_identity))
        gt_keys = sorted((r.camera_id, r.frame, r.identity) for r in data.gt_rows)
        assert det_keys == gt_keys

    def test_degenerate_spec_empty(self):
        assert generate_scenario(clean_spec(num_identities=0)).detections == []
        assert generate_scenario(clean_spec(frames=0)).gt_rows == []

    def test_determinism(self):
        spec = scenario_presets()["occlusion_heavy"]
        a = generate_scenario(spec)
        b = generate_scenario(spec)
        assert len(a.detections) == len(b.detections)
        assert a.det_identity == b.det_identity
        for d1, d2 in zip(a.detections, b.detections):
            assert d1.camera_id == d2.camera_id and d1.frame == d2.frame
            assert d1.bbox == d2.bbox
            assert np.array_equal(d1.embedding, d2.embedding)
            assert np.array_equal(d1.pose.xyc, d2.pose.xyc)
        assert a.gt_rows == b.gt_rows

    def test_bbox_jitter_bounded(self):
        spec = clean_spec(bbox_jitter_sigma=2.0)
        data = generate_scenario(spec)
        gt_lookup = {(r.camera_id, r.frame, r.identity): r.bbox for r in data.gt_rows}
        for d, ident in zip(data.detections, data.det_identity):
            gt_box = gt_lookup[(d.camera_id, d.frame, ident)]
            assert abs(d.bbox.x - gt_box.x) <= 6 * 2.0
            assert abs(d.bbox.y - gt_box.y) <= 6 * 2.0
            assert abs(d.bbox.w - gt_box.w) <= 6 * 1.0
            assert abs(d.bbox.h - gt_box.h) <= 6 * 1.0

    def test_miss_rate_thins_detections(self):
        full = generate_scenario(clean_spec())
        thinned = generate_scenario(clean_spec(miss_rate=0.3))
        assert len(thinned.detections) < len(full.detections)
        assert len(thinned.gt_rows) == len(full.gt_rows)

    def test_false_positives_labeled(self):
        data = generate_scenario(clean_spec(fp_rate=0.5, frames=100))
        n_fp = sum(1 for i in data.det_identity if i == -1)
        assert n_fp > 10
        assert len(data.detections) == len(data.gt_rows) + n_fp


class TestOcclusionModel:
    def crossing_spec(self):
        # Two lanes 50 px apart vertically, walking toward each other: a
        # deterministic crossing with a contiguous partial-occlusion run.
        return ScenarioSpec(
            num_identities=2,
            frames=200,
            layout="lanes",
            turn_rate=0.0,
            speed_min=1.1,
            speed_max=1.3,
            image_h=100,
            occlusion_radius_px=80.0,
            deep_occlusion_frac=0.1,
            miss_rate=0.0,
            fp_rate=0.0,
            seed=6,
        )

    def test_crossing_yields_contiguous_invalid_run(self):
        data = generate_scenario(self.crossing_spec())
        frames_invalid = sorted(
            d.frame
            for d, ident, valid in zip(
                data.detections, data.det_identity, data.det_intended_valid
            )
            if ident == 1 and not valid
        )
        assert len(frames_invalid) >= 5
        assert frames_invalid == list(
            range(frames_invalid[0], frames_invalid[0] + len(frames_invalid))
        )
        # Eq. 1 on the emitted keypoints confirms every one is occluded.
        for d, ident, valid in zip(
            data.detections, data.det_identity, data.det_intended_valid
        ):
            if ident == 1 and not valid:
                assert count_valid_keypoints(d.pose, CFG.gamma_valid) <= CFG.theta_valid

    def test_intended_labels_reproduced_exactly(self):
        for preset in ("occlusion_heavy", "easy_single_cam"):
            data = generate_scenario(scenario_presets()[preset])
            for d, valid in zip(data.detections, data.det_intended_valid):
                expected = OcclusionStatus.VALID if valid else OcclusionStatus.INVALID
                assert estimate_occlusion(d.pose, CFG) is expected

    def test_corrupted_embeddings_far_from_identity_signature(self):
        data = generate_scenario(self.crossing_spec())
        by_ident_valid = {}
        for d, ident, valid in zip(
            data.detections, data.det_identity, data.det_intended_valid
        ):
            by_ident_valid.setdefault((ident, valid), []).append(d.embedding)
        valid_mean = np.mean(by_ident_valid[(1, True)], axis=0)
        for emb in by_ident_valid.get((1, False), []):
            assert np.linalg.norm(emb - valid_mean) > 3 * 1.3  # beyond valid noise


class TestEmbeddingModel:
    def test_identity_separation_margin(self):
        spec = clean_spec(num_identities=6, frames=120, turn_rate=0.25)
        data = generate_scenario(spec)
        groups = {}
        for d, ident, orientation in zip(
            data.detections, data.det_identity, data.det_gt_orientation
        ):
            groups.setdefault((ident, orientation), []).append(d.embedding)
        # Intra: same identity, same orientation. Inter: same orientation,
        # different identity.
        intra_max = 0.0
        inter_min = np.inf
        keys = list(groups)
        for k, embs in groups.items():
            for i in range(len(embs)):
                for j in range(i + 1, min(i + 5, len(embs))):
                    intra_max = max(intra_max, np.linalg.norm(embs[i] - embs[j]))
        for a in keys:
            for b in keys:
                if a[1] == b[1] and a[0] < b[0]:
                    d = np.linalg.norm(
                        np.mean(groups[a], axis=0) - np.mean(groups[b], axis=0)
                    )
                    inter_min = min(inter_min, d)
        assert inter_min - intra_max >= 3 * spec.valid_noise_sigma

    def test_orientation_offsets_distinct(self):
        spec = clean_spec(num_identities=2, frames=200, turn_rate=0.3, seed=9)
        data = generate_scenario(spec)
        groups = {}
        for d, ident, orientation in zip(
            data.detections, data.det_identity, data.det_gt_orientation
        ):
            groups.setdefault((ident, orientation), []).append(d.embedding)
        seen = [k for k in groups if k[0] == 1]
        assert len(seen) >= 2  # the walk visits several orientations
        for a in seen:
            for b in seen:
                if a[1].value < b[1].value:
                    d = np.linalg.norm(
                        np.mean(groups[a], axis=0) - np.mean(groups[b], axis=0)
                    )
                    assert d > spec.orientation_offset_scale  # offsets separate classes


class TestPresets:
    def test_names_and_shapes(self):
        presets = scenario_presets()
        assert set(presets) == {
            "easy_single_cam",
            "occlusion_heavy",
            "two_camera_handoff",
        }
        assert presets["easy_single_cam"].num_identities == 5
        assert presets["easy_single_cam"].num_cameras == 1
        assert presets["easy_single_cam"].occlusion_radius_px == 0.0
        assert presets["occlusion_heavy"].num_identities == 10
        assert presets["occlusion_heavy"].occlusion_radius_px > 0
        assert presets["two_camera_handoff"].num_cameras == 2

    def test_handoff_views_have_blind_gap(self):
        spec = scenario_presets()["two_camera_handoff"]
        views = spec.views()
        assert views[0][2] < views[1][0]  # camera 0 ends before camera 1 starts

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ScenarioSpec(miss_rate=1.5)
        with pytest.raises(ValueError):
            ScenarioSpec(valid_noise_sigma=-1)
        with pytest.raises(ValueError):
            ScenarioSpec(layout="spiral")
        with pytest.raises(ValueError):
            ScenarioSpec(num_cameras=2, camera_views=[(0, 0, 1, 1)])
