"""Occlusion and orientation estimation from pose keypoints.

A detection's embedding is trusted ("valid") only when enough keypoints are
confidently visible. Orientation comes either from a small dense classifier
(weights loaded from file) or from a geometric fallback rule that needs no
trained weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BBox,
    LEFT_EAR,
    LEFT_HIP,
    LEFT_SHOULDER,
    OcclusionStatus,
    Orientation,
    PoseKeypoints,
    RIGHT_EAR,
    RIGHT_HIP,
    RIGHT_SHOULDER,
    TrackerConfig,
)

# Input layout of the orientation classifier: normalized position and
# confidence of both shoulders and both hips, then the two ear confidences.
ORIENTATION_INPUT_DIM = 14

# Layer sizes of the orientation classifier, input to output.
MLP_LAYER_SIZES = (ORIENTATION_INPUT_DIM, 128, 64, 128, 64, 4)

# Output class order of the classifier.
ORIENTATION_CLASSES = (
    Orientation.FRONT,
    Orientation.BACK,
    Orientation.LEFT,
    Orientation.RIGHT,
)


@dataclass
class MlpWeights:
    """Dense layers of the orientation classifier: per layer a (out, in)
    weight matrix and an (out,) bias vector."""

    layers: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        expected = list(zip(MLP_LAYER_SIZES[:-1], MLP_LAYER_SIZES[1:]))
        if len(self.layers) != len(expected):
            raise ValueError(
                f"expected {len(expected)} layers, got {len(self.layers)}"
            )
        for idx, ((w, b), (n_in, n_out)) in enumerate(zip(self.layers, expected)):
            if w.shape != (n_out, n_in):
                raise ValueError(
                    f"layer {idx}: weight shape {w.shape} != ({n_out}, {n_in})"
                )
            if b.shape != (n_out,):
                raise ValueError(f"layer {idx}: bias shape {b.shape} != ({n_out},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {idx}: non-finite values")

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 0.1) -> "MlpWeights":
        layers = []
        for n_in, n_out in zip(MLP_LAYER_SIZES[:-1], MLP_LAYER_SIZES[1:]):
            layers.append(
                (
                    rng.normal(0.0, scale, size=(n_out, n_in)),
                    rng.normal(0.0, scale, size=n_out),
                )
            )
        return cls(layers)


def count_valid_keypoints(pose: PoseKeypoints, gamma_valid: float) -> int:
    """Number of keypoints whose confidence strictly exceeds the threshold."""
    return int(np.count_nonzero(pose.confidences > gamma_valid))


def estimate_occlusion(pose: PoseKeypoints, cfg: TrackerConfig) -> OcclusionStatus:
    """Valid iff strictly more than ``theta_valid`` keypoints are visible."""
    n_valid = count_valid_keypoints(pose, cfg.gamma_valid)
    if n_valid > cfg.theta_valid:
        return OcclusionStatus.VALID
    return OcclusionStatus.INVALID


def build_orientation_input(pose: PoseKeypoints, bbox: BBox) -> np.ndarray:
    """The 14-value classifier input for one detection.

    Keypoint positions are normalized to the box so the classifier is
    scale-free: x_hat = (x - bbox.x) / bbox.w, same for y.
    """
    if bbox.w <= 0 or bbox.h <= 0:
        raise ValueError("bbox must have positive extent")
    values = []
    for idx in (LEFT_SHOULDER, RIGHT_SHOULDER, LEFT_HIP, RIGHT_HIP):
        x, y, c = pose.xyc[idx]
        values.extend(((x - bbox.x) / bbox.w, (y - bbox.y) / bbox.h, c))
    values.append(pose.xyc[LEFT_EAR, 2])
    values.append(pose.xyc[RIGHT_EAR, 2])
    return np.asarray(values, dtype=np.float64)


def mlp_logits(inputs: np.ndarray, weights: MlpWeights) -> np.ndarray:
    """Forward pass: ReLU after every hidden layer, raw logits at the output."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape != (ORIENTATION_INPUT_DIM,):
        raise ValueError(f"input shape {x.shape} != ({ORIENTATION_INPUT_DIM},)")
    last = len(weights.layers) - 1
    for idx, (w, b) in enumerate(weights.layers):
        x = w @ x + b
        if idx != last:
            x = np.maximum(x, 0.0)
    return x


def classify_orientation_mlp(inputs: np.ndarray, weights: MlpWeights) -> Orientation:
    """Argmax over the four logits; ties break to the lowest class index."""
    logits = mlp_logits(inputs, weights)
    return ORIENTATION_CLASSES[int(np.argmax(logits))]


def classify_orientation_geometric(
    pose: PoseKeypoints, gamma_valid: float
) -> Orientation:
    """Weight-free orientation rule from keypoint laterality.

    A person facing the camera appears mirrored, so a left shoulder to the
    right of the right shoulder means front. Shoulders take precedence, then
    hips; with neither pair visible a single visible ear decides the profile
    side. Defaults to front.
    """
    conf = pose.confidences

    for left_idx, right_idx in (
        (LEFT_SHOULDER, RIGHT_SHOULDER),
        (LEFT_HIP, RIGHT_HIP),
    ):
        if conf[left_idx] > gamma_valid and conf[right_idx] > gamma_valid:
            if pose.xyc[left_idx, 0] > pose.xyc[right_idx, 0]:
                return Orientation.FRONT
            if pose.xyc[left_idx, 0] < pose.xyc[right_idx, 0]:
                return Orientation.BACK
            return Orientation.FRONT

    left_ear = conf[LEFT_EAR] > gamma_valid
    right_ear = conf[RIGHT_EAR] > gamma_valid
    if left_ear and not right_ear:
        return Orientation.LEFT
    if right_ear and not left_ear:
        return Orientation.RIGHT
    return Orientation.FRONT


class OrientationEstimator:
    """Dispatches between the classifier and the geometric rule."""

    def __init__(self, weights: MlpWeights | None = None):
        self.weights = weights

    def classify(self, pose: PoseKeypoints, bbox: BBox, gamma_valid: float) -> Orientation:
        if self.weights is not None:
            return classify_orientation_mlp(
                build_orientation_input(pose, bbox), self.weights
            )
        return classify_orientation_geometric(pose, gamma_valid)


def populate_state(dets, cfg: TrackerConfig, estimator: OrientationEstimator | None = None):
    """Fill in occlusion and orientation for each detection, in place."""
    if estimator is None:
        estimator = OrientationEstimator()
    for det in dets:
        det.occlusion = estimate_occlusion(det.pose, cfg)
        det.orientation = estimator.classify(det.pose, det.bbox, cfg.gamma_valid)
    return dets


def save_mlp_weights(path, weights: MlpWeights) -> None:
    """Write weights in the plain-text exchange format (see load_mlp_weights)."""
    lines = ["mlp " + " ".join(str(n) for n in MLP_LAYER_SIZES)]
    for w, b in weights.layers:
        n_out, n_in = w.shape
        lines.append(f"layer {n_in} {n_out}")
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mlp_weights(path) -> MlpWeights:
    """Parse the text weight format.

    Header line "mlp 14 128 64 128 64 4", then per layer one line
    "layer <in> <out>", <out> rows of <in> weights, one row of <out> biases.
    Shape mismatches are rejected.
    """
    with open(path, "r", encoding="ascii") as fh:
        tokens_by_line = [line.split() for line in fh if line.strip()]
    if not tokens_by_line:
        raise ValueError(f"{path}: empty weight file")
    header = tokens_by_line[0]
    expected_header = ["mlp"] + [str(n) for n in MLP_LAYER_SIZES]
    if header != expected_header:
        raise ValueError(
            f"{path}: bad header {' '.join(header)!r}, "
            f"expected {' '.join(expected_header)!r}"
        )
    pos = 1
    layers = []
    for n_in, n_out in zip(MLP_LAYER_SIZES[:-1], MLP_LAYER_SIZES[1:]):
        if pos >= len(tokens_by_line) or tokens_by_line[pos][:1] != ["layer"]:
            raise ValueError(f"{path}: missing 'layer' line for {n_in}->{n_out}")
        decl = tokens_by_line[pos]
        if decl != ["layer", str(n_in), str(n_out)]:
            raise ValueError(
                f"{path}: layer declaration {' '.join(decl)!r} does not match "
                f"expected {n_in}->{n_out}"
            )
        pos += 1
        rows = tokens_by_line[pos : pos + n_out]
        if len(rows) < n_out or any(len(r) != n_in for r in rows):
            raise ValueError(f"{path}: weight block for {n_in}->{n_out} malformed")
        w = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
        pos += n_out
        if pos >= len(tokens_by_line) or len(tokens_by_line[pos]) != n_out:
            raise ValueError(f"{path}: bias row for {n_in}->{n_out} malformed")
        b = np.array([float(v) for v in tokens_by_line[pos]], dtype=np.float64)
        pos += 1
        layers.append((w, b))
    if pos != len(tokens_by_line):
        raise ValueError(f"{path}: trailing content after last layer")
    return MlpWeights(layers)
