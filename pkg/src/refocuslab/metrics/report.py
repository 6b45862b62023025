"""F x F evaluation reports: refocus from every input position p, score
every output position q against ground truth.

The report keeps per-scene values so comparative criteria (identity-case
advantage of regression, large-shift advantage of generation) can be
checked scene by scene, and serializes as JSON plus one CSV matrix per
metric.  Infinite PSNR (bit-exact cells) serializes as the string
"exact".
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fidelity import hf_energy, psnr, ssim

METRIC_NAMES = ("psnr", "ssim", "hf_out", "hf_gt", "psnr_copy_input")


@dataclass
class EvalReport:
    """values[name] has shape (scenes, F, F) indexed [scene, input p, output q]."""

    mode: str
    scene_ids: list
    values: dict
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {v.shape for v in self.values.values()}
        if len(shapes) != 1:
            raise ValueError("EvalReport: metric arrays must share one shape")
        s, f, f2 = next(iter(shapes))
        if f != f2 or s != len(self.scene_ids):
            raise ValueError("EvalReport: expected (scenes, F, F) arrays")

    @property
    def frame_count(self) -> int:
        return next(iter(self.values.values())).shape[1]

    @property
    def scene_count(self) -> int:
        return len(self.scene_ids)

    def matrix(self, name: str, reduce: str = "mean") -> np.ndarray:
        vals = self.values[name]
        if reduce == "mean":
            return vals.mean(axis=0)
        if reduce == "median":
            return np.median(vals, axis=0)
        raise ValueError(f"unknown reduction {reduce!r}")

    def to_dict(self) -> dict:
        def clean(x):
            return "exact" if math.isinf(x) else float(x)

        return {
            "mode": self.mode,
            "scene_ids": list(self.scene_ids),
            "frame_count": self.frame_count,
            "provenance": self.provenance,
            "aggregates": {
                name: {
                    "mean": [[clean(v) for v in row] for row in self.matrix(name)],
                    "median": [[clean(v) for v in row] for row in self.matrix(name, "median")],
                }
                for name in self.values
            },
            "per_scene": {
                name: [[[clean(v) for v in row] for row in scene] for scene in self.values[name]]
                for name in self.values
            },
        }

    def save(self, path) -> None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for name in self.values:
            with (p.parent / f"{p.stem}_{name}.csv").open("w", newline="", encoding="utf-8") as f:
                w = csv.writer(f)
                w.writerow(["p\\q"] + [f"q{j}" for j in range(self.frame_count)])
                for i, row in enumerate(self.matrix(name)):
                    w.writerow([f"p{i}"] + [("exact" if math.isinf(v) else f"{v:.6f}") for v in row])

    @staticmethod
    def load(path) -> "EvalReport":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))

        def restore(x):
            return math.inf if x == "exact" else float(x)

        values = {
            name: np.array([[[restore(v) for v in row] for row in scene] for scene in scenes])
            for name, scenes in doc["per_scene"].items()
        }
        return EvalReport(mode=doc["mode"], scene_ids=doc["scene_ids"], values=values,
                          provenance=doc.get("provenance", {}))


def eval_matrix(sample_fn, scenes: list, frame_count: int, mode: str,
                provenance: dict | None = None) -> EvalReport:
    """Build the F x F report.

    sample_fn(inputs, p) takes (B, C, H, W) pixels in [0, 1] and returns
    (B, F, C, H, W) generated stacks.  `scenes` is a list of
    (scene_id, gt_stack) with gt_stack shaped (F, C, H, W) in [0, 1].
    """
    ids = [sid for sid, _ in scenes]
    gts = np.stack([gt for _, gt in scenes], axis=0)  # (S, F, C, H, W)
    s = len(scenes)
    values = {name: np.zeros((s, frame_count, frame_count)) for name in METRIC_NAMES}
    for p in range(frame_count):
        inputs = gts[:, p]
        outputs = sample_fn(inputs, p)  # (S, F, C, H, W)
        for si in range(s):
            for q in range(frame_count):
                got = outputs[si, q]
                want = gts[si, q]
                values["psnr"][si, p, q] = psnr(got.transpose(1, 2, 0), want.transpose(1, 2, 0))
                values["ssim"][si, p, q] = ssim(got.transpose(1, 2, 0), want.transpose(1, 2, 0))
                values["hf_out"][si, p, q] = hf_energy(got.transpose(1, 2, 0))
                values["hf_gt"][si, p, q] = hf_energy(want.transpose(1, 2, 0))
                values["psnr_copy_input"][si, p, q] = psnr(
                    inputs[si].transpose(1, 2, 0), want.transpose(1, 2, 0))
    return EvalReport(mode=mode, scene_ids=ids, values=values, provenance=provenance or {})


def frame_difference_profile(stack: np.ndarray) -> np.ndarray:
    """Mean absolute difference for every frame pair i<j of an (F, ...) stack."""
    f = stack.shape[0]
    return np.array([np.abs(stack[i] - stack[j]).mean()
                     for i in range(f) for j in range(i + 1, f)])


def collapse_stats(outputs: np.ndarray, gts: np.ndarray) -> dict:
    """Stack-collapse diagnostics over (S, F, C, H, W) outputs vs ground truth.

    Returns per-scene ratios of mean pairwise frame difference
    (output / ground truth) and the Pearson correlation of the two
    frame-difference profiles.
    """
    if outputs.shape != gts.shape:
        raise ValueError("collapse_stats: shape mismatch")
    ratios, correlations = [], []
    for si in range(outputs.shape[0]):
        prof_out = frame_difference_profile(outputs[si])
        prof_gt = frame_difference_profile(gts[si])
        ratios.append(prof_out.mean() / max(prof_gt.mean(), 1e-12))
        if prof_out.std() < 1e-12 or prof_gt.std() < 1e-12:
            correlations.append(0.0)
        else:
            correlations.append(float(np.corrcoef(prof_out, prof_gt)[0, 1]))
    return {
        "diff_ratio": np.asarray(ratios),
        "profile_corr": np.asarray(correlations),
    }
