"""PSNR/SSIM and dataset-level evaluation.

SSIM is reported twice per pair - channel-averaged RGB and Rec.601 luma -
since either convention is common and the aggregate report should make the
choice auditable.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InvalidArgumentError
from .filters import gaussian_kernel1d
from .image import Image, read_png

log = logging.getLogger("aifpipe")

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2


def psnr(a: Image, b: Image) -> float:
    """10*log10(1/MSE) at peak 1.0; identical images give math.inf."""
    if a.shape != b.shape or a.channels != b.channels:
        raise InvalidArgumentError("psnr inputs must share dimensions")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    k = gaussian_kernel1d(_SSIM_SIGMA, radius=_SSIM_WINDOW // 2)

    def smooth(p):
        out = correlate1d(p, k, axis=0, mode="constant")
        out = correlate1d(out, k, axis=1, mode="constant")
        r = _SSIM_WINDOW // 2
        return out[r:-r, r:-r]

    mu_x = smooth(x)
    mu_y = smooth(y)
    xx = smooth(x * x) - mu_x * mu_x
    yy = smooth(y * y) - mu_y * mu_y
    xy = smooth(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * xy + _SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + _SSIM_C1) * (xx + yy + _SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: Image, b: Image, luma: bool = False) -> float:
    """Single-scale SSIM, 11x11 Gaussian window sigma=1.5, peak 1.

    ``luma=False`` averages the per-channel scores; ``luma=True`` evaluates
    the Rec.601 luma plane instead.
    """
    if a.shape != b.shape or a.channels != b.channels:
        raise InvalidArgumentError("ssim inputs must share dimensions")
    if min(a.shape) < _SSIM_WINDOW:
        raise InvalidArgumentError(
            f"images smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window"
        )
    if luma:
        return _ssim_plane(a.luma().astype(np.float64), b.luma().astype(np.float64))
    scores = [
        _ssim_plane(a.data[c].astype(np.float64), b.data[c].astype(np.float64))
        for c in range(a.channels)
    ]
    return float(np.mean(scores))


@dataclass
class SceneReport:
    scene_id: str
    focus_side: str  # "foreground" or "background"
    psnr: float
    ssim_rgb: float
    ssim_luma: float


@dataclass
class DatasetReport:
    rows: list[SceneReport]
    errors: int

    def _mean(self, side: str | None, attr: str) -> float:
        vals = [getattr(r, attr) for r in self.rows
                if side is None or r.focus_side == side]
        if not vals:
            return math.nan
        return float(np.mean(vals))

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for name, side in (("foreground", "foreground"),
                           ("background", "background"),
                           ("total", None)):
            out[name] = {
                "psnr": self._mean(side, "psnr"),
                "ssim_rgb": self._mean(side, "ssim_rgb"),
                "ssim_luma": self._mean(side, "ssim_luma"),
            }
        return out


_SIDES = (("fg", "foreground"), ("bg", "background"))


def evaluate_dataset(root: str | Path, predictions: str | Path,
                     out_csv: str | Path | None = None,
                     jobs: int = 1) -> DatasetReport:
    """Score predictions against per-scene ground truth.

    Layout: ``root/scenes/<id>/gt.png`` and ``predictions/<id>_fg.png`` /
    ``<id>_bg.png`` (one prediction per focused input). Scenes with missing
    or unreadable ground truth are skipped and counted in ``errors``;
    missing predictions for a side are skipped silently. Rows aggregate in
    sorted scene order regardless of on-disk order.
    """
    root = Path(root)
    predictions = Path(predictions)
    scene_dir = root / "scenes"
    if not scene_dir.is_dir():
        raise InvalidArgumentError(f"no scenes/ directory under {root}")
    scene_ids = sorted(p.name for p in scene_dir.iterdir() if p.is_dir())

    def eval_scene(scene_id: str):
        gt_path = scene_dir / scene_id / "gt.png"
        rows: list[SceneReport] = []
        try:
            gt = read_png(gt_path)
        except InvalidArgumentError:
            return rows, 1
        bad = 0
        for tag, side in _SIDES:
            pred_path = predictions / f"{scene_id}_{tag}.png"
            if not pred_path.exists():
                continue
            try:
                pred = read_png(pred_path)
                rows.append(SceneReport(
                    scene_id=scene_id,
                    focus_side=side,
                    psnr=psnr(pred, gt),
                    ssim_rgb=ssim(pred, gt),
                    ssim_luma=ssim(pred, gt, luma=True),
                ))
            except InvalidArgumentError as e:
                log.warning("scene %s (%s): %s", scene_id, side, e)
                bad += 1
        return rows, bad

    all_rows: list[SceneReport] = []
    errors = 0
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(eval_scene, scene_ids))
    else:
        results = [eval_scene(s) for s in scene_ids]
    for rows, bad in results:
        all_rows.extend(rows)
        errors += bad

    all_rows.sort(key=lambda r: (r.scene_id, r.focus_side))
    report = DatasetReport(all_rows, errors)
    if out_csv is not None:
        write_report_csv(out_csv, report)
    return report


def write_report_csv(path: str | Path, report: DatasetReport) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scene_id", "focus_side", "psnr_db", "ssim_rgb", "ssim_luma"])
        for r in report.rows:
            psnr_txt = "inf" if math.isinf(r.psnr) else f"{r.psnr:.6f}"
            writer.writerow([r.scene_id, r.focus_side, psnr_txt,
                             f"{r.ssim_rgb:.6f}", f"{r.ssim_luma:.6f}"])
