"""Pipeline configuration: defaults, bounds, and the key=value file format.

Every knob has an embedded default, so an empty (or absent) config file is
valid. Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import InvalidArgumentError


@dataclass
class PipelineConfig:
    # registration
    max_count: int = 4000
    ratio: float = 0.8
    ransac_iters: int = 2000
    inlier_px: float = 3.0
    seed: int = 0
    # dense flow
    flow_levels: int = 5
    flow_window: int = 21
    flow_iters: int = 30
    tau: float = 1.0
    # defocus matching: blur the sharp (wide) side by this sigma before
    # flow estimation so defocus asymmetry does not read as motion
    flow_preblur: float = 0.0
    # color alignment
    color_grid: int = 8
    color_ridge: float = 1e-3
    # fusion
    margin: float = 0.15
    focus_radius: int = 4
    patch: int = 7
    search: int = 16
    guided_radius: int = 8
    guided_eps: float = 1e-3
    # alignment is estimated at 1/scale resolution, warping runs full-res
    scale: int = 4
    # reserved training-time loss weights; documented, unused at inference
    refine_loss_weight: float = 0.5
    mask_loss_weight: float = 0.1

    _BOUNDS = {
        "max_count": (10, 100000),
        "ratio": (1e-3, 1.0),
        "ransac_iters": (1, 1000000),
        "inlier_px": (1e-3, 100.0),
        "seed": (0, 2**32 - 1),
        "flow_levels": (1, 10),
        "flow_window": (3, 101),
        "flow_iters": (1, 500),
        "tau": (1e-3, 100.0),
        "flow_preblur": (0.0, 32.0),
        "color_grid": (1, 64),
        "color_ridge": (0.0, 1e3),
        "margin": (0.0, 10.0),
        "focus_radius": (1, 64),
        "patch": (3, 63),
        "search": (1, 128),
        "guided_radius": (1, 128),
        "guided_eps": (1e-9, 1.0),
        "scale": (1, 16),
        "refine_loss_weight": (0.0, 10.0),
        "mask_loss_weight": (0.0, 10.0),
    }

    def validate(self) -> "PipelineConfig":
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            lo, hi = self._BOUNDS[f.name]
            val = getattr(self, f.name)
            if not lo <= val <= hi:
                raise InvalidArgumentError(
                    f"config {f.name}={val} outside [{lo}, {hi}]"
                )
        return self

    @classmethod
    def from_file(cls, path: str | Path | None) -> "PipelineConfig":
        """Parse a line-oriented key=value file; '#' starts a comment."""
        cfg = cls()
        if path is None:
            return cfg.validate()
        text = Path(path).read_text()
        known = {f.name: f.type for f in fields(cls) if not f.name.startswith("_")}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgumentError(
                    f"{path}:{lineno}: expected key=value, got {raw!r}"
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise InvalidArgumentError(f"{path}:{lineno}: unknown key {key!r}")
            kind = known[key]
            try:
                parsed = int(value) if kind in ("int", int) else float(value)
            except ValueError as e:
                raise InvalidArgumentError(
                    f"{path}:{lineno}: cannot parse {key}={value!r}"
                ) from e
            setattr(cfg, key, parsed)
        return cfg.validate()
