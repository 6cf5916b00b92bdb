"""Dataset layout: root/scenes/<id>/{main_fg,main_bg,ultrawide,m_fuse,gt}.png
plus optional root/train.txt and root/eval.txt listing scene ids."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgumentError

# capture conventions for the phone dataset; validated, never enforced
ULTRAWIDE_RES = (3840, 2592)
MAIN_RES = (3648, 2736)
EXPECTED_TRAIN = 5000
EXPECTED_EVAL = 372

REQUIRED = ("main_fg.png", "main_bg.png", "ultrawide.png")
OPTIONAL = ("m_fuse.png", "gt.png")


@dataclass
class SceneRecord:
    scene_id: str
    main_fg: Path
    main_bg: Path
    ultrawide: Path
    m_fuse: Path | None = None
    gt: Path | None = None


def png_size(path: Path) -> tuple[int, int] | None:
    """(width, height) from the PNG header, or None if not a PNG."""
    try:
        with open(path, "rb") as f:
            head = f.read(24)
    except OSError:
        return None
    if len(head) < 24 or head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        return None
    w, h = struct.unpack(">II", head[16:24])
    return int(w), int(h)


def load_scene(scene_dir: Path) -> SceneRecord:
    scene_dir = Path(scene_dir)
    missing = [n for n in REQUIRED if not (scene_dir / n).exists()]
    if missing:
        raise InvalidArgumentError(
            f"scene {scene_dir.name}: missing {', '.join(missing)}"
        )
    opt = {n.split(".")[0]: (scene_dir / n if (scene_dir / n).exists() else None)
           for n in OPTIONAL}
    return SceneRecord(
        scene_id=scene_dir.name,
        main_fg=scene_dir / "main_fg.png",
        main_bg=scene_dir / "main_bg.png",
        ultrawide=scene_dir / "ultrawide.png",
        m_fuse=opt["m_fuse"],
        gt=opt["gt"],
    )


def discover_scenes(root: str | Path) -> list[Path]:
    scene_dir = Path(root) / "scenes"
    if not scene_dir.is_dir():
        raise InvalidArgumentError(f"no scenes/ directory under {root}")
    return sorted(p for p in scene_dir.iterdir() if p.is_dir())


def _read_split(path: Path) -> list[str] | None:
    if not path.exists():
        return None
    return [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]


def validate_dataset(root: str | Path) -> dict:
    """Structural check of a dataset tree.

    Returns a report dict with counts, per-scene problems, and warnings
    (resolution or split-count deviations from the capture conventions).
    """
    root = Path(root)
    scene_dirs = discover_scenes(root)
    problems: list[str] = []
    warnings: list[str] = []
    scene_ids = []
    for sd in scene_dirs:
        scene_ids.append(sd.name)
        try:
            rec = load_scene(sd)
        except InvalidArgumentError as e:
            problems.append(str(e))
            continue
        for path, expect in ((rec.ultrawide, ULTRAWIDE_RES),
                             (rec.main_fg, MAIN_RES),
                             (rec.main_bg, MAIN_RES)):
            size = png_size(path)
            if size is None:
                problems.append(f"scene {rec.scene_id}: {path.name} is not a PNG")
            elif size != expect:
                warnings.append(
                    f"scene {rec.scene_id}: {path.name} is {size[0]}x{size[1]}, "
                    f"capture convention is {expect[0]}x{expect[1]}"
                )
    known = set(scene_ids)
    for split, expected in (("train.txt", EXPECTED_TRAIN), ("eval.txt", EXPECTED_EVAL)):
        ids = _read_split(root / split)
        if ids is None:
            continue
        unknown = [i for i in ids if i not in known]
        if unknown:
            problems.append(f"{split}: {len(unknown)} ids without a scene directory")
        if len(ids) != expected:
            warnings.append(f"{split}: {len(ids)} entries (convention is {expected})")
    return {
        "scenes": len(scene_ids),
        "problems": problems,
        "warnings": warnings,
    }
