"""Filesystem storage for generated datasets, label dumps, and experiment reports.

Layout under the dataset root:

    manifest.json
    scene_0000/grasps.json, cloud.csv
    scene_0000/view_0/scene.json, depth.f32, depth.json, mask.u16
    scene_0000/view_0/labels/header.json, <field>.f32     (optional)
    scene_0000/view_0/depth.png, mask.png                 (optional)

All JSON is written with sorted keys and LF line endings so that identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .evaluation import MetricsReport
from .gripper import Grasp
from .labels import LabeledCenter, LabelTensors
from .pipeline import ViewCase
from .previews import save_previews
from .scenes.collision import SurfaceCloud
from .scenes.render import DepthMap
from .scenes.sampling import Annotation, Scene
from .timing import log_timing

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1
LABEL_FIELDS = ("heatmap", "offsets", "width", "scale")
CLOUD_COLUMNS = ("x", "y", "z", "object_id")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SceneRecord:
    index: int
    multi: bool
    views: int
    grasps: int
    pruned_by_table: int = 0
    pruned_by_collision: int = 0
    pruned_empty: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "multi": self.multi,
            "views": self.views,
            "grasps": self.grasps,
            "pruned_by_table": self.pruned_by_table,
            "pruned_by_collision": self.pruned_by_collision,
            "pruned_empty": self.pruned_empty,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "SceneRecord":
        return cls(
            index=int(payload["index"]),
            multi=bool(payload["multi"]),
            views=int(payload["views"]),
            grasps=int(payload["grasps"]),
            pruned_by_table=int(payload.get("pruned_by_table", 0)),
            pruned_by_collision=int(payload.get("pruned_by_collision", 0)),
            pruned_empty=int(payload.get("pruned_empty", 0)),
        )


def dump_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(json.dumps(payload, sort_keys=True, indent=2))
        handle.write("\n")


def load_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise DatasetError(f"Missing file {path}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"Malformed JSON in {path}: {exc}") from exc


def write_csv(path: Path, rows: Iterable[dict[str, Any]], columns: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def read_csv(path: Path) -> list[dict[str, str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            return list(csv.DictReader(handle))
    except FileNotFoundError as exc:
        raise DatasetError(f"Missing file {path}") from exc


def write_report(path: Path, report: MetricsReport) -> None:
    dump_json(path, report.to_json())


def read_report(path: Path) -> MetricsReport:
    payload = load_json(path)
    try:
        return MetricsReport.from_json(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"Malformed report {path}: {exc}") from exc


def _write_array(path: Path, array: np.ndarray, dtype: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(array, dtype=dtype).tobytes(order="C"))


def _read_array(path: Path, dtype: str, shape: Sequence[int]) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise DatasetError(f"Missing file {path}") from exc
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise DatasetError(f"{path} holds {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype=dtype).reshape(shape)


def write_labels(directory: Path, tensors: LabelTensors) -> None:
    header = {
        "dtype": "f32le",
        "order": "row-major",
        "fields": list(LABEL_FIELDS),
        "dims": {name: list(tensors.fields[name].shape) for name in LABEL_FIELDS},
        "normalization": tensors.normalization,
        "suppressed": tensors.suppressed,
        "centers": [
            {"row": c.row, "col": c.col, "bin": c.bin, "residual": list(c.residual), "source": c.source}
            for c in tensors.centers
        ],
    }
    dump_json(directory / "header.json", header)
    for name in LABEL_FIELDS:
        _write_array(directory / f"{name}.f32", tensors.fields[name], "<f4")


def read_labels(directory: Path) -> LabelTensors:
    header = load_json(directory / "header.json")
    try:
        if header["dtype"] != "f32le" or header["order"] != "row-major":
            raise DatasetError(f"Unsupported label encoding in {directory}")
        arrays = {
            name: _read_array(directory / f"{name}.f32", "<f4", header["dims"][name]).astype(float)
            for name in LABEL_FIELDS
        }
        centers = tuple(
            LabeledCenter(int(c["row"]), int(c["col"]), int(c["bin"]), tuple(c["residual"]), int(c["source"]))
            for c in header["centers"]
        )
        return LabelTensors(
            arrays["heatmap"],
            arrays["offsets"],
            arrays["width"],
            arrays["scale"],
            centers,
            int(header["suppressed"]),
            str(header["normalization"]),
        )
    except KeyError as exc:
        raise DatasetError(f"Label header in {directory} lacks {exc}") from exc


class DatasetStore:
    def __init__(self, root: Path) -> None:
        self._root = Path(root)

    @property
    def root(self) -> Path:
        return self._root

    def scene_dir(self, index: int) -> Path:
        return self._root / f"scene_{index:04d}"

    def view_dir(self, index: int, view: int) -> Path:
        return self.scene_dir(index) / f"view_{view}"

    def write_scene(
        self,
        annotation: Annotation,
        cloud: SurfaceCloud,
        views: Sequence[tuple[Scene, DepthMap]],
        density: int,
        labels: Optional[Sequence[LabelTensors]] = None,
        previews: bool = False,
    ) -> SceneRecord:
        if not views:
            raise ValueError("A scene needs at least one view")
        base = views[0][0]
        scene_dir = self.scene_dir(base.index)
        with log_timing(f"write scene {base.index}", logger, logging.DEBUG):
            dump_json(
                scene_dir / "grasps.json",
                {
                    "density": density,
                    "grasps": [g.to_json() for g in annotation.grasps],
                    "families": list(annotation.families),
                    "pruned_by_table": annotation.pruned_by_table,
                    "pruned_by_collision": annotation.pruned_by_collision,
                    "pruned_empty": annotation.pruned_empty,
                },
            )
            write_csv(
                scene_dir / "cloud.csv",
                (
                    {"x": float(p[0]), "y": float(p[1]), "z": float(p[2]), "object_id": int(i)}
                    for p, i in zip(cloud.points, cloud.object_ids)
                ),
                CLOUD_COLUMNS,
            )
            for position, (view, depth) in enumerate(views):
                self.write_view(view, depth)
                if labels is not None:
                    write_labels(self.view_dir(view.index, view.view) / "labels", labels[position])
                if previews:
                    save_previews(self.view_dir(view.index, view.view), depth)
        return SceneRecord(
            index=base.index,
            multi=base.multi,
            views=len(views),
            grasps=len(annotation.grasps),
            pruned_by_table=annotation.pruned_by_table,
            pruned_by_collision=annotation.pruned_by_collision,
            pruned_empty=annotation.pruned_empty,
        )

    def write_view(self, view: Scene, depth: DepthMap) -> None:
        directory = self.view_dir(view.index, view.view)
        dump_json(directory / "scene.json", view.to_json())
        dump_json(
            directory / "depth.json",
            {"dims": [depth.height, depth.width], "dtype": "f32le", "mask_dtype": "u16le", "order": "row-major"},
        )
        _write_array(directory / "depth.f32", depth.depth, "<f4")
        _write_array(directory / "mask.u16", depth.mask, "<u2")

    def write_manifest(self, meta: dict[str, Any], records: Sequence[SceneRecord]) -> Path:
        payload = dict(meta)
        payload["version"] = FORMAT_VERSION
        payload["scenes"] = [r.to_json() for r in sorted(records, key=lambda r: r.index)]
        path = self._root / MANIFEST_NAME
        dump_json(path, payload)
        return path

    def read_manifest(self) -> dict[str, Any]:
        manifest = load_json(self._root / MANIFEST_NAME)
        if not isinstance(manifest, dict) or "scenes" not in manifest:
            raise DatasetError(f"{self._root / MANIFEST_NAME} is not a dataset manifest")
        if manifest.get("version") != FORMAT_VERSION:
            raise DatasetError(f"Unsupported dataset version {manifest.get('version')!r}")
        return manifest

    def records(self) -> list[SceneRecord]:
        try:
            return [SceneRecord.from_json(r) for r in self.read_manifest()["scenes"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"Malformed scene record: {exc}") from exc

    def load_grasps(self, index: int) -> tuple[Grasp, ...]:
        payload = load_json(self.scene_dir(index) / "grasps.json")
        try:
            return tuple(Grasp.from_json(g) for g in payload["grasps"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"Malformed grasps for scene {index}: {exc}") from exc

    def load_cloud(self, index: int) -> SurfaceCloud:
        rows = read_csv(self.scene_dir(index) / "cloud.csv")
        try:
            points = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows]).reshape(-1, 3)
            ids = np.array([int(r["object_id"]) for r in rows], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"Malformed cloud for scene {index}: {exc}") from exc
        return SurfaceCloud(points, ids)

    def load_view(self, index: int, view: int) -> tuple[Scene, DepthMap]:
        directory = self.view_dir(index, view)
        try:
            scene = Scene.from_json(load_json(directory / "scene.json"))
            dims = load_json(directory / "depth.json")["dims"]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DatasetError):
                raise
            raise DatasetError(f"Malformed view {index}/{view}: {exc}") from exc
        depth = _read_array(directory / "depth.f32", "<f4", dims).astype(float)
        mask = _read_array(directory / "mask.u16", "<u2", dims).astype(np.uint16)
        return scene, DepthMap(depth, mask)

    def load_labels(self, index: int, view: int) -> LabelTensors:
        return read_labels(self.view_dir(index, view) / "labels")

    def cases(self, with_depth: bool = True) -> list[ViewCase]:
        """Every (scene, view) in manifest order with its scene's world-frame grasps."""
        out: list[ViewCase] = []
        for record in self.records():
            grasps = self.load_grasps(record.index)
            for v in range(record.views):
                view, depth = self.load_view(record.index, v)
                out.append(ViewCase(view, grasps, depth if with_depth else None))
        return out


__all__ = [
    "DatasetError",
    "DatasetStore",
    "SceneRecord",
    "dump_json",
    "load_json",
    "read_csv",
    "read_labels",
    "read_report",
    "write_csv",
    "write_labels",
    "write_report",
]
