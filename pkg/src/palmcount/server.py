"""HTTP backend for the browser annotation tool.

Serves scenes from ``<data_dir>/scenes`` and maintains one crop dataset in
``<data_dir>/dataset``.  All mutations are serialized behind a lock (the
dataset store is single-writer) and persisted immediately, so the on-disk
dataset always matches what the API has acknowledged.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import (
    Dataset,
    LABELS,
    NO_PALM,
    add_crop,
    load_dataset,
    sample_negatives,
    write_manifest,
)
from .evaluation import GroundTruth, load_truth_csv
from .raster import PixelPoint, load_raster, save_raster

SCENE_EXTENSIONS = (".png", ".pgm", ".ppm")


class CropRequest(BaseModel):
    scene_id: str
    cx: int
    cy: int
    label: str


class NegativesRequest(BaseModel):
    scene_id: str
    count: int
    min_dist: float = 20.0
    seed: int | None = None


class AnnotationStore:
    """Scene catalog plus the single mutable dataset."""

    def __init__(self, data_dir, side: int = 40):
        self.root = Path(data_dir)
        self.scene_dir = self.root / "scenes"
        self.dataset_dir = self.root / "dataset"
        self.lock = threading.Lock()
        self.side = side
        self._scene_cache = {}
        if (self.dataset_dir / "manifest.json").is_file():
            self.dataset = load_dataset(self.dataset_dir)
        else:
            self.dataset = None  # channels fixed on first use

    def scene_paths(self) -> dict:
        if not self.scene_dir.is_dir():
            return {}
        return {p.stem: p for p in sorted(self.scene_dir.iterdir())
                if p.suffix.lower() in SCENE_EXTENSIONS}

    def scene(self, scene_id: str):
        if scene_id not in self._scene_cache:
            path = self.scene_paths().get(scene_id)
            if path is None:
                raise KeyError(scene_id)
            self._scene_cache[scene_id] = load_raster(path)
        return self._scene_cache[scene_id]

    def truth_for(self, scene_id: str) -> GroundTruth:
        """Crown centers negatives must avoid: the sidecar truth file when
        present, otherwise the palm crops annotated so far."""
        truth_path = self.scene_dir / f"{scene_id}_truth.csv"
        if truth_path.is_file():
            return load_truth_csv(truth_path, scene_id)
        centers = [item.center for item in self.ensure_dataset(scene_id).items
                   if item.label != NO_PALM and item.source_scene == scene_id]
        return GroundTruth(tuple(centers), scene_id)

    def ensure_dataset(self, scene_id: str) -> Dataset:
        if self.dataset is None:
            self.dataset = Dataset(side=self.side, channels=self.scene(scene_id).channels)
        return self.dataset

    def persist_new(self, items) -> None:
        self.dataset_dir.mkdir(parents=True, exist_ok=True)
        for item in items:
            save_raster(item.crop, self.dataset_dir / f"{item.id}.png")
        write_manifest(self.dataset, self.dataset_dir)

    def remove(self, crop_id: str) -> None:
        idx = next((i for i, item in enumerate(self.dataset.items) if item.id == crop_id), None) \
            if self.dataset else None
        if idx is None:
            raise KeyError(crop_id)
        self.dataset.items.pop(idx)
        (self.dataset_dir / f"{crop_id}.png").unlink(missing_ok=True)
        write_manifest(self.dataset, self.dataset_dir)


def create_app(data_dir, static_dir=None, side: int = 40) -> FastAPI:
    store = AnnotationStore(data_dir, side=side)
    app = FastAPI(title="palmcount annotator")

    @app.get("/api/scenes")
    def list_scenes():
        out = []
        for scene_id in store.scene_paths():
            r = store.scene(scene_id)
            out.append({"scene_id": scene_id, "width": r.width, "height": r.height})
        return out

    @app.get("/api/scenes/{scene_id}/image")
    def scene_image(scene_id: str):
        path = store.scene_paths().get(scene_id)
        if path is None:
            raise HTTPException(404, f"unknown scene {scene_id!r}")
        media = "image/png" if path.suffix.lower() == ".png" else "application/octet-stream"
        return FileResponse(path, media_type=media)

    @app.post("/api/crops")
    def create_crop(req: CropRequest):
        if req.label not in LABELS:
            raise HTTPException(400, f"label must be one of {list(LABELS)}")
        try:
            scene = store.scene(req.scene_id)
        except KeyError:
            raise HTTPException(404, f"unknown scene {req.scene_id!r}")
        with store.lock:
            d = store.ensure_dataset(req.scene_id)
            try:
                item = add_crop(d, scene, PixelPoint(req.cx, req.cy), req.label,
                                scene_id=req.scene_id)
            except ValueError as exc:
                raise HTTPException(400, str(exc))
            store.persist_new([item])
        return {"crop_id": item.id}

    @app.delete("/api/crops/{crop_id}")
    def delete_crop(crop_id: str):
        with store.lock:
            try:
                store.remove(crop_id)
            except KeyError:
                raise HTTPException(404, f"unknown crop {crop_id!r}")
        return {"deleted": crop_id}

    @app.post("/api/negatives/sample")
    def negatives(req: NegativesRequest):
        if req.count < 0:
            raise HTTPException(400, "count must be >= 0")
        try:
            scene = store.scene(req.scene_id)
        except KeyError:
            raise HTTPException(404, f"unknown scene {req.scene_id!r}")
        with store.lock:
            d = store.ensure_dataset(req.scene_id)
            truth = store.truth_for(req.scene_id)
            seed = req.seed if req.seed is not None else len(d.items)
            try:
                items = sample_negatives(d, scene, truth, req.count, req.min_dist,
                                         seed=seed, scene_id=req.scene_id)
            except ValueError as exc:
                raise HTTPException(400, str(exc))
            store.persist_new(items)
        return [{"crop_id": item.id, "cx": item.center.x, "cy": item.center.y}
                for item in items]

    @app.get("/api/stats")
    def stats():
        if store.dataset is None:
            return {"palm_count": 0, "no_palm_count": 0}
        counts = store.dataset.class_counts()
        return {"palm_count": counts["palm"], "no_palm_count": counts[NO_PALM]}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
