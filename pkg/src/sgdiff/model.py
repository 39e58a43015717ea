"""Trained two-stage model and its checkpoint file.

A checkpoint is an ``.npz`` archive: every parameter array under
``coord/<name>`` or ``edge/<name>`` plus a ``meta`` entry holding a JSON
document (format tag, schedules, transition kind, normalisation, labels and
the training node-count distribution).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coords import Normalizer
from .edges import TransitionModel
from .networks import CoordNetConfig, EdgeDenoiser, EdgeNetConfig
from .schedule import DiffusionSchedule, make_schedule

FORMAT_TAG = "sgdiff-checkpoint/1"


@dataclass
class GraphDiffusionModel:
    edge: EdgeDenoiser
    transition: TransitionModel
    schedule_kind: str = "linear"
    steps: int = 500
    normalizer: Normalizer = field(default_factory=lambda: Normalizer(np.zeros(3), 1.0))
    labels: tuple[str, ...] = ()
    node_counts: tuple[int, ...] = ()
    coord_params: dict | None = None
    coord_config: CoordNetConfig = field(default_factory=CoordNetConfig)
    coord_steps: int = 500
    history: dict = field(default_factory=dict)

    @property
    def schedule(self) -> DiffusionSchedule:
        return make_schedule(self.schedule_kind, self.steps)

    @property
    def coord_schedule(self) -> DiffusionSchedule:
        return make_schedule(self.schedule_kind, self.coord_steps)

    def meta(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "edge_config": self.edge.config.to_json(),
            "transition": self.transition.to_json(),
            "schedule": self.schedule_kind,
            "steps": self.steps,
            "coord_steps": self.coord_steps,
            "coord_config": {"hidden": self.coord_config.hidden},
            "has_coord_model": self.coord_params is not None,
            "normalizer": self.normalizer.to_json(),
            "labels": list(self.labels),
            "node_counts": list(self.node_counts),
            "history": self.history,
        }

    def save(self, path) -> None:
        arrays = {f"edge/{k}": np.asarray(v, dtype=np.float64) for k, v in self.edge.params.items()}
        if self.coord_params is not None:
            arrays.update({f"coord/{k}": np.asarray(v, dtype=np.float64) for k, v in self.coord_params.items()})
        arrays["meta"] = np.array(json.dumps(self.meta(), sort_keys=True))
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp.npz")
        np.savez(tmp, **arrays)
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "GraphDiffusionModel":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != FORMAT_TAG:
                raise ValueError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
            edge = {k[5:]: data[k] for k in data.files if k.startswith("edge/")}
            coord = {k[6:]: data[k] for k in data.files if k.startswith("coord/")} or None
        return cls(
            edge=EdgeDenoiser(edge, EdgeNetConfig(**meta["edge_config"])),
            transition=TransitionModel.from_json(meta["transition"]),
            schedule_kind=meta["schedule"],
            steps=int(meta["steps"]),
            normalizer=Normalizer.from_json(meta["normalizer"]),
            labels=tuple(meta["labels"]),
            node_counts=tuple(meta["node_counts"]),
            coord_params=coord,
            coord_config=CoordNetConfig(**meta["coord_config"]),
            coord_steps=int(meta["coord_steps"]),
            history=meta.get("history", {}),
        )
