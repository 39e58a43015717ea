"""Projector intervention rate as training progresses.

Samples with the full projector after every ``--every`` epochs and reports
the fraction of proposed edges that had to be relabelled or dropped.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from sgdiff.datagen import tree_corpus, tree_omega
from sgdiff.pipeline import TrainSettings, sample_edges, total_log, train_model
from sgdiff.projector import ProjectorConfig
from sgdiff.rng import substream


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=24)
    ap.add_argument("--every", type=int, default=6)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/intervention.json"))
    args = ap.parse_args()

    omega = tree_omega()
    cfg = ProjectorConfig(omega, "forest", 4)
    train = tree_corpus(300, 40, 120, substream(args.seed, "train"))
    held = tree_corpus(args.count, 40, 120, substream(args.seed, "heldout"))
    curve = []
    for epochs in range(0, args.epochs + 1, args.every):
        # epochs=0 gives the untrained baseline; each point retrains from the same init
        model = train_model(train, TrainSettings(steps=args.steps, epochs=epochs, lr=1e-3, stage="edges",
                                                 seed=args.seed), omega.labels)
        log = total_log(sample_edges(model, [model.normalizer.apply(g.coords) for g in held], cfg, args.seed))
        curve.append({"epochs": epochs, **log.to_json()})
        print(f"epochs {epochs:3d}  rate {log.rate:.4f}  fixed {log.fixed}  rejected {log.rejected}  "
              f"candidates {log.candidates}", flush=True)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(curve, indent=2))


if __name__ == "__main__":
    main()
