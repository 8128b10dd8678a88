"""Evaluation traces shared by the evolutionary and BO optimizers.

A trace records every objective evaluation in order: configuration,
objective values, evaluation index and generation/round.  Serialized as
line-delimited JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .learners import ObjectiveVector
from .space import Configuration, StrategyParams


def config_to_dict(config: Configuration) -> dict:
    out = {"hyperparams": dict(config.hyperparams)}
    if config.mask is not None:
        out["mask"] = "".join(str(int(b)) for b in config.mask)
    if config.ffrac is not None:
        out["ffrac"] = float(config.ffrac)
    if config.weights is not None:
        out["weights"] = [float(w) for w in config.weights]
    if config.filter_index is not None:
        out["filter_index"] = int(config.filter_index)
    return out


def config_from_dict(d: dict) -> Configuration:
    mask = None
    if "mask" in d:
        mask = np.array([int(ch) for ch in d["mask"]], dtype=np.int8)
    return Configuration(
        hyperparams=dict(d["hyperparams"]),
        mask=mask,
        ffrac=d.get("ffrac"),
        weights=np.array(d["weights"]) if "weights" in d else None,
        filter_index=d.get("filter_index"),
    )


@dataclass
class Trace:
    records: list = field(default_factory=list)

    def add(self, config: Configuration, objectives: ObjectiveVector, generation: int):
        self.records.append({
            "eval_index": len(self.records),
            "generation": generation,
            "config": config,
            "perf": objectives.perf,
            "cost": objectives.cost,
            "failed": objectives.failed,
        })

    def __len__(self):
        return len(self.records)

    def objectives(self) -> np.ndarray:
        return np.array([(r["perf"], r["cost"]) for r in self.records])

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for r in self.records:
                row = {**r, "config": config_to_dict(r["config"])}
                fh.write(json.dumps(row) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "Trace":
        trace = cls()
        with open(path) as fh:
            for line in fh:
                row = json.loads(line)
                row["config"] = config_from_dict(row["config"])
                trace.records.append(row)
        return trace
