"""Per-step stream records and their JSONL wire form.

One record per timestep captures everything downstream consumers need:
the noisy observation and debiased statistic (optional, size permitting),
the filtering loss and log-belief, the transformed belief and threshold in
force, the decision, and any feedback bookkeeping.  Beliefs are stored in
log space; raw densities underflow doubles at realistic dimensions.

Serialization is stable: fixed key order and repr-based floats, so equal
runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

__all__ = ["StreamRecord", "record_to_dict", "record_to_json", "record_from_json"]

_FIELD_ORDER = [
    "t",
    "z",
    "h",
    "filtering_loss",
    "log_belief",
    "zeta",
    "tau",
    "y_hat",
    "queried",
    "feedback",
    "true_loss",
    "y_true",
]


@dataclass
class StreamRecord:
    t: int
    filtering_loss: float
    log_belief: float
    zeta: float
    tau: float
    y_hat: int
    queried: bool = False
    feedback: Optional[int] = None
    z: Optional[list[float]] = None
    h: Optional[list[float]] = None
    true_loss: Optional[float] = None
    y_true: Optional[int] = None

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError("timestep starts at 1")
        if not math.isfinite(self.log_belief):
            raise ValueError("log-belief must be finite")
        if self.y_hat not in (-1, 1):
            raise ValueError("y_hat must be -1 or +1")
        if self.feedback is not None and self.feedback not in (-1, 1):
            raise ValueError("feedback must be -1 or +1")
        if self.y_true is not None and self.y_true not in (-1, 1):
            raise ValueError("y_true must be -1 or +1")


def record_to_dict(rec: StreamRecord) -> dict:
    """Plain dict with deterministic key order; optional fields omitted."""
    data = {}
    for key in _FIELD_ORDER:
        value = getattr(rec, key)
        if value is None and key in ("z", "h", "true_loss", "y_true"):
            continue
        data[key] = value
    return data


def record_to_json(rec: StreamRecord) -> str:
    """One-line JSON with deterministic key order."""
    return json.dumps(record_to_dict(rec), separators=(",", ":"), allow_nan=False)


def record_from_json(line: str) -> StreamRecord:
    data = json.loads(line)
    return StreamRecord(
        t=int(data["t"]),
        filtering_loss=float(data["filtering_loss"]),
        log_belief=float(data["log_belief"]),
        zeta=float(data["zeta"]),
        tau=float(data["tau"]),
        y_hat=int(data["y_hat"]),
        queried=bool(data.get("queried", False)),
        feedback=data.get("feedback"),
        z=data.get("z"),
        h=data.get("h"),
        true_loss=data.get("true_loss"),
        y_true=data.get("y_true"),
    )
