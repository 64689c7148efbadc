"""JSON encoding for the mixed exact/float scalars used throughout."""

from __future__ import annotations

import json
from dataclasses import asdict, is_dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from ._exact import fraction_str


def encode(obj):
    """Recursively convert to JSON-ready values.

    Rationals become ``"num/den"`` strings, complex numbers with a nonzero
    imaginary part become ``{"re": .., "im": ..}``.
    """
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return fraction_str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        if obj.imag == 0:
            return float(obj.real)
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [encode(x) for x in obj.tolist()]
    if is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return encode(obj.to_dict())
        return encode(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(x) for x in obj]
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(encode(obj), indent=2, sort_keys=True)
