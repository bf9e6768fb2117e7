"""Editable-parameter descriptors, step quantization, and value snapping.

A descriptor announces one editable parameter to clients: its kind, its
restrictions (range, step, choices), and its current value. Numeric
parameters additionally carry a quantized step so coarse controls expose at
most 21 uniformly spaced values; `snap` projects any incoming value onto
that grid.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

PARAM_KINDS = ("real", "integer", "boolean", "choice")
NUMERIC_KINDS = ("real", "integer")

#: native_step marker for parameters with no inherent grid
CONTINUOUS = "continuous"

#: default ceiling on selectable steps (grid has at most DEFAULT_LIMIT+1 values)
DEFAULT_LIMIT = 20


class ParamError(ValueError):
    """Invalid parameter definition, quantization domain error, or bad value."""


def quantize(lo: float, hi: float, native_step, limit: int = DEFAULT_LIMIT) -> float:
    """Return the effective step exposing at most ``limit + 1`` values on [lo, hi].

    Continuous parameters get ``(hi - lo) / limit``. Stepped parameters keep
    their native step when the native grid already fits, otherwise the step
    is the smallest integer multiple of the native step that does.
    """
    if limit < 1:
        raise ParamError(f"limit must be >= 1, got {limit}")
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ParamError(f"invalid range [{lo}, {hi}]: need finite min < max")
    if native_step == CONTINUOUS:
        return (hi - lo) / limit
    if not isinstance(native_step, (int, float)) or isinstance(native_step, bool):
        raise ParamError(f"native_step must be a number or {CONTINUOUS!r}")
    if not math.isfinite(native_step) or native_step <= 0:
        raise ParamError(f"native_step must be > 0, got {native_step}")
    if native_step > hi - lo:
        # a grid with a single selectable value is not an editable parameter
        raise ParamError(
            f"native_step {native_step} exceeds range width {hi - lo}")
    native_count = math.floor((hi - lo) / native_step) + 1
    if native_count <= limit + 1:
        return native_step
    multiple = math.ceil((native_count - 1) / limit)
    return multiple * native_step


def selectable_values(lo: float, hi: float, step: float) -> list[float]:
    """All values lo + k*step inside [lo, hi], in ascending order."""
    count = math.floor((hi - lo) / step) + 1
    return [min(lo + k * step, hi) for k in range(count)]


def snap(desc: "ParamDescriptor", raw):
    """Project ``raw`` onto the descriptor's selectable grid.

    Numeric values are clamped to [min, max] and rounded to the nearest grid
    point, ties toward max. Booleans and choices pass through validation
    unchanged. Raises ParamError on kind mismatch or unknown choice.
    """
    kind = desc.kind
    if kind == "boolean":
        if not isinstance(raw, bool):
            raise ParamError(
                f"param {desc.id!r}: expected boolean, got {type(raw).__name__}")
        return raw
    if kind == "choice":
        if not isinstance(raw, str):
            raise ParamError(
                f"param {desc.id!r}: expected choice string, got {type(raw).__name__}")
        if raw not in desc.choices:
            raise ParamError(f"param {desc.id!r}: {raw!r} is not one of {desc.choices}")
        return raw
    # real / integer
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParamError(
            f"param {desc.id!r}: expected number, got {type(raw).__name__}")
    if not math.isfinite(raw):
        raise ParamError(f"param {desc.id!r}: value must be finite, got {raw}")
    if desc.quantized_step is None:
        raise ParamError(f"param {desc.id!r}: descriptor has no quantized_step; "
                         "announce it first")
    lo, hi, step = desc.min, desc.max, desc.quantized_step
    x = min(max(float(raw), lo), hi)
    k = math.floor((x - lo) / step + 0.5)  # half-up: ties round toward max
    k = max(0, min(k, math.floor((hi - lo) / step)))
    value = min(lo + k * step, hi)
    if kind == "integer":
        return int(round(value))
    return value


@dataclass(eq=True)
class ParamDescriptor:
    """One editable parameter: identity, kind, restrictions, current value.

    With ``quantized_step`` unset this is a definition-file seed; `announced`
    returns the finalized descriptor broadcast to clients. Only ``value`` and
    ``revision`` mutate after construction, and only under the host's
    serialization guarantee.
    """

    id: str
    name: str
    kind: str
    min: float | None = None
    max: float | None = None
    native_step: float | str | None = None
    choices: list[str] | None = None
    quantized_step: float | None = None
    value: object = None
    revision: int = 0

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise ParamError(f"param id must be a non-empty string, got {self.id!r}")
        if not self.name or not isinstance(self.name, str):
            self.name = self.id
        if self.kind not in PARAM_KINDS:
            raise ParamError(
                f"param {self.id!r}: unknown kind {self.kind!r} "
                f"(expected one of {', '.join(PARAM_KINDS)})")
        if self.kind in NUMERIC_KINDS:
            self._validate_numeric()
        else:
            self._validate_discrete()

    def _validate_numeric(self):
        pid = self.id
        for label, v in (("min", self.min), ("max", self.max)):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParamError(f"param {pid!r}: {label} must be a finite number, got {v!r}")
        if not self.min < self.max:
            raise ParamError(f"param {pid!r}: min {self.min} must be < max {self.max}")
        if self.choices is not None:
            raise ParamError(f"param {pid!r}: choices only apply to choice kind")
        if self.native_step is None:
            self.native_step = CONTINUOUS if self.kind == "real" else 1
        if self.kind == "integer":
            for label, v in (("min", self.min), ("max", self.max),
                             ("native_step", self.native_step)):
                if v == CONTINUOUS or v != int(v):
                    raise ParamError(
                        f"param {pid!r}: integer {label} must be a whole number, got {v!r}")
            self.min, self.max = int(self.min), int(self.max)
            self.native_step = int(self.native_step)
        elif self.native_step != CONTINUOUS:
            if isinstance(self.native_step, bool) or not isinstance(self.native_step, (int, float)):
                raise ParamError(f"param {pid!r}: native_step must be a number "
                                 f"or {CONTINUOUS!r}, got {self.native_step!r}")
            self.native_step = float(self.native_step)
        if self.native_step != CONTINUOUS and not 0 < self.native_step <= self.max - self.min:
            raise ParamError(f"param {pid!r}: native_step {self.native_step} outside "
                             f"(0, {self.max - self.min}]")
        if self.quantized_step is not None:
            if not isinstance(self.quantized_step, (int, float)) or self.quantized_step <= 0:
                raise ParamError(f"param {pid!r}: quantized_step must be > 0")
        if self.value is None:
            self.value = self.min
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise ParamError(f"param {pid!r}: value must be a number, got {self.value!r}")
        if not math.isfinite(self.value):
            raise ParamError(f"param {pid!r}: value must be finite")
        self.value = min(max(self.value, self.min), self.max)
        if self.kind == "integer":
            if self.value != int(self.value):
                raise ParamError(f"param {pid!r}: integer value must be whole, "
                                 f"got {self.value!r}")
            self.value = int(self.value)
        else:
            self.value = float(self.value)

    def _validate_discrete(self):
        pid = self.id
        for label, v in (("min", self.min), ("max", self.max),
                         ("native_step", self.native_step),
                         ("quantized_step", self.quantized_step)):
            if v is not None:
                raise ParamError(f"param {pid!r}: {label} does not apply to {self.kind}")
        if self.kind == "boolean":
            if self.choices is not None:
                raise ParamError(f"param {pid!r}: choices only apply to choice kind")
            if self.value is None:
                self.value = False
            if not isinstance(self.value, bool):
                raise ParamError(f"param {pid!r}: boolean value must be true/false")
        else:  # choice
            if (not isinstance(self.choices, list) or not self.choices
                    or not all(isinstance(c, str) and c for c in self.choices)):
                raise ParamError(f"param {pid!r}: choices must be a non-empty "
                                 "list of strings")
            if len(set(self.choices)) != len(self.choices):
                raise ParamError(f"param {pid!r}: duplicate choices")
            if self.value is None:
                self.value = self.choices[0]
            if self.value not in self.choices:
                raise ParamError(
                    f"param {pid!r}: value {self.value!r} not in choices {self.choices}")

    def announced(self, limit: int = DEFAULT_LIMIT) -> "ParamDescriptor":
        """A fresh descriptor with quantized_step filled and revision reset."""
        if self.kind in NUMERIC_KINDS:
            try:
                step = quantize(self.min, self.max, self.native_step, limit)
            except ParamError as exc:
                raise ParamError(f"param {self.id!r}: {exc}") from exc
        else:
            step = None
        return dataclasses.replace(self, quantized_step=step, revision=0)

    def selectable(self) -> list:
        """The values a quantized control may emit for this parameter."""
        if self.kind == "boolean":
            return [False, True]
        if self.kind == "choice":
            return list(self.choices)
        vals = selectable_values(self.min, self.max, self.quantized_step)
        if self.kind == "integer":
            return [int(round(v)) for v in vals]
        return vals

    def to_wire(self) -> dict:
        """JSON-ready announcement object (revision is internal bookkeeping)."""
        obj = {"id": self.id, "name": self.name, "kind": self.kind,
               "value": self.value}
        if self.kind in NUMERIC_KINDS:
            obj["min"] = self.min
            obj["max"] = self.max
            obj["native_step"] = self.native_step
            if self.quantized_step is not None:
                obj["quantized_step"] = self.quantized_step
        if self.kind == "choice":
            obj["choices"] = list(self.choices)
        return obj

    @classmethod
    def from_wire(cls, obj: dict) -> "ParamDescriptor":
        """Parse an announcement object, rejecting unknown or missing keys."""
        if not isinstance(obj, dict):
            raise ParamError(f"descriptor must be an object, got {type(obj).__name__}")
        allowed = {"id", "name", "kind", "value", "min", "max", "native_step",
                   "quantized_step", "choices"}
        unknown = set(obj) - allowed
        if unknown:
            raise ParamError(f"unknown descriptor field(s): {sorted(unknown)}")
        for key in ("id", "name", "kind", "value"):
            if key not in obj:
                raise ParamError(f"descriptor missing required field {key!r}")
        return cls(
            id=obj["id"], name=obj["name"], kind=obj["kind"],
            min=obj.get("min"), max=obj.get("max"),
            native_step=obj.get("native_step"), choices=obj.get("choices"),
            quantized_step=obj.get("quantized_step"), value=obj.get("value"),
        )

    @classmethod
    def from_seed(cls, obj: dict) -> "ParamDescriptor":
        """Parse a definition-file entry (a seed: no quantized_step/revision)."""
        if not isinstance(obj, dict):
            raise ParamError(f"param entry must be an object, got {type(obj).__name__}")
        allowed = {"id", "name", "kind", "value", "min", "max", "native_step",
                   "choices"}
        unknown = set(obj) - allowed
        if unknown:
            pid = obj.get("id", "?")
            raise ParamError(f"param {pid!r}: unknown field(s) {sorted(unknown)}")
        for key in ("id", "kind"):
            if key not in obj:
                raise ParamError(f"param entry missing required field {key!r}")
        return cls(
            id=obj["id"], name=obj.get("name", obj["id"]), kind=obj["kind"],
            min=obj.get("min"), max=obj.get("max"),
            native_step=obj.get("native_step"), choices=obj.get("choices"),
            value=obj.get("value"),
        )
