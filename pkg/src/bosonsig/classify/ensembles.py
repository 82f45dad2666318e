"""Unitary ensembles used to build clouds."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from ..optics.unitaries import default_layout, haar_random_unitary, structured_random_unitary, validate_layout
from ..seeding import derive_rng


@dataclass(frozen=True)
class Ensemble:
    """Where a cloud's unitaries come from.

    ``kind`` is ``"haar"``, ``"structured"`` (a phase-randomised coupler mesh)
    or ``"identity"`` (a degenerate stub for tests). Structured ensembles draw
    a fresh input state per matrix unless ``vary_input`` is off.
    """

    kind: str = "haar"
    layout: tuple | None = None
    layout_name: str = "default7"
    phase_mode: str = "step"
    vary_input: bool | None = None

    def __post_init__(self):
        if self.kind not in ("haar", "structured", "identity"):
            raise InvalidArgument(f"unknown ensemble kind {self.kind!r}")

    @property
    def tag(self) -> str:
        if self.kind == "structured":
            suffix = "" if self.phase_mode == "step" else f"/{self.phase_mode}"
            return f"structured:{self.layout_name}{suffix}"
        return self.kind

    @property
    def varies_input(self) -> bool:
        return self.kind == "structured" if self.vary_input is None else bool(self.vary_input)

    def draw(self, m: int, n: int, master: int, index: int, stream: str = "") -> tuple[np.ndarray, tuple[int, ...] | None]:
        """Unitary number ``index`` and, when inputs vary, its input modes."""
        rng = derive_rng(master, self.tag, stream, index)
        if self.kind == "haar":
            u = haar_random_unitary(m, rng)
        elif self.kind == "structured":
            layout = default_layout(m) if self.layout is None else [list(step) for step in self.layout]
            u = structured_random_unitary(m, layout, rng, self.phase_mode)
        else:
            u = np.eye(m, dtype=np.complex128)
        modes = None
        if self.varies_input:
            modes = tuple(int(x) + 1 for x in np.sort(rng.choice(m, size=n, replace=False)))
        return u, modes


def parse_ensemble(spec: str, layout_json: str | None = None, phase_mode: str = "step") -> Ensemble:
    """``"haar"``, ``"identity"``, ``"structured"`` or ``"structured:default7"``.

    A custom mesh comes in as ``layout_json`` (a JSON list of steps of mode
    pairs); the ensemble is then named after its content hash.
    """
    kind, _, name = spec.partition(":")
    if kind != "structured":
        if name:
            raise InvalidArgument(f"ensemble {spec!r} takes no layout")
        return Ensemble(kind=kind)
    if layout_json is None:
        if name not in ("", "default7", "default"):
            raise InvalidArgument(f"unknown built-in layout {name!r}")
        return Ensemble(kind="structured", phase_mode=phase_mode)
    steps = json.loads(layout_json)
    if not isinstance(steps, list):
        raise InvalidArgument("layout must be a JSON list of steps")
    flat = tuple(tuple(tuple(int(x) for x in pair) for pair in step) for step in steps)
    digest = hashlib.sha256(json.dumps(steps).encode()).hexdigest()[:12]
    return Ensemble(kind="structured", layout=flat, layout_name=name or f"custom-{digest}", phase_mode=phase_mode)


def check_layout_for(ensemble: Ensemble, m: int) -> None:
    if ensemble.kind == "structured" and ensemble.layout is not None:
        validate_layout(m, ensemble.layout)
