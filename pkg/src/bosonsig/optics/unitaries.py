"""Unitary ensembles: Haar-random matrices and phase-randomised coupler meshes."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..errors import InvalidArgument
from ..seeding import SeedLike, as_rng

UNITARITY_TOL = 1e-10

#: Symmetric 50:50 coupler acting on an adjacent mode pair.
COUPLER = np.array([[1.0, 1.0j], [1.0j, 1.0]], dtype=np.complex128) / np.sqrt(2.0)

Layout = list[list[tuple[int, int]]]


def unitarity_error(u: np.ndarray) -> float:
    """Max absolute entry of ``U U^dagger - I``."""
    u = np.asarray(u)
    return float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))


def check_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgument(f"unitary must be square, got shape {u.shape}")
    if u.shape[0] < 2:
        raise InvalidArgument("unitary dimension must be at least 2")
    err = unitarity_error(u)
    if err > tol:
        raise InvalidArgument(f"matrix is not unitary (max |UU^dagger - I| = {err:.3g})")
    return u


def haar_random_unitary(m: int, seed: SeedLike) -> np.ndarray:
    """Draw an ``m x m`` unitary from the Haar measure.

    QR-decomposes a complex Ginibre matrix and rescales each column of Q by
    the phase of the matching diagonal entry of R; without that correction the
    result is unitary but not Haar distributed.
    """
    if m < 2:
        raise InvalidArgument(f"mode count must be >= 2, got {m}")
    rng = as_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def default_layout(m: int = 7, steps: int = 5) -> Layout:
    """Alternating brick-wall of adjacent couplers.

    Odd steps couple (1,2), (3,4), ...; even steps couple (2,3), (4,5), ...
    On 7 modes the outermost modes are left unconnected at every other step.
    """
    if m < 2:
        raise InvalidArgument(f"mode count must be >= 2, got {m}")
    out: Layout = []
    for s in range(steps):
        first = 1 if s % 2 == 0 else 2
        out.append([(a, a + 1) for a in range(first, m, 2)])
    return out


def validate_layout(m: int, layout: Sequence[Sequence[Sequence[int]]]) -> Layout:
    clean: Layout = []
    for s, step in enumerate(layout):
        used: set[int] = set()
        row = []
        for pair in step:
            if len(pair) != 2:
                raise InvalidArgument(f"step {s + 1}: coupler {pair!r} must name two modes")
            a, b = (int(x) for x in pair)
            if a > b:
                a, b = b, a
            if not (1 <= a and b <= m):
                raise InvalidArgument(f"step {s + 1}: coupler ({a},{b}) outside modes 1..{m}")
            if b - a != 1:
                raise InvalidArgument(f"step {s + 1}: coupler ({a},{b}) is not on adjacent modes")
            if a in used or b in used:
                raise InvalidArgument(f"step {s + 1}: overlapping couplers on mode {a if a in used else b}")
            used.update((a, b))
            row.append((a, b))
        clean.append(row)
    return clean


def mesh_unitary(
    m: int,
    layout: Sequence[Sequence[Sequence[int]]],
    phases: Sequence[Sequence[float]] | None = None,
    phase_mode: str = "step",
) -> np.ndarray:
    """Compose a coupler mesh with explicit phases.

    With ``phase_mode="step"`` each step is preceded by a diagonal phase layer
    over all ``m`` modes (``phases[s]`` has length ``m``). With
    ``phase_mode="coupler"`` each coupler gets one phase on its lower-index
    arm (``phases[s]`` has one entry per coupler). ``phases=None`` means all
    zero.
    """
    layout = validate_layout(m, layout)
    if phase_mode not in ("step", "coupler"):
        raise InvalidArgument(f"unknown phase mode {phase_mode!r}")
    u = np.eye(m, dtype=np.complex128)
    for s, step in enumerate(layout):
        diag = np.ones(m, dtype=np.complex128)
        if phases is not None:
            ph = np.asarray(phases[s], dtype=np.float64)
            if phase_mode == "step":
                if ph.shape != (m,):
                    raise InvalidArgument(f"step {s + 1}: expected {m} phases, got {ph.shape}")
                diag = np.exp(1j * ph)
            else:
                if ph.shape != (len(step),):
                    raise InvalidArgument(f"step {s + 1}: expected {len(step)} phases, got {ph.shape}")
                for (a, _), phi in zip(step, ph):
                    diag[a - 1] = np.exp(1j * phi)
        layer = np.diag(diag)
        for a, b in step:
            block = np.eye(m, dtype=np.complex128)
            block[a - 1 : b, a - 1 : b] = COUPLER
            layer = block @ layer
        u = layer @ u
    return u


def structured_random_unitary(
    m: int,
    layout: Sequence[Sequence[Sequence[int]]] | None,
    seed: SeedLike,
    phase_mode: str = "step",
) -> np.ndarray:
    """Mesh unitary with every internal phase uniform in ``[0, 2 pi)``."""
    if m < 2:
        raise InvalidArgument(f"mode count must be >= 2, got {m}")
    layout = validate_layout(m, default_layout(m) if layout is None else layout)
    rng = as_rng(seed)
    if phase_mode == "step":
        phases = [rng.uniform(0.0, 2 * np.pi, size=m) for _ in layout]
    elif phase_mode == "coupler":
        phases = [rng.uniform(0.0, 2 * np.pi, size=len(step)) for step in layout]
    else:
        raise InvalidArgument(f"unknown phase mode {phase_mode!r}")
    return mesh_unitary(m, layout, phases, phase_mode)
