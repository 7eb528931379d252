from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qops import DensityMatrix, HilbertSpace


@dataclass
class Trajectory:
    """Sampled time evolution: optional stacked states plus named scalar series.

    ``states`` has shape ``(len(times), D, D)`` when present.
    """

    times: np.ndarray
    states: np.ndarray | None = None
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    space: HilbertSpace | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if np.any(self.times < 0):
            raise ValueError("times must be nonnegative")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        n = len(self.times)
        if self.states is not None:
            self.states = np.asarray(self.states)
            if self.states.ndim != 3 or self.states.shape[0] != n:
                raise ValueError("states must have shape (len(times), D, D)")
        for name, series in list(self.observables.items()):
            series = np.asarray(series)
            if series.shape != (n,):
                raise ValueError(f"observable {name!r} has {series.shape[0]} samples, expected {n}")
            self.observables[name] = series

    def __len__(self) -> int:
        return len(self.times)

    def density_matrices(self) -> list[DensityMatrix]:
        if self.states is None or self.space is None:
            raise ValueError("trajectory carries no states")
        return [DensityMatrix(self.space, 0.5 * (s + s.conj().T)) for s in self.states]

    def diagnostics(self) -> dict[str, float]:
        """Worst-case Hermiticity, trace and positivity deviations over all samples."""
        if self.states is None:
            raise ValueError("trajectory carries no states")
        s = self.states
        herm = float(np.max(np.abs(s - np.conj(np.swapaxes(s, 1, 2)))))
        tr = float(np.max(np.abs(np.trace(s, axis1=1, axis2=2) - 1.0)))
        herm_part = 0.5 * (s + np.conj(np.swapaxes(s, 1, 2)))
        min_eig = float(np.min(np.linalg.eigvalsh(herm_part)[:, 0]))
        return {"hermiticity": herm, "trace": tr, "min_eigenvalue": min_eig}
