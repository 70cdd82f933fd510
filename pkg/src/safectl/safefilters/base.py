"""Safety-filter interface: a filter maps a proposed input to a safe one."""

from __future__ import annotations

import numpy as np


class SafetyFilter:
    name = "filter"

    def reset(self, reset_info, seed: int = 0, episode: int = 0) -> None:
        self.info = reset_info
        self.n_modified = 0
        self.n_calls = 0

    def filter(self, obs, u_proposed, step: int):  # pragma: no cover - interface
        """Return ``(u_safe, modified)``."""
        raise NotImplementedError

    def __call__(self, obs, u_proposed, step: int) -> np.ndarray:
        u, modified = self.filter(obs, u_proposed, step)
        self.n_calls += 1
        self.n_modified += int(modified)
        self.last_modified = bool(modified)
        return u

    def diagnostics(self) -> dict:
        return {"filter_calls": self.n_calls, "filter_modified": self.n_modified}
