"""Windowed multichannel signal segments, the unit of classification and labeling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class Window:
    """One fixed-length segment of multichannel signal, optionally labeled.

    `channels` has shape (n_channels, length). Label 0 is the calm/neutral
    class, label 1 the stressed class; None marks an unlabeled pool window.
    """

    id: str
    channels: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float32)
        if self.channels.ndim != 2:
            raise ValueError(
                f"window {self.id!r}: channels must be 2-D (channels x time), "
                f"got shape {self.channels.shape}"
            )
        if not np.all(np.isfinite(self.channels)):
            raise ValueError(f"window {self.id!r}: non-finite sample values")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"window {self.id!r}: label must be 0, 1 or None, got {self.label!r}")

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def length(self) -> int:
        return self.channels.shape[1]

    def with_label(self, label: int) -> "Window":
        return Window(self.id, self.channels, label)

    def without_label(self) -> "Window":
        return Window(self.id, self.channels, None)
