"""Access to datasets bundled with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .bundle import Bundle, read_bundle


def uci_sample_path() -> Path:
    """Directory of the bundled `uci-sample` mini-dataset."""
    return Path(str(resources.files("dfqa").joinpath("data/uci_sample")))


def load_uci_sample() -> Bundle:
    return read_bundle(uci_sample_path())
