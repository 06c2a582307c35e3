"""Bundled 112x112 portrait corpus with landmark sidecars."""
from __future__ import annotations

from importlib import resources
from pathlib import Path


def corpus_dir() -> Path:
    return Path(str(resources.files("duetface") / "data" / "corpus"))


def corpus_images(directory: str | Path | None = None) -> list[Path]:
    directory = Path(directory) if directory is not None else corpus_dir()
    return sorted(directory.glob("*.ppm"))


def landmarks_for(image: str | Path) -> Path:
    image = Path(image)
    return image.with_name(image.stem + ".landmarks.txt")
