"""Regenerate the bundled 112x112 portrait corpus from scikit-image sample data.

Run once from the repository root; outputs are committed under
``src/duetface/data/corpus``.  Needs scikit-image, which the package itself
does not import.
"""
from pathlib import Path

import numpy as np
import skimage
import skimage.data
from PIL import Image

from duetface.facial_roi import synthetic_landmarks, write_landmarks

OUT = Path(__file__).resolve().parents[1] / "src" / "duetface" / "data" / "corpus"
SIZE = 112


def crop(img, x0, y0, side):
    return img[y0:y0 + side, x0:x0 + side]


def to_rgb(img):
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    return img


def resize(img):
    return np.asarray(Image.fromarray(to_rgb(img)).resize((SIZE, SIZE), Image.LANCZOS))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    astronaut = skimage.data.astronaut()
    lfw = np.load(Path(skimage.__file__).parent / "data" / "lfw_subset.npy")
    images = {
        "astronaut_face": crop(astronaut, 140, 10, 180),
        "astronaut_bust": crop(astronaut, 60, 0, 320),
        "astronaut_flip": crop(astronaut, 140, 10, 180)[:, ::-1],
        "cameraman": crop(skimage.data.camera(), 140, 50, 150),
        "chelsea": crop(skimage.data.chelsea(), 60, 0, 300),
    }
    for i in (0, 1, 2):
        images[f"lfw_{i:03d}"] = (lfw[i] * 255).round().astype(np.uint8)
    for name, img in images.items():
        Image.fromarray(resize(np.ascontiguousarray(img))).save(OUT / f"{name}.ppm", format="PPM")
        write_landmarks(OUT / f"{name}.landmarks.txt", synthetic_landmarks())
        print("wrote", name)


if __name__ == "__main__":
    main()
