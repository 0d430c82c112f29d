"""PNG helpers: 16-bit label/depth images, 8-bit masks, RGB images.

Label and depth images are single-channel 16-bit PNGs; masks are 8-bit.
All writers round-trip bit for bit.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def write_label_png(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label image must be 2D, got shape {labels.shape}")
    Image.fromarray(labels.astype(np.uint16)).save(path, format="PNG")


def read_label_png(path) -> np.ndarray:
    """Read a 16-bit (or 8-bit) single-channel label PNG as uint16."""
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I", "L"):
            raise ValueError(
                f"{path}: expected single-channel label image, got mode {img.mode}")
        arr = np.asarray(img)
    if arr.max(initial=0) > 0xFFFF or arr.min(initial=0) < 0:
        raise ValueError(f"{path}: label values outside uint16 range")
    return arr.astype(np.uint16)


# Depth images use the same container: value = millimeters, 0 = invalid.
write_depth_png = write_label_png
read_depth_png = read_label_png


def write_mask_png(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask image must be 2D, got shape {mask.shape}")
    Image.fromarray(mask.astype(np.uint8), mode="L").save(path, format="PNG")


def read_mask_png(path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(f"{path}: expected 8-bit mask, got mode {img.mode}")
        return np.asarray(img).copy()


def write_color_png(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"color image must be (h, w, 3), got shape {rgb.shape}")
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(path, format="PNG")


def read_color_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB")).copy()
