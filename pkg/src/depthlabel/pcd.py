"""Organized PCD v0.7 reader and writer.

Supported layout is deliberately narrow: FIELDS ``x y z`` or ``x y z rgb``,
SIZE 4 for every field, TYPE F for the coordinates and F or U for rgb, and
DATA ascii or binary. rgb is one 32-bit value packed ``0x00RRGGBB`` (the
F-typed variant carries the same bits reinterpreted as a float, which is
what PCL emits). Files must be organized: HEIGHT 1 is rejected.

Writing uses binary bodies by default and stores coordinates as little-
endian float32; ASCII bodies print 9 significant digits so float32 values
survive a round trip bit for bit.
"""

from __future__ import annotations

import numpy as np

from .cloud import OrganizedCloud

_HEADER_KEYS = ("VERSION", "FIELDS", "SIZE", "TYPE", "COUNT", "WIDTH",
                "HEIGHT", "VIEWPOINT", "POINTS", "DATA")


class PCDFormatError(ValueError):
    """Malformed or unsupported PCD content; message carries file position."""


def _fail(path, what, line=None, offset=None):
    where = f"{path}"
    if line is not None:
        where += f":{line}"
    if offset is not None:
        where += f" (byte offset {offset})"
    raise PCDFormatError(f"{where}: {what}")


def _pack_rgb(color: np.ndarray) -> np.ndarray:
    r = color[:, :, 0].astype(np.uint32)
    g = color[:, :, 1].astype(np.uint32)
    b = color[:, :, 2].astype(np.uint32)
    return (r << 16) | (g << 8) | b


def _unpack_rgb(packed: np.ndarray) -> np.ndarray:
    out = np.empty(packed.shape + (3,), dtype=np.uint8)
    out[..., 0] = (packed >> 16) & 0xFF
    out[..., 1] = (packed >> 8) & 0xFF
    out[..., 2] = packed & 0xFF
    return out


def save_cloud(cloud: OrganizedCloud, path, data: str = "binary") -> None:
    """Write an organized cloud as PCD v0.7.

    Coordinates are stored as float32 regardless of the in-memory dtype;
    color, when present, becomes a U-typed packed rgb field.
    """
    if data not in ("binary", "ascii"):
        raise ValueError(f"data must be 'binary' or 'ascii', got {data!r}")
    has_rgb = cloud.color is not None
    fields = "x y z rgb" if has_rgb else "x y z"
    sizes = "4 4 4 4" if has_rgb else "4 4 4"
    types = "F F F U" if has_rgb else "F F F"
    counts = "1 1 1 1" if has_rgb else "1 1 1"
    n = cloud.width * cloud.height
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        f"FIELDS {fields}\n"
        f"SIZE {sizes}\n"
        f"TYPE {types}\n"
        f"COUNT {counts}\n"
        f"WIDTH {cloud.width}\n"
        f"HEIGHT {cloud.height}\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
        f"DATA {data}\n"
    )
    xyz = cloud.points.reshape(n, 3).astype("<f4")
    rgb = _pack_rgb(cloud.color).reshape(n).astype("<u4") if has_rgb else None
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if data == "binary":
            if has_rgb:
                rec = np.empty(n, dtype=[("x", "<f4"), ("y", "<f4"),
                                         ("z", "<f4"), ("rgb", "<u4")])
            else:
                rec = np.empty(n, dtype=[("x", "<f4"), ("y", "<f4"),
                                         ("z", "<f4")])
            rec["x"], rec["y"], rec["z"] = xyz[:, 0], xyz[:, 1], xyz[:, 2]
            if has_rgb:
                rec["rgb"] = rgb
            fh.write(rec.tobytes())
        else:
            lines = []
            for i in range(n):
                coords = " ".join("%.9g" % float(c) for c in xyz[i])
                if has_rgb:
                    lines.append(f"{coords} {int(rgb[i])}")
                else:
                    lines.append(coords)
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


def load_cloud(path) -> OrganizedCloud:
    """Read an organized PCD file into an :class:`OrganizedCloud`.

    Raises :class:`PCDFormatError` for malformed headers, unsupported field
    layouts, unorganized clouds, and truncated bodies; the message names the
    offending line or byte offset.
    """
    with open(path, "rb") as fh:
        raw = fh.read()

    meta: dict[str, str] = {}
    pos = 0
    line_no = 0
    while pos < len(raw):
        eol = raw.find(b"\n", pos)
        if eol < 0:
            _fail(path, "header ended before DATA line", line=line_no + 1)
        line_no += 1
        try:
            line = raw[pos:eol].decode("ascii").strip()
        except UnicodeDecodeError:
            _fail(path, "non-ASCII bytes in header", line=line_no)
        pos = eol + 1
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        key = key.upper()
        if key not in _HEADER_KEYS:
            _fail(path, f"unknown header entry {key!r}", line=line_no)
        meta[key] = value.strip()
        if key == "DATA":
            break
    else:
        _fail(path, "missing DATA line", line=line_no)

    for required in ("FIELDS", "WIDTH", "HEIGHT", "DATA"):
        if required not in meta:
            _fail(path, f"missing {required} header entry", line=line_no)

    fields = meta["FIELDS"].split()
    if fields == ["x", "y", "z"]:
        has_rgb = False
    elif fields == ["x", "y", "z", "rgb"]:
        has_rgb = True
    else:
        _fail(path, f"unsupported field layout {fields} "
                    "(expected 'x y z' or 'x y z rgb')", line=line_no)
    nfields = 4 if has_rgb else 3

    if "SIZE" in meta and meta["SIZE"].split() != ["4"] * nfields:
        _fail(path, f"unsupported SIZE {meta['SIZE']!r} (all fields must be "
                    "4 bytes)", line=line_no)
    types = meta.get("TYPE", "F F F U" if has_rgb else "F F F").split()
    if len(types) != nfields or types[:3] != ["F", "F", "F"] or \
            (has_rgb and types[3] not in ("F", "U")):
        _fail(path, f"unsupported TYPE {meta.get('TYPE')!r}", line=line_no)
    rgb_is_float = has_rgb and types[3] == "F"
    if "COUNT" in meta and meta["COUNT"].split() != ["1"] * nfields:
        _fail(path, f"unsupported COUNT {meta['COUNT']!r}", line=line_no)

    try:
        width = int(meta["WIDTH"])
        height = int(meta["HEIGHT"])
    except ValueError:
        _fail(path, "WIDTH/HEIGHT are not integers", line=line_no)
    if width <= 0 or height <= 0:
        _fail(path, f"non-positive grid {width}x{height}", line=line_no)
    if height == 1:
        _fail(path, "unorganized cloud (HEIGHT 1); this reader handles "
                    "organized grids only", line=line_no)
    n = width * height
    if "POINTS" in meta and meta["POINTS"] != str(n):
        _fail(path, f"POINTS {meta['POINTS']} does not equal "
                    f"WIDTH*HEIGHT = {n}", line=line_no)

    mode = meta["DATA"].lower()
    if mode == "binary":
        point_bytes = 4 * nfields
        body = raw[pos:]
        if len(body) < n * point_bytes:
            _fail(path, f"truncated binary body: expected {n * point_bytes} "
                        f"bytes, found {len(body)}", offset=pos + len(body))
        if has_rgb:
            rec = np.frombuffer(body, dtype=[("x", "<f4"), ("y", "<f4"),
                                             ("z", "<f4"), ("rgb", "<u4")],
                                count=n)
        else:
            rec = np.frombuffer(body, dtype=[("x", "<f4"), ("y", "<f4"),
                                             ("z", "<f4")], count=n)
        xyz = np.stack([rec["x"], rec["y"], rec["z"]], axis=1)
        packed = rec["rgb"].copy() if has_rgb else None
    elif mode == "ascii":
        text = raw[pos:].decode("ascii", errors="replace").splitlines()
        rows = [(line_no + i + 1, ln.strip()) for i, ln in enumerate(text)
                if ln.strip()]
        if len(rows) < n:
            _fail(path, f"truncated ascii body: expected {n} points, found "
                        f"{len(rows)}", line=line_no + len(text))
        xyz = np.empty((n, 3), dtype=np.float32)
        packed = np.empty(n, dtype=np.uint32) if has_rgb else None
        for i in range(n):
            lno, ln = rows[i]
            parts = ln.split()
            if len(parts) != nfields:
                _fail(path, f"expected {nfields} values, found {len(parts)}",
                      line=lno)
            try:
                xyz[i] = [np.float32(float(p)) for p in parts[:3]]
                if has_rgb:
                    if rgb_is_float:
                        packed[i] = np.float32(float(parts[3])).view(np.uint32)
                    else:
                        packed[i] = int(parts[3])
            except (ValueError, OverflowError):
                _fail(path, f"unparseable point data {ln!r}", line=lno)
    else:
        _fail(path, f"unsupported DATA mode {meta['DATA']!r}", line=line_no)

    points = xyz.reshape(height, width, 3)
    color = _unpack_rgb(packed.reshape(height, width)) if has_rgb else None
    return OrganizedCloud(points, color=color, frame_id=str(path))
