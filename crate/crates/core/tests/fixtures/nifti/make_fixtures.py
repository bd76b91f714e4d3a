"""Writes the small NIfTI-1 files used by the reader tests.

Headers are packed field by field with `struct`; voxel values follow the
formulas repeated in the Rust tests.
"""
import struct
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def header(shape, dtype_code, bitpix, spacing, origin):
    h = bytearray(348)
    struct.pack_into("<i", h, 0, 348)
    struct.pack_into("<8h", h, 40, 3, *shape, 1, 1, 1, 1)
    struct.pack_into("<h", h, 70, dtype_code)
    struct.pack_into("<h", h, 72, bitpix)
    struct.pack_into("<8f", h, 76, 1.0, *spacing, 0, 0, 0, 0)
    struct.pack_into("<f", h, 108, 352.0)
    struct.pack_into("<f", h, 112, 1.0)
    struct.pack_into("<B", h, 123, 2)  # mm
    struct.pack_into("<h", h, 252, 1)
    struct.pack_into("<h", h, 254, 1)
    struct.pack_into("<3f", h, 268, *origin)
    struct.pack_into("<4f", h, 280, spacing[0], 0, 0, origin[0])
    struct.pack_into("<4f", h, 296, 0, spacing[1], 0, origin[1])
    struct.pack_into("<4f", h, 312, 0, 0, spacing[2], origin[2])
    h[344:348] = b"n+1\0"
    return bytes(h) + b"\0\0\0\0"


def grid(shape):
    # x fastest
    z, y, x = np.meshgrid(*(np.arange(n) for n in shape[::-1]), indexing="ij")
    return x.ravel(), y.ravel(), z.ravel()


def write(name, shape, code, bitpix, spacing, origin, values):
    (HERE / name).write_bytes(header(shape, code, bitpix, spacing, origin) + values.tobytes())


shape = (5, 4, 3)
x, y, z = grid(shape)
labels = np.array([0, 1, 2, 4], dtype="<u1")[(x + 2 * y + 3 * z) % 4]
write("labels_u8.nii", shape, 2, 8, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), labels)

shape = (6, 5, 4)
x, y, z = grid(shape)
t1 = (x - 2 * y + 100 * z - 50).astype("<i2")
write("t1_i16.nii", shape, 4, 16, (0.9375, 0.9375, 1.5), (-90.0, 126.0, -72.0), t1)

shape = (7, 3, 2)
x, y, z = grid(shape)
i = x + 7 * (y + 3 * z)
flair = (0.25 * i - 3.0).astype("<f4")
write("flair_f32.nii", shape, 16, 32, (1.25, 0.5, 2.5), (-10.0, 20.5, 3.0), flair)
