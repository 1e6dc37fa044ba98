"""Regenerate the synthetic EMB1 fixtures used by the integration tests.

EMB1: b"EMB1", u32 rows, u32 cols, rows*cols f32, all little endian.
"""

import struct

import numpy as np


def write_emb1(path, m):
    m = np.asarray(m, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"EMB1")
        f.write(struct.pack("<II", *m.shape))
        f.write(m.tobytes())


rng = np.random.default_rng(20240601)
write_emb1("gauss_500x16.emb1", rng.standard_normal((500, 16)))
write_emb1("gauss_shift_500x16.emb1", 0.5 + 1.5 * rng.standard_normal((500, 16)))
write_emb1("line_a_400x1.emb1", 2.0 + 3.0 * rng.standard_normal((400, 1)))
write_emb1("line_b_300x1.emb1", -1.0 + 0.5 * rng.standard_normal((300, 1)))
write_emb1("cloud_1000x8.emb1", rng.standard_normal((1000, 8)))
# unit variance, centers 100 standard deviations apart
write_emb1("cloud_far_1000x8.emb1", 100.0 + rng.standard_normal((1000, 8)))
