"""Print the partition size and worst pair alignment for a few coverage levels."""

import math

from activeloc import find_svp

for n in (2, 3):
    for alpha in (0.5, 0.7, math.sqrt(3.0) / 2.0):
        s = find_svp(alpha, n)
        print(f"n = {n}  alpha = {alpha:.4f}  N = {s.N:3d}  eta = {s.eta:.6f}  certificate = {s.certificate}")
