"""Finite-difference stencils on uniform grids.

Interior points use fourth-order central stencils; the two points at each
end fall back to second-order one-sided/central stencils and are treated
as untrusted by every consumer that fits or compares values.
"""

import numpy as np

# Width of the untrusted boundary margin, in grid points.
MARGIN = 2


def spacing(grid: np.ndarray) -> float:
    """Spacing of a uniform grid, validating uniformity to 1e-12 relative."""
    d = np.diff(grid)
    h = d[0]
    if h <= 0 or not np.allclose(d, h, rtol=1e-12, atol=0):
        raise ValueError("grid must be strictly increasing and uniform")
    return float(h)


def deriv1(f: np.ndarray, h: float) -> np.ndarray:
    """First derivative: 4th-order central interior, 2nd-order edges."""
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    d[1] = (f[2] - f[0]) / (2.0 * h)
    d[-2] = (f[-1] - f[-3]) / (2.0 * h)
    d[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return d


def deriv2(f: np.ndarray, h: float) -> np.ndarray:
    """Second derivative: 4th-order central interior, 2nd-order edges."""
    h2 = h * h
    d = np.empty_like(f)
    d[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2]
               + 16.0 * f[3:-1] - f[4:]) / (12.0 * h2)
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
    d[1] = (f[0] - 2.0 * f[1] + f[2]) / h2
    d[-2] = (f[-3] - 2.0 * f[-2] + f[-1]) / h2
    d[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    return d


def untrusted_mask(n: int) -> np.ndarray:
    """Boolean mask marking the boundary margin of an n-point grid."""
    m = np.zeros(n, dtype=bool)
    m[:MARGIN] = True
    m[n - MARGIN:] = True
    return m
