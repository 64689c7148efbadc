"""Empirical laws and distances used by the fluctuation experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

__all__ = [
    "EmpiricalDistribution",
    "KSResult",
    "ks_normal",
    "ks_midpoint",
    "bounded_lipschitz_gap",
    "moment_gaps",
]


@dataclass
class EmpiricalDistribution:
    """Law given by equally weighted complex samples.

    The summary (mean, ``E|x - mean|^2`` and the covariance of the real and
    imaginary parts) is always recomputed from ``samples``.
    """

    samples: np.ndarray
    bins: int = 60
    _summary: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples)

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.samples) or bool(np.all(self.samples.imag == 0))

    @property
    def real(self) -> np.ndarray:
        return np.real(self.samples).astype(float)

    @property
    def imag(self) -> np.ndarray:
        return np.imag(self.samples).astype(float)

    def summary(self) -> dict:
        if self._summary is None:
            re, im = self.real, self.imag
            mean = complex(re.mean(), im.mean()) if self.n else 0j
            cov = np.cov(np.vstack([re, im]), bias=True) if self.n else np.zeros((2, 2))
            self._summary = {
                "n": self.n,
                "mean": mean if not self.is_real else mean.real,
                "variance": float(cov[0, 0] + cov[1, 1]),
                "second_moment": float(np.mean(re**2 + im**2)) if self.n else 0.0,
                "covariance": cov.tolist(),
                "min_re": float(re.min()) if self.n else 0.0,
                "max_re": float(re.max()) if self.n else 0.0,
                "max_abs": float(np.max(np.abs(self.samples))) if self.n else 0.0,
            }
        return self._summary

    def histogram(self, bins: int | None = None, part: str = "re") -> list[tuple[float, float, int]]:
        """``(bin_lo, bin_hi, count)`` rows for the real or imaginary part."""
        x = self.real if part == "re" else self.imag
        lo, hi = (float(x.min()), float(x.max())) if self.n else (0.0, 0.0)
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(x, bins=bins or self.bins, range=(lo, hi))
        return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]

    def affine(self, shift, scale) -> "EmpiricalDistribution":
        """Law of ``(x - shift) / scale``."""
        return EmpiricalDistribution((self.samples - shift) / scale, self.bins)

    def to_dict(self) -> dict:
        return {"summary": self.summary()}


@dataclass
class KSResult:
    """Sup-gap between an empirical CDF and a normal reference.

    ``reference`` is ``"std_normal_real"`` or ``"std_normal_complex_parts"``;
    in the complex case the statistic is the larger of the two parts.
    """

    statistic: float
    n_samples: int
    reference: str
    parts: dict | None = None

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "n_samples": self.n_samples, "reference": self.reference, "parts": self.parts}


def _ks_real(x: np.ndarray, scale: float = 1.0) -> float:
    if x.size == 0:
        return 0.0
    if scale <= 0:
        raise ValueError("reference scale must be positive")
    return float(sps.kstest(x, "norm", args=(0.0, scale), method="asymp").statistic)


def ks_normal(dist: EmpiricalDistribution, gamma=None) -> KSResult:
    """KS statistic of an already normalized law against a centered normal.

    For real laws the reference is N(0, 1). For complex laws ``gamma`` is
    the covariance of ``(Re, Im)`` (identity/2 by default) and each part is
    compared with its own marginal.
    """
    if dist.is_real:
        return KSResult(_ks_real(dist.real), dist.n, "std_normal_real")
    if gamma is None:
        gamma = [[0.5, 0.0], [0.0, 0.5]]
    ks_re = _ks_real(dist.real, float(np.sqrt(gamma[0][0])))
    ks_im = _ks_real(dist.imag, float(np.sqrt(gamma[1][1]))) if gamma[1][1] > 0 else 0.0
    return KSResult(max(ks_re, ks_im), dist.n, "std_normal_complex_parts", {"re": ks_re, "im": ks_im})


def ks_midpoint(x: np.ndarray) -> float:
    """KS distance to N(0, 1) using mid-CDF values at atoms.

    For lattice-valued samples the ordinary statistic carries a floor of
    roughly half the largest atom; comparing the normal CDF with the
    average of the left and right empirical limits removes most of it.
    Reported as a diagnostic only.
    """
    x = np.sort(np.asarray(x, dtype=float))
    if x.size == 0:
        return 0.0
    vals, first = np.unique(x, return_index=True)
    counts = np.diff(np.append(first, x.size))
    right = np.cumsum(counts) / x.size
    left = right - counts / x.size
    mid = (left + right) / 2
    return float(np.max(np.abs(mid - sps.norm.cdf(vals))))


def bounded_lipschitz_gap(x: np.ndarray, y: np.ndarray, grid: int = 201, widths=(0.25, 0.5, 1.0)) -> dict:
    """Lower estimate of the bounded-Lipschitz distance of two real laws.

    Takes the supremum of ``|E h(X) - E h(Y)|`` over hat functions
    ``h(t) = max(0, w - |t - c|)`` (1-Lipschitz, bounded by ``w <= 1``)
    with centers ``c`` on a uniform grid over the joint span.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo = min(x.min(), y.min()) - max(widths)
    hi = max(x.max(), y.max()) + max(widths)
    centers = np.linspace(lo, hi, grid)
    best = 0.0
    xs, ys = np.sort(x), np.sort(y)
    for w in widths:
        for c in centers:
            ex_ = _hat_mean(xs, c, w)
            ey_ = _hat_mean(ys, c, w)
            best = max(best, abs(ex_ - ey_))
    return {"estimate": best, "span": [float(lo), float(hi)], "grid": grid, "widths": list(widths)}


def _hat_mean(sorted_x: np.ndarray, c: float, w: float) -> float:
    i0, i1 = np.searchsorted(sorted_x, [c - w, c + w])
    seg = sorted_x[i0:i1]
    return float(np.sum(w - np.abs(seg - c)) / sorted_x.size)


def moment_gaps(x: np.ndarray, y: np.ndarray) -> dict:
    """Gaps in ``E X`` and ``E|X|^2`` between two samples."""
    x = np.asarray(x)
    y = np.asarray(y)
    m1 = abs(complex(np.mean(x)) - complex(np.mean(y)))
    m2 = abs(float(np.mean(np.abs(x) ** 2)) - float(np.mean(np.abs(y) ** 2)))
    return {"first": m1, "second": m2}
