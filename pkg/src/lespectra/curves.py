"""Spectral curves ``mu(lambda) = anchor^(p+1) / lambda^p`` and region queries."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import Field

ON_CURVE_RTOL = 1e-9


@dataclass(frozen=True)
class SpectralCurve:
    anchor: float
    p: float
    label: str = "plus"

    def __post_init__(self):
        if not self.anchor > 0 or not self.p > 0:
            raise ValueError("anchor and p must be positive")
        if self.label not in ("plus", "minus", "second"):
            raise ValueError(f"unknown curve label {self.label!r}")


def curve_mu(c: SpectralCurve, lam: float) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return c.anchor ** (c.p + 1) / lam**c.p


def anchor_recovery(lam: float, mu: float, p: float) -> float:
    """Diagonal eigenvalue of the curve through ``(lam, mu)``."""
    if not (lam > 0 and mu > 0 and p > 0):
        raise ValueError("lambda, mu and p must be positive")
    return (mu * lam**p) ** (1.0 / (p + 1))


def scaling_map(u0: Field, v0: Field, lam0: float, lam: float, p: float) -> tuple[Field, Field, float]:
    """Move a diagonal solution at ``lam0`` to the curve point with first parameter ``lam``."""
    if not (lam0 > 0 and lam > 0):
        raise ValueError("parameters must be positive")
    return u0, v0 * (lam0 / lam) ** p, lam0 ** (p + 1) / lam**p


@dataclass(frozen=True)
class RegionVerdict:
    in_C1_plus: bool
    in_C1_minus: bool
    on_Lambda1_plus: bool
    on_Lambda1_minus: bool
    between_M1_and_Lambda2: bool
    outside_first_quadrant: bool
    mp_holds: bool
    mP_holds: bool

    def to_json(self) -> dict:
        return asdict(self)


def _position(lam: float, mu: float, c: SpectralCurve) -> int:
    """-1 below, 0 on, +1 above the curve."""
    a = anchor_recovery(lam, mu, c.p)
    if abs(a - c.anchor) <= ON_CURVE_RTOL * c.anchor:
        return 0
    return -1 if a < c.anchor else 1


def classify(lam: float, mu: float, plus: SpectralCurve, minus: SpectralCurve, second: SpectralCurve | None = None) -> RegionVerdict:
    """Region flags of ``(lam, mu)``.

    ``mp_holds`` / ``mP_holds`` predict the sign principles: they hold on the
    closure of ``C1+`` (resp. ``C1-``) minus the curve itself, which includes
    the nonnegative half axes.
    """
    curves = [plus, minus] + ([second] if second else [])
    if len({c.p for c in curves}) != 1:
        raise ValueError("curves have different exponents")
    outside = lam <= 0 or mu <= 0
    if lam < 0 or mu < 0:
        return RegionVerdict(False, False, False, False, False, True, False, False)
    if outside:  # on a nonnegative half axis
        return RegionVerdict(False, False, False, False, False, True, True, True)
    pp, pm = _position(lam, mu, plus), _position(lam, mu, minus)
    between = False
    if second is not None:
        big = plus if plus.anchor >= minus.anchor else minus
        between = _position(lam, mu, big) > 0 and _position(lam, mu, second) < 0
    return RegionVerdict(pp < 0, pm < 0, pp == 0, pm == 0, between, False, pp < 0, pm < 0)


def sample_curve(c: SpectralCurve, lam_min: float, lam_max: float, n: int) -> np.ndarray:
    """``n`` log-spaced rows ``(lambda, mu)``."""
    if not (0 < lam_min < lam_max) or n < 2:
        raise ValueError("need 0 < lam_min < lam_max and n >= 2")
    lam = np.geomspace(lam_min, lam_max, n)
    return np.column_stack([lam, c.anchor ** (c.p + 1) / lam**c.p])


def write_curves_csv(path, curves: list[SpectralCurve], lam_min: float, lam_max: float, n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "mu", "label"])
        for c in curves:
            for lam, mu in sample_curve(c, lam_min, lam_max, n):
                w.writerow([format(lam, ".17g"), format(mu, ".17g"), c.label])
