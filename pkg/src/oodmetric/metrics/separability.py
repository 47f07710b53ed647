r"""Separability metrics derived from the extended confusion matrix.

OOD-Background Separability (OBS) measures how well OOD objects are told apart from background, and
OOD-Foreground Separability (OFS) how well they are told apart from foreground. Separability $S(\beta)$
is their weighted harmonic mean. None of them needs true negatives.
"""

from dataclasses import dataclass

from oodmetric.core.taxonomy import ExtendedConfusionMatrix
from oodmetric.errors import InputError


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def obs(m: ExtendedConfusionMatrix) -> float:
    r"""OOD-Background Separability, $TO / (TO + FN_O + FO_N)$; 0 when nothing enters the denominator."""
    return _ratio(m.to, m.to + m.fn_o + m.fo_n)


def ofs(m: ExtendedConfusionMatrix) -> float:
    r"""OOD-Foreground Separability, $TO / (TO + FP_O + FO_P)$; 0 when nothing enters the denominator."""
    return _ratio(m.to, m.to + m.fp_o + m.fo_p)


def separability(obs: float, ofs: float, beta: float = 1.0) -> float:
    r"""Separability $S(\beta) = (1 + \beta^2) \cdot OBS \cdot OFS / (\beta^2 \cdot OBS + OFS)$.

    Args:
        obs: OOD-Background Separability.
        ofs: OOD-Foreground Separability.
        beta: Weight of OFS relative to OBS, must be positive. With `beta > 1` OFS counts more, with
            `beta < 1` OBS does.

    Returns:
        The weighted harmonic mean, or 0 when the denominator vanishes.
    """
    if not beta > 0:
        raise InputError(f"beta must be positive, got {beta}")
    den = beta**2 * obs + ofs
    if den <= 0.0:
        return 0.0
    return (1 + beta**2) * obs * ofs / den


@dataclass(frozen=True)
class SeparabilityScores:
    """OBS, OFS and $S(\\beta)$ of one operating point."""

    obs: float
    ofs: float
    s: float
    beta: float = 1.0

    @classmethod
    def from_matrix(cls, m: ExtendedConfusionMatrix, beta: float = 1.0) -> "SeparabilityScores":
        b, f = obs(m), ofs(m)
        return cls(obs=b, ofs=f, s=separability(b, f, beta), beta=beta)

    @property
    def name(self) -> str:
        """`"s"` for $\\beta = 1$, otherwise `"s"` followed by $\\beta$ (`"s2"`, `"s0.5"`)."""
        if self.beta == 1.0:
            return "s"
        b = int(self.beta) if float(self.beta).is_integer() else self.beta
        return f"s{b}"
