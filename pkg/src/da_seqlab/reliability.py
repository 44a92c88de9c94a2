"""Inter-coder reliability.

Per-code Cohen's kappa over multi-label turn annotations (each code is a
presence/absence variable per turn) and ICC(2,1) for two raters scoring
continuous indicators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import DACode, SpeakerRole


@dataclass(frozen=True)
class DualAnnotation:
    session_id: str
    turn: int
    coder_a_codes: frozenset[str]
    coder_b_codes: frozenset[str]
    speaker: SpeakerRole | None = None

    def __post_init__(self) -> None:
        for name, codes in (("a", self.coder_a_codes), ("b", self.coder_b_codes)):
            if len(codes) > 2:
                raise ValueError(
                    f"{self.session_id}:{self.turn}: coder {name} assigned {len(codes)} codes"
                )

    @property
    def turn_key(self) -> tuple[str, int]:
        return (self.session_id, self.turn)

    def labels(self, coder: str) -> frozenset[str]:
        """Role-prefixed labels for one coder; requires a known speaker."""
        if self.speaker is None:
            raise ValueError(f"{self.session_id}:{self.turn}: speaker needed for label kappa")
        codes = self.coder_a_codes if coder == "a" else self.coder_b_codes
        return frozenset(self.speaker.prefix + c for c in codes)


def load_annotations(path: str | Path) -> list[DualAnnotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
                speaker = SpeakerRole(rec["speaker"]) if rec.get("speaker") else None
                out.append(
                    DualAnnotation(
                        str(rec["session_id"]),
                        int(rec["turn"]),
                        frozenset(DACode.parse(c).value for c in rec["a"]),
                        frozenset(DACode.parse(c).value for c in rec["b"]),
                        speaker,
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return out


@dataclass(frozen=True)
class KappaResult:
    code: str
    kappa: float
    observed_agreement: float
    expected_agreement: float
    n: int
    degenerate: bool = False


def cohen_kappa_binary(a: Sequence[bool], b: Sequence[bool]) -> tuple[float, float, float, bool]:
    """Kappa for two binary presence vectors.

    Returns ``(kappa, p_o, p_e, degenerate)``.  Constant, identical coders
    give ``kappa = 1`` with ``degenerate=True``.
    """
    n = len(a)
    if n == 0 or n != len(b):
        raise ValueError("need two non-empty presence vectors of equal length")
    both = sum(1 for x, y in zip(a, b) if x and y)
    neither = sum(1 for x, y in zip(a, b) if not x and not y)
    pa = sum(1 for x in a if x) / n
    pb = sum(1 for y in b if y) / n
    p_o = (both + neither) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e >= 1.0:
        if p_o < 1.0:
            raise ValueError("expected agreement is 1 but observed agreement is not")
        return 1.0, p_o, p_e, True
    return (p_o - p_e) / (1 - p_e), p_o, p_e, False


def kappa_per_code(
    annotations: Sequence[DualAnnotation], code: str | DACode, *, by_label: bool = False
) -> KappaResult:
    """Cohen's kappa for one code treated as presence/absence per turn.

    With ``by_label=True`` the code is a role-prefixed label such as
    ``"[t]Cp"`` and annotations must carry a speaker.
    """
    if not annotations:
        raise ValueError("empty annotation list")
    key = code.value if isinstance(code, DACode) else str(code)
    if by_label:
        pres_a = [key in ann.labels("a") for ann in annotations]
        pres_b = [key in ann.labels("b") for ann in annotations]
    else:
        pres_a = [key in ann.coder_a_codes for ann in annotations]
        pres_b = [key in ann.coder_b_codes for ann in annotations]
    kappa, p_o, p_e, degenerate = cohen_kappa_binary(pres_a, pres_b)
    return KappaResult(key, kappa, p_o, p_e, len(annotations), degenerate)


def kappa_all(annotations: Sequence[DualAnnotation], *, by_label: bool = False) -> list[KappaResult]:
    """Kappa for every code used by either coder, lowest agreement first."""
    keys: set[str] = set()
    for ann in annotations:
        if by_label:
            keys |= ann.labels("a") | ann.labels("b")
        else:
            keys |= ann.coder_a_codes | ann.coder_b_codes
    results = [kappa_per_code(annotations, k, by_label=by_label) for k in keys]
    return sorted(results, key=lambda r: (r.kappa, r.code))


@dataclass(frozen=True)
class ICCResult:
    icc: float
    model: str
    n_subjects: int
    n_raters: int
    ms_rows: float
    ms_cols: float
    ms_error: float
    degenerate: bool = False


def icc_two_way(values) -> ICCResult:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    ``values`` is a subjects x raters matrix with exactly two raters.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("expected a subjects x 2 matrix")
    n, k = x.shape
    if n < 2:
        raise ValueError("need at least 2 subjects")
    if not np.all(np.isfinite(x)):
        raise ValueError("missing or non-finite ratings")

    grand = x.mean()
    ss_total = ((x - grand) ** 2).sum()
    if ss_total == 0.0:
        return ICCResult(1.0, "ICC(2,1)", n, k, 0.0, 0.0, 0.0, degenerate=True)
    ss_rows = k * ((x.mean(axis=1) - grand) ** 2).sum()
    ss_cols = n * ((x.mean(axis=0) - grand) ** 2).sum()
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))
    icc = (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)
    return ICCResult(float(icc), "ICC(2,1)", n, k, float(msr), float(msc), float(mse))
