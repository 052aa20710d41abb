#!/usr/bin/env python3
"""
Bounds - entanglement lower bounds from distances and normalized violations

theorem1_bounds  distances to the local set (or to a Bell-value region)
theorem2_bounds  a single normalized violation beta_alpha
chsh_refined_bounds / two_qubit_concurrence_bound  minimal-scenario formulas
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from divergence import DistanceResult, DivergenceKind
from inequality import ViolationReport


SQRT2 = math.sqrt(2.0)
LN2 = math.log(2.0)
TSIRELSON = 2.0 * SQRT2
CHSH_SEPARABLE_PRINTED = 0.125

logger = logging.getLogger('bellbound.bounds')


class BoundInputError(Exception):
    """Raised for inputs outside the domain of a bound formula."""
    pass


class MeasureKind(Enum):
    E_TR = 'E_Tr'
    E_RE = 'E_Re'
    E_F = 'E_F'
    E_C = 'E_C'
    E_G = 'E_G'
    E_ROB = 'E_Rob'

    @property
    def divergence(self) -> DivergenceKind:
        """The distance that bounds this measure."""
        if self in (MeasureKind.E_TR, MeasureKind.E_ROB):
            return DivergenceKind.TV
        if self in (MeasureKind.E_RE, MeasureKind.E_F):
            return DivergenceKind.KL_BITS
        return DivergenceKind.INFIDELITY


@dataclass
class BoundEntry:
    measure: MeasureKind
    value: float
    method: str
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'measure': self.measure.value,
            'value': self.value,
            'method': self.method,
            'notes': list(self.notes),
        }


@dataclass
class BoundReport:
    """Per-measure bounds plus the inputs they were computed from."""

    method: str
    entries: Dict[MeasureKind, BoundEntry] = field(default_factory=dict)
    inputs: Dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def add(self, measure: MeasureKind, value: float, *notes: str):
        self.entries[measure] = BoundEntry(measure, max(0.0, float(value)), self.method, list(notes))

    def omit(self, measure: MeasureKind, reason: str):
        logger.warning(f"{measure.value} omitted: {reason}")
        self.notes.append(f"{measure.value} omitted: {reason}")

    def value(self, measure: MeasureKind) -> Optional[float]:
        entry = self.entries.get(measure)
        return None if entry is None else entry.value

    def to_dict(self) -> Dict:
        return {
            'method': self.method,
            'inputs': self.inputs,
            'bounds': [self.entries[m].to_dict() for m in MeasureKind if m in self.entries],
            'notes': list(self.notes),
        }

    def render(self) -> str:
        """Aligned text table: measure, bound, method, notes."""
        lines = [f"{'measure':<8} {'bound':>12}  {'method':<13} notes"]
        lines.append('-' * 60)
        for measure in MeasureKind:
            entry = self.entries.get(measure)
            if entry is None:
                lines.append(f"{measure.value:<8} {'-':>12}  {self.method:<13} omitted")
                continue
            notes = '; '.join(entry.notes)
            lines.append(f"{measure.value:<8} {entry.value:>12.6f}  {entry.method:<13} {notes}".rstrip())
        if self.inputs:
            lines.append('')
            for key, value in self.inputs.items():
                lines.append(f"  {key}: {value}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return '\n'.join(lines)


def robustness(x: float) -> Optional[float]:
    """x / (1 - x), or None when the denominator vanishes."""
    if x >= 1.0:
        return None
    return x / (1.0 - x)


def theorem1_bounds(d_tv: DistanceResult, d_kl: DistanceResult, d_if: DistanceResult) -> BoundReport:
    """Bounds from the three certified distances of one behavior."""
    for result, kind in ((d_tv, DivergenceKind.TV), (d_kl, DivergenceKind.KL_BITS), (d_if, DivergenceKind.INFIDELITY)):
        if result.kind is not kind:
            raise BoundInputError(f"expected a {kind.name} distance, got {result.kind.name}")
    regions = {d_tv.region, d_kl.region, d_if.region}
    if len(regions) != 1:
        raise BoundInputError(f"distances were taken to different sets: {sorted(regions)}")

    tv, kl, inf = d_tv.certified_lower, d_kl.certified_lower, d_if.certified_lower
    report = BoundReport('theorem1')
    report.inputs = {
        'region': d_tv.region,
        'tv': {'certified_lower': tv, 'primal': d_tv.primal},
        'kl': {'certified_lower': kl, 'primal': d_kl.primal},
        'if': {'certified_lower': inf, 'primal': d_if.primal},
    }
    report.add(MeasureKind.E_TR, tv)
    report.add(MeasureKind.E_RE, kl)
    report.add(MeasureKind.E_F, kl)
    report.add(MeasureKind.E_C, inf,
               f"sqrt(2)*IF = {SQRT2 * inf:.6f} (state-level form)",
               f"primal sqrt(2)*IF = {SQRT2 * d_if.primal:.6f}")
    report.add(MeasureKind.E_G, inf * inf, f"primal IF^2 = {d_if.primal ** 2:.6f}")
    rob = robustness(tv)
    if rob is None:
        report.omit(MeasureKind.E_ROB, f"TV distance {tv:g} >= 1")
    else:
        report.add(MeasureKind.E_ROB, rob)
    # the infidelity certificate is the TV one, so only TV and KL convergence matter
    if not all(r.converged for r in (d_tv, d_kl)):
        report.notes.append("a distance solver did not converge; bounds use its current certificate")
    return report


def theorem2_bounds(v: ViolationReport) -> BoundReport:
    """Bounds from the normalized violation beta_alpha alone."""
    x = v.beta_alpha
    if x < 0:
        raise BoundInputError(f"beta_alpha must be nonnegative, got {x}")
    report = BoundReport('theorem2')
    report.inputs = v.to_dict()
    report.add(MeasureKind.E_TR, x)
    report.add(MeasureKind.E_RE, 2.0 / LN2 * x * x)
    report.add(MeasureKind.E_F, 2.0 / LN2 * x * x)
    report.add(MeasureKind.E_C, SQRT2 * x)
    report.add(MeasureKind.E_G, x * x)
    rob = robustness(x)
    if rob is None:
        report.omit(MeasureKind.E_ROB, f"beta_alpha {x:g} >= 1")
    else:
        report.add(MeasureKind.E_ROB, rob)
    if v.c_source == 'override':
        report.notes.append(f"classical bound replaced by c = {v.c_used:g}; E_Tr = (beta - c)/alpha = {x:.6f}")
        if math.isclose(v.c_used, SQRT2, abs_tol=1e-6) and math.isclose(v.alpha, 8.0):
            report.notes.append(f"the separable-state figure {CHSH_SEPARABLE_PRINTED} printed for CHSH with "
                                f"c = sqrt2 is not reproduced; the formula gives {x:.6f}")
    return report


def chsh_refined_bounds(beta: float) -> Dict[MeasureKind, float]:
    """E_C and E_G from a CHSH value in the minimal scenario."""
    if beta > TSIRELSON + 1e-12:
        raise BoundInputError(f"CHSH value {beta} exceeds the quantum maximum {TSIRELSON:.6f}")
    if beta <= 2.0:
        return {MeasureKind.E_C: 0.0, MeasureKind.E_G: 0.0}
    concurrence = min(1.0, (beta - 2.0) / (TSIRELSON - 2.0))
    geometric = 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - concurrence * concurrence)))
    return {MeasureKind.E_C: concurrence, MeasureKind.E_G: geometric}


def two_qubit_concurrence_bound(beta: float) -> float:
    """Concurrence bound for two qubits; device-dependent."""
    if beta < 2.0:
        return 0.0
    return 0.5 * math.sqrt(beta * beta - 4.0)
