"""Phase 2: sigma-band cohort selection.

The response count of a cohort of n patients under the population rate p
follows Binomial(n, p). Cut points c_j = floor(mu + j*sigma) for
j = -3, -2, -1, 1, 2, 3 (clamped to [-1, n]) split 0..n into seven
consecutive integer bands, the central one being (mu - sigma, mu + sigma];
bands can be empty. Each profile's predicted response count
round(p_hat * n) falls in exactly one band, and the selected cohort fills
bands in proportion to their binomial mass.
"""
import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.stats import binom

from core.errors import CohortSelectionError, SigmaBandError
from core.models import MedicalProfile

from .models import BandAllocation, SelectionReport, SigmaBand, SigmaBandPlan

logger = logging.getLogger("patsim.profilegen")

CUT_MULTIPLES = (-3, -2, -1, 1, 2, 3)
BAND_LABELS = [
    "<= -3σ", "-3σ to -2σ", "-2σ to -1σ", "-1σ to +1σ", "+1σ to +2σ", "+2σ to +3σ", "> +3σ",
]


def sigma_band_plan(n: int, p: float) -> SigmaBandPlan:
    """Seven integer bands partitioning 0..n with exact binomial masses.

    Raises:
        SigmaBandError: n < 1 or p outside (0, 1)
    """
    if n < 1:
        raise SigmaBandError(f"n must be positive, got {n}")
    if not 0.0 < p < 1.0:
        raise SigmaBandError(f"degenerate binomial rate p={p}")

    mu = n * p
    sigma = math.sqrt(n * p * (1.0 - p))
    cuts = [min(n, max(-1, math.floor(mu + j * sigma))) for j in CUT_MULTIPLES]

    bounds = []
    lo = 0
    for cut in cuts:
        bounds.append((lo, cut))
        lo = max(lo, cut + 1)
    bounds.append((lo, n))

    bands = []
    for index, (lo, hi) in enumerate(bounds):
        if lo > hi:
            mass = 0.0
        else:
            mass = float(binom.pmf(np.arange(lo, hi + 1), n, p).sum())
        bands.append(SigmaBand(index=index, label=BAND_LABELS[index], lo=lo, hi=hi, mass=mass))
    return SigmaBandPlan(n=n, p=p, mu=mu, sigma=sigma, bands=bands)


def predicted_count(p_hat: float, n: int) -> int:
    """round(p_hat * n) with halves rounded up."""
    return int(math.floor(p_hat * n + 0.5))


def _largest_remainder(weights: np.ndarray, total: int, caps: Optional[np.ndarray] = None) -> np.ndarray:
    """Integer split of total proportional to weights; remainders to largest
    fractional parts, ties to the lower band index. Caps bound each share."""
    if total <= 0 or weights.sum() <= 0:
        return np.zeros(len(weights), dtype=int)
    exact = weights / weights.sum() * total
    shares = np.floor(exact).astype(int)
    if caps is not None:
        shares = np.minimum(shares, caps)
    remaining = total - int(shares.sum())
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - math.floor(exact[i])), i))
    while remaining > 0:
        progressed = False
        for i in order:
            if remaining == 0:
                break
            if caps is not None and shares[i] >= caps[i]:
                continue
            if weights[i] <= 0:
                continue
            shares[i] += 1
            remaining -= 1
            progressed = True
        if not progressed:
            break
    return shares


def select_cohort(
    profiles: Sequence[MedicalProfile],
    plan: SigmaBandPlan,
    m: Optional[int] = None,
    rng: Union[int, np.random.Generator, None] = None,
    report: Optional[SelectionReport] = None,
) -> List[MedicalProfile]:
    """Select m profiles (default plan.n) whose predicted response counts
    follow the plan's binomial bands.

    A profile lands in the band holding round(p_hat * plan.n). Quotas follow
    band mass (largest remainder); a band short of members passes its
    shortfall on to bands with spare members in proportion to their mass.
    Output keeps input order.

    Raises:
        CohortSelectionError: m larger than the pool, or a profile without
            a predicted response
    """
    m = plan.n if m is None else m
    if m > len(profiles):
        raise CohortSelectionError(f"cannot select {m} profiles from {len(profiles)}")
    if m <= 0:
        return []
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    bands = plan.bands
    members: List[List[int]] = [[] for _ in bands]
    for i, profile in enumerate(profiles):
        if profile.predicted_response is None:
            raise CohortSelectionError(f"profile {profile.profile_id} has no predicted response")
        members[plan.band_of(predicted_count(profile.predicted_response, plan.n))].append(i)

    masses = np.array(plan.masses())
    available = np.array([len(ms) for ms in members])
    quota = _largest_remainder(masses, m)
    take = np.minimum(quota, available)

    shortfall = m - int(take.sum())
    while shortfall > 0:
        spare = available - take
        weights = np.where(spare > 0, masses, 0.0)
        if weights.sum() <= 0:
            weights = spare.astype(float)
        extra = _largest_remainder(weights, shortfall, caps=spare)
        if extra.sum() == 0:
            break
        take += extra
        shortfall = m - int(take.sum())

    chosen: List[int] = []
    for band_index, band_members in enumerate(members):
        count = int(take[band_index])
        picked = rng.choice(band_members, size=count, replace=False).tolist() if count else []
        chosen.extend(int(i) for i in picked)
        if report is not None:
            report.allocations.append(BandAllocation(
                band=bands[band_index],
                available=len(band_members),
                quota=int(quota[band_index]),
                selected=count,
                profile_ids=sorted(profiles[i].profile_id for i in picked),
            ))

    if report is not None:
        report.n = m
        report.population_rate = plan.p
        picked_rates = [profiles[i].predicted_response for i in chosen]
        report.predicted_rate = float(np.mean(picked_rates)) if picked_rates else None

    logger.debug(f"[Select] {m} of {len(profiles)} profiles, quotas={quota.tolist()} taken={take.tolist()}")
    return [profiles[i] for i in sorted(chosen)]
