"""Paired bootstrap test for a difference of two kappas sharing one annotator."""
import logging
from typing import Optional, Sequence

import numpy as np

from core.errors import AgreementError

from .models import BootstrapResult
from .stats import check_lengths, kappa_from_counts, label_space

logger = logging.getLogger("patsim.agreement")

CHUNK = 1000
MAX_REDRAW_ROUNDS = 100


def _pair_onehot(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """(n, k*k) indicator of each item's cell in the x-by-y confusion table."""
    onehot = np.zeros((len(x), k * k), dtype=float)
    onehot[np.arange(len(x)), x * k + y] = 1.0
    return onehot


def _draw_weights(rng: np.random.Generator, size: int, groups: Optional[np.ndarray], n_groups: int) -> np.ndarray:
    """Per-item multiplicities of `size` resamples drawn with replacement."""
    if groups is None:
        n = n_groups
        return rng.multinomial(n, np.full(n, 1.0 / n), size=size).astype(float)
    cluster_weights = rng.multinomial(n_groups, np.full(n_groups, 1.0 / n_groups), size=size)
    return cluster_weights[:, groups].astype(float)


def paired_bootstrap_kappa(
    a: Sequence[str],
    b: Sequence[str],
    c: Sequence[str],
    resamples: int = 10000,
    seed: int = 0,
    clusters: Optional[Sequence[str]] = None,
) -> BootstrapResult:
    """Resample aligned items (or clusters of items) and test kappa(a,b) - kappa(a,c).

    Each resample draws items with replacement and computes the delta;
    resamples where either kappa is undefined are redrawn and counted. The
    two-sided p is twice the share of resamples whose delta is on the other
    side of zero from the observed delta (ties included), capped at 1.
    """
    check_lengths(a, b)
    check_lengths(a, c)
    if resamples < 1:
        raise AgreementError("resamples must be at least 1")

    labels = label_space(a, b, c)
    k = len(labels)
    code = {label: i for i, label in enumerate(labels)}
    xa = np.array([code[v] for v in a])
    xb = np.array([code[v] for v in b])
    xc = np.array([code[v] for v in c])
    onehot_ab = _pair_onehot(xa, xb, k)
    onehot_ac = _pair_onehot(xa, xc, k)

    kappa_ab = float(kappa_from_counts(onehot_ab.sum(axis=0).reshape(k, k)))
    kappa_ac = float(kappa_from_counts(onehot_ac.sum(axis=0).reshape(k, k)))
    if np.isnan(kappa_ab) or np.isnan(kappa_ac):
        raise AgreementError("observed kappa is undefined (a single shared class)")
    observed = kappa_ab - kappa_ac

    if clusters is not None:
        if len(clusters) != len(a):
            raise AgreementError("cluster ids must align with items")
        _, groups = np.unique(np.asarray(clusters), return_inverse=True)
        n_groups = int(groups.max()) + 1
        unit = "conversation"
    else:
        groups, n_groups, unit = None, len(a), "item"

    rng = np.random.default_rng(seed)

    def deltas(size: int) -> np.ndarray:
        weights = _draw_weights(rng, size, groups, n_groups)
        kab = kappa_from_counts((weights @ onehot_ab).reshape(size, k, k))
        kac = kappa_from_counts((weights @ onehot_ac).reshape(size, k, k))
        return kab - kac

    collected = []
    redraws = 0
    remaining = resamples
    while remaining:
        batch = deltas(min(CHUNK, remaining))
        for _ in range(MAX_REDRAW_ROUNDS):
            bad = np.isnan(batch)
            if not bad.any():
                break
            redraws += int(bad.sum())
            batch[bad] = deltas(int(bad.sum()))
        else:
            raise AgreementError("bootstrap kept drawing resamples with undefined kappa")
        collected.append(batch)
        remaining -= len(batch)

    resampled = np.concatenate(collected)
    opposite = np.mean(np.sign(observed) * resampled <= 0)
    p_value = float(min(1.0, 2.0 * opposite))
    if redraws:
        logger.debug(f"[Agreement] bootstrap redrew {redraws} degenerate resamples")
    return BootstrapResult(
        delta=float(observed),
        kappa_ab=kappa_ab,
        kappa_ac=kappa_ac,
        p_value=p_value,
        resamples=resamples,
        seed=seed,
        redraws=redraws,
        unit=unit,
    )
