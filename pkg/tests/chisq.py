"""Chi-square goodness of fit against a Poisson law, with tail bins merged."""

import numpy as np
from scipy import stats


def poisson_gof(samples, mu, min_expected=5.0):
    samples = np.asarray(samples)
    size = samples.size
    lo = int(stats.poisson.ppf(1e-6, mu))
    hi = int(stats.poisson.ppf(1 - 1e-6, mu))
    edges = [lo]
    # grow bins until each expects enough counts
    acc = 0.0
    for k in range(lo, hi + 1):
        acc += stats.poisson.pmf(k, mu) * size
        if acc >= min_expected:
            edges.append(k + 1)
            acc = 0.0
    edges[-1] = hi + 1
    edges = sorted(set(edges))
    cdf = stats.poisson.cdf(np.array(edges) - 1, mu)
    probs = np.diff(cdf)
    # first and last bins absorb the tails
    probs[0] += stats.poisson.cdf(edges[0] - 1, mu)
    probs[-1] += stats.poisson.sf(edges[-1] - 1, mu)
    idx = np.clip(np.searchsorted(edges, samples, side="right") - 1, 0, len(probs) - 1)
    observed = np.bincount(idx, minlength=len(probs))
    return stats.chisquare(observed, probs * size).pvalue
