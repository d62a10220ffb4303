"""Log-domain products of powers shared by the Dirichlet-type depths."""
import numpy as np


def equal_weight_depth(gaps, span):
    """``(k+1) * prod((g_i / span) ** (1/(k+1)))``; 0 on any zero gap."""
    g = np.asarray(gaps, dtype=np.float64)
    if g.size == 1:
        return 1.0
    if np.any(g <= 0.0):
        return 0.0
    m = g.size
    val = m * np.exp(np.mean(np.log(g / span)))
    return float(min(val, 1.0))


def weighted_depth(gaps, ref_gaps, span):
    """``prod((g_i / m_i) ** (m_i / span))``; 0 on any zero gap.

    ``ref_gaps`` are the gaps of the centre, all strictly positive.
    """
    g = np.asarray(gaps, dtype=np.float64)
    if g.size == 1:
        return 1.0
    if np.any(g <= 0.0):
        return 0.0
    m = np.asarray(ref_gaps, dtype=np.float64)
    log_val = np.sum((m / span) * (np.log(g) - np.log(m)))
    return float(min(np.exp(log_val), 1.0))
