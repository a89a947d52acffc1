"""Brute-force reference computations used to cross-check the exact DP.

These deliberately avoid the backward recursion: the policy oracle enumerates
every adaptive member-selection rule and takes the best forward expectation.
"""

from __future__ import annotations

import numpy as np

from .ambiguity import PengSequenceModel, _evaluate, _leaf_grid, as_payoff
from .errors import ContractError, ResourceError

MAX_POLICIES = 5_000_000


def policy_enumeration_expectation(
    model: PengSequenceModel, payoff, max_policies: int = MAX_POLICIES, chunk: int = 1 << 15
) -> float:
    """Maximise E_pi[phi(X_1..X_n)] over all adaptive policies pi.

    A policy picks a member at every history node (x_1..x_k), k < n.  Its law
    on leaves is the product of the chosen members' atom probabilities along
    the path.  There are ``M ** (1 + s + ... + s^(n-1))`` policies.
    """
    n = model.length
    payoff = as_payoff(payoff, arity=n)
    amb = model.marginal
    P = amb.prob_matrix
    M, s = P.shape
    n_nodes = sum(s**k for k in range(n))
    n_policies = M**n_nodes
    if n_policies > max_policies:
        raise ResourceError(f"{n_policies} policies exceed the cap of {max_policies}", n_policies, max_policies)

    leaves_idx = np.indices((s,) * n).reshape(n, -1).T  # (L, n) support indices
    leaves = amb.support[leaves_idx]
    phi = _evaluate(payoff, leaves)

    # node id of the history preceding coordinate k, for each leaf
    offsets = np.cumsum([0] + [s**k for k in range(n)])
    node_of = np.zeros_like(leaves_idx)
    for k in range(n):
        code = np.zeros(len(leaves_idx), dtype=np.int64)
        for j in range(k):
            code = code * s + leaves_idx[:, j]
        node_of[:, k] = offsets[k] + code

    best = -np.inf
    radix = M ** np.arange(n_nodes, dtype=np.int64)
    for start in range(0, n_policies, chunk):
        ids = np.arange(start, min(start + chunk, n_policies), dtype=np.int64)
        choice = (ids[:, None] // radix[None, :]) % M  # (C, nodes)
        path_prob = np.ones((len(ids), len(leaves_idx)))
        for k in range(n):
            member = choice[:, node_of[:, k]]  # (C, L)
            path_prob *= P[member, leaves_idx[None, :, k]]
        best = max(best, float(np.max(path_prob @ phi)))
    return best


def classical_probability(model: PengSequenceModel, event) -> float:
    """P(event) for a singleton marginal by summing over every outcome."""
    amb = model.marginal
    if len(amb) != 1:
        raise ContractError("classical enumeration needs a singleton ambiguity set")
    dist = amb.members[0]
    n = model.length
    leaves = _leaf_grid(np.asarray(dist.values), n)
    probs = np.prod(_leaf_grid(np.asarray(dist.probs), n), axis=1)
    hits = np.array([bool(event(tuple(row))) for row in leaves])
    return float(np.sum(probs[hits]))
