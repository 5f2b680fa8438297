"""Recover sparse signals observed through a low-order graph filter.

The same machinery that localizes grid attacks applies to any observation
matrix built as a polynomial in a graph shift operator: the filter only
mixes values within a few hops, so correlations between far-apart columns
vanish exactly and the partitioned search stays local.
"""

import numpy as np

from gridshield import bfs_distances, graph_filter_matrix, gsp_sparse_recover


def random_tree(n, rng):
    adjacency = np.zeros((n, n))
    for v in range(1, n):
        u = int(rng.integers(0, v))
        adjacency[u, v] = adjacency[v, u] = 1.0
    return adjacency


def main():
    rng = np.random.default_rng(3)
    n = 24
    adjacency = random_tree(n, rng)
    coeffs = (1.0, 0.6)  # identity plus one-hop averaging
    filt = graph_filter_matrix(adjacency, coeffs)
    print(f"random tree on {n} nodes, filter order {len(coeffs) - 1}")

    # locality: columns further than twice the filter order never interact
    gram = filt.T @ filt
    dist = bfs_distances(adjacency.astype(bool))
    far = dist > 2 * (len(coeffs) - 1)
    print(f"gram entries beyond two filter hops: {np.count_nonzero(gram[far])} "
          f"nonzero of {int(far.sum())}")

    support = (4, 17)
    x = np.zeros(n)
    x[list(support)] = (1.2, -0.8)
    noise = 0.01 * rng.standard_normal(n)
    y = filt @ x + noise

    result = gsp_sparse_recover(
        adjacency, coeffs, y, rho=0.05, k_c=4, sigma2=1e-4
    )
    print(f"\nplanted support {support}, values (1.2, -0.8)")
    print(f"recovered support {result.support}, "
          f"values {np.round(result.values, 3)}")
    print(f"detected: {result.detected}, statistic {result.statistic:.3f}")

    # order-zero filters reduce the search to plain thresholding
    plain = gsp_sparse_recover(
        np.zeros((n, n)), (1.0,), y, rho=0.05, k_c=4, sigma2=1e-4
    )
    print(f"\nsame observation under an identity filter (pure thresholding): "
          f"support {plain.support}")
    print("the one-hop mixing is attributed to the neighbors unless the "
          "filter is modeled")


if __name__ == "__main__":
    main()
