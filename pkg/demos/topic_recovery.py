"""
Recovering planted topics from short comments
=============================================

Three topics, each with its own 20-word vocabulary, produce 200 short
comments. We weight them with tf-idf, project with a truncated SVD and let
the silhouette grid pick the number of clusters.
"""

import numpy as np

from redditfactors.cluster import grid_search
from redditfactors.lsi import fit_lsi
from redditfactors.synthetic import planted_topic_docs
from redditfactors.vectorize import vectorize

bodies, truth = planted_topic_docs(n_docs=200, n_topics=3, seed=1)
print(bodies[0])
print(bodies[1])

# term x document tf-idf matrix, sparse
tdm = vectorize(bodies)
print("matrix shape:", tdm.shape, "nonzeros:", tdm.weights.nnz)

# the spectrum drops sharply after the third singular value
model = fit_lsi(tdm, 8)
print("singular values:", np.round(model.singular_values, 3))

# silhouette for every (j, k) cell of the grid
res = grid_search(tdm, range(2, 7), range(2, 7), seed=0, restarts=5)
print("\n  j\\k " + " ".join(f"{k:6d}" for k in range(2, 7)))
for j in range(2, 7):
    print(f"  {j:3d} " + " ".join(f"{res.table[(j, k)]:6.3f}" for k in range(2, 7)))
print(f"\nbest cell: j={res.best_j} k={res.best_k}")

# cross-tabulate found clusters against the planted topics
table = np.zeros((3, res.best_k), dtype=int)
for t, a in zip(truth, res.best.assignments):
    table[t, a] += 1
print(table)
