from abc import abstractmethod
from collections.abc import Collection

import numpy as np


class MatchingProblem:
    """A matching between predictions (rows) and ground truths (columns) of an overlap Gram matrix."""

    def __init__(self, gram_matrix: np.ndarray, threshold: float):
        self.gram_matrix = gram_matrix
        self.threshold = threshold

    @abstractmethod
    def solve(self) -> Collection[tuple[int, int, float]]:
        """Solves the matching problem, returning `(row, column, overlap)` triples."""
        raise NotImplementedError


class GreedyMatchingProblem(MatchingProblem):
    """One-to-one greedy matching in the Pascal VOC manner.

    Rows are visited in the given priority order; each row claims the still unclaimed column with the
    highest overlap, provided it reaches the threshold. Ties between columns go to the lower column index.
    """

    def __init__(self, gram_matrix: np.ndarray, threshold: float, order: np.ndarray):
        super().__init__(gram_matrix, threshold)
        self.order = order

    def solve(self) -> Collection[tuple[int, int, float]]:
        m = self.gram_matrix
        if m.size == 0:
            return []
        claimed = np.zeros(m.shape[1], dtype=bool)
        triples = []
        for i in self.order:
            row = np.where(claimed, -np.inf, m[i])
            j = int(np.argmax(row))
            if row[j] >= self.threshold:
                claimed[j] = True
                triples.append((int(i), j, m[i, j].item()))
        return triples
