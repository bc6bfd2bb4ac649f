"""Composite tensor-product Gauss–Legendre quadrature on boxes."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import EmptyQuadrature
from .jets import Box


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes ``(N, m)`` and positive weights ``(N,)`` for integrating over ``box``."""
    nodes: np.ndarray
    weights: np.ndarray
    box: Box
    order: int
    panels: tuple

    @classmethod
    def gauss_legendre(cls, box: Box, order: int = 8, panels=4) -> "QuadratureRule":
        """Order-``order`` rule per panel (exact to degree 2·order−1 per axis per panel)."""
        if order < 1:
            raise EmptyQuadrature("quadrature order must be at least 1")
        panels = (panels,) * box.dim if np.isscalar(panels) else tuple(panels)
        if len(panels) != box.dim or min(panels) < 1:
            raise EmptyQuadrature(f"need a positive panel count per axis, got {panels}")
        t, w = np.polynomial.legendre.leggauss(order)
        axes_nodes, axes_weights = [], []
        for lo, hi, p in zip(box.lower, box.upper, panels):
            edges = np.linspace(lo, hi, p + 1)
            half = 0.5 * np.diff(edges)
            mid = 0.5 * (edges[1:] + edges[:-1])
            axes_nodes.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
            axes_weights.append((half[:, None] * w[None, :]).ravel())
        nodes = np.array(list(product(*axes_nodes)), dtype=float)
        weights = np.array([np.prod(ws) for ws in product(*axes_weights)], dtype=float)
        return cls(nodes, weights, box, order, panels)

    def refined(self) -> "QuadratureRule":
        """Same order with the panel count doubled on every axis."""
        return QuadratureRule.gauss_legendre(self.box, self.order, tuple(2 * p for p in self.panels))

    def __len__(self):
        return len(self.weights)

    def integrate(self, fn) -> float:
        """``Σ w_i fn(x_i)`` for a scalar integrand."""
        if len(self.weights) == 0:
            raise EmptyQuadrature("quadrature rule has no nodes")
        return float(sum(w * fn(x) for x, w in zip(self.nodes, self.weights)))
