"""Meshes, P1 finite-element assembly, and discrete inner products.

Two structured mesh families are supported: a uniform partition of an
interval with a homogeneous Dirichlet condition at the left end and a single
friction node at the right end, and a uniform triangulation of the unit
square with the friction set D on the interior of the bottom edge and
Dirichlet conditions on the rest of the boundary.

The bilinear form is t(e; u, v) = int_Omega e * grad u . grad v (optionally
plus int_Omega e * u * v), with the coefficient e constant on each element so
the assembled operator T(e) is exactly linear in the coefficient vector.  The
nonsmooth friction term is mass-lumped on D: s(f; v) = sum_i w_i f_i |v_i|.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

__all__ = [
    "Mesh",
    "ParameterField",
    "DiscreteOperator",
    "build_mesh",
    "interval_mesh",
    "unit_square_mesh",
    "assemble_operator",
    "trace_apply",
    "trace_adjoint",
    "reg_inner",
    "ellipticity_field",
    "friction_field",
    "elementwise_h1_gram",
    "friction_gram",
    "h1_gram",
    "mass_matrix",
    "v_norm",
    "elementwise_energy",
    "free_part",
    "full_part",
]

FORMS = ("grad_grad", "grad_grad_plus_mass")


@dataclass(frozen=True)
class Mesh:
    """A P1 mesh with Dirichlet and friction node sets.

    ``friction_weights[i]`` is the lumped quadrature weight of friction node i
    (the length measure of D carried by that node; 1.0 for the 1D point-
    friction case), so discrete D-integrals read sum_i w_i (.)_i.
    """

    dimension: int
    nodes: np.ndarray
    elements: np.ndarray
    dirichlet_nodes: np.ndarray
    friction_nodes: np.ndarray
    friction_weights: np.ndarray
    free_nodes: np.ndarray = field(repr=False)
    free_index: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def friction_free_positions(self) -> np.ndarray:
        """Positions of the friction nodes inside the free-dof vector."""
        return self.free_index[self.friction_nodes]


def _finish_mesh(dimension, nodes, elements, dirichlet, friction, weights) -> Mesh:
    dirichlet = np.asarray(dirichlet, dtype=int)
    friction = np.asarray(friction, dtype=int)
    if np.intersect1d(dirichlet, friction).size:
        raise ConfigError("dirichlet and friction node sets overlap")
    n = nodes.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[dirichlet] = False
    free = np.flatnonzero(mask)
    index = np.full(n, -1, dtype=int)
    index[free] = np.arange(free.size)
    return Mesh(
        dimension=dimension,
        nodes=nodes,
        elements=np.asarray(elements, dtype=int),
        dirichlet_nodes=dirichlet,
        friction_nodes=friction,
        friction_weights=np.asarray(weights, dtype=float),
        free_nodes=free,
        free_index=index,
    )


def interval_mesh(a: float = 0.0, b: float = 1.0, n: int = 64) -> Mesh:
    """Uniform partition of (a, b) into n segments.

    Dirichlet node at the left end, friction node (weight 1) at the right end.
    """
    if n < 1:
        raise ConfigError(f"mesh.n must be >= 1, got {n}")
    if not b > a:
        raise ConfigError("interval endpoints must satisfy a < b")
    x = np.linspace(a, b, n + 1)
    nodes = x[:, None]
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return _finish_mesh(1, nodes, elements, [0], [n], [1.0])


def unit_square_mesh(n: int) -> Mesh:
    """n-by-n grid of the unit square, each cell split into two triangles.

    The friction set D is the interior of the bottom edge y = 0; its endpoint
    corners belong to the Dirichlet boundary (the space forces zero there
    anyway).  Friction weights are the lumped edge measures h.
    """
    if n < 1:
        raise ConfigError(f"mesh.n must be >= 1, got {n}")
    h = 1.0 / n
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])  # node id = j*(n+1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10 = v00 + 1
            v01 = v00 + (n + 1)
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    elements = np.asarray(tris, dtype=int)

    ii = np.arange(n + 1)
    bottom = ii  # j = 0
    top = n * (n + 1) + ii
    left = ii * (n + 1)
    right = ii * (n + 1) + n
    friction = bottom[1:-1]
    dirichlet = np.unique(np.concatenate([top, left, right, [bottom[0], bottom[-1]]]))
    weights = np.full(friction.size, h)
    return _finish_mesh(2, nodes, elements, dirichlet, friction, weights)


def build_mesh(spec: Mapping) -> Mesh:
    """Build a mesh from a config mapping.

    The mapping carries ``dimension`` (1 or 2), ``n`` (elements per direction),
    and for dimension 1 an optional ``interval: [a, b]`` (default (0, 1)).
    """
    try:
        dimension = int(spec["dimension"])
    except KeyError:
        raise ConfigError("mesh spec is missing 'dimension'") from None
    n = int(spec.get("n", 0))
    if dimension == 1:
        a, b = spec.get("interval", (0.0, 1.0))
        return interval_mesh(float(a), float(b), n)
    if dimension == 2:
        return unit_square_mesh(n)
    raise ConfigError(f"mesh.dimension must be 1 or 2, got {dimension}")


# ---------------------------------------------------------------------------
# Parameter fields.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterField:
    """A coefficient vector with box bounds and a regularization Gram matrix.

    For the ellipticity coefficient the values live one-per-element; for the
    friction coefficient one-per-friction-node.  ``reg_inner_product`` is the
    SPD matrix of the field's regularization inner product.
    """

    values: np.ndarray
    lower_bound: float
    upper_bound: float
    reg_inner_product: object  # dense or scipy.sparse, SPD

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if not self.lower_bound < self.upper_bound:
            raise ConfigError(
                f"bounds must satisfy lower < upper, got [{self.lower_bound}, {self.upper_bound}]"
            )
        if self.values.min(initial=np.inf) < self.lower_bound or self.values.max(
            initial=-np.inf
        ) > self.upper_bound:
            raise ValueError("field values violate the box bounds")

    def with_values(self, values: np.ndarray) -> "ParameterField":
        return replace(self, values=values)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Clip a candidate vector onto the admissible box."""
        return np.clip(values, self.lower_bound, self.upper_bound)


def _broadcast(values, size) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(size, float(arr))
    if arr.shape != (size,):
        raise ValueError(f"expected {size} values, got shape {arr.shape}")
    return arr


def ellipticity_field(
    mesh: Mesh, values, lower: float = 0.1, upper: float = 10.0
) -> ParameterField:
    """Elementwise ellipticity coefficient with the default H1-type Gram."""
    vals = _broadcast(values, mesh.n_elements)
    return ParameterField(vals, float(lower), float(upper), elementwise_h1_gram(mesh))


def friction_field(
    mesh: Mesh, values, lower: float = 0.0, upper: float = 5.0
) -> ParameterField:
    """Nodewise friction coefficient on D with the default Gram."""
    vals = _broadcast(values, mesh.friction_nodes.size)
    return ParameterField(vals, float(lower), float(upper), friction_gram(mesh))


# ---------------------------------------------------------------------------
# Element geometry and raw assembly.
# ---------------------------------------------------------------------------


def element_measures(mesh: Mesh) -> np.ndarray:
    pts = mesh.nodes[mesh.elements]
    if mesh.dimension == 1:
        return np.abs(pts[:, 1, 0] - pts[:, 0, 0])
    d1 = pts[:, 1] - pts[:, 0]
    d2 = pts[:, 2] - pts[:, 0]
    return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def element_midpoints(mesh: Mesh) -> np.ndarray:
    return mesh.nodes[mesh.elements].mean(axis=1)


def _local_matrices(mesh: Mesh):
    """Per-element coefficient-one local stiffness and mass matrices.

    Returns arrays of shape (E, m, m) with m = dimension + 1.
    """
    pts = mesh.nodes[mesh.elements]
    meas = element_measures(mesh)
    if mesh.dimension == 1:
        h = meas
        k = np.array([[1.0, -1.0], [-1.0, 1.0]])
        m = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        K = k[None, :, :] / h[:, None, None]
        M = m[None, :, :] * h[:, None, None]
        return K, M
    # P1 triangle: grad(phi_i) = b_i / (2A) with the usual edge-normal vectors.
    x = pts[:, :, 0]
    y = pts[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    K = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * meas[:, None, None]
    )
    m = (np.ones((3, 3)) + np.eye(3)) / 12.0
    M = m[None, :, :] * meas[:, None, None]
    return K, M


def _assemble_full(mesh: Mesh, coeff: np.ndarray, form: str) -> sp.csr_matrix:
    """Assemble T(coeff) on all nodes (no boundary elimination)."""
    if form not in FORMS:
        raise ConfigError(f"form must be one of {FORMS}, got {form!r}")
    K, M = _local_matrices(mesh)
    loc = K + M if form == "grad_grad_plus_mass" else K
    loc = loc * np.asarray(coeff, dtype=float)[:, None, None]
    m = mesh.elements.shape[1]
    rows = np.repeat(mesh.elements, m, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, m)).ravel()
    A = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return A.tocsr()


def _mass_full(mesh: Mesh) -> sp.csr_matrix:
    _, M = _local_matrices(mesh)
    m = mesh.elements.shape[1]
    rows = np.repeat(mesh.elements, m, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, m)).ravel()
    A = sp.coo_matrix((M.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return A.tocsr()


def _restrict(mesh: Mesh, A: sp.csr_matrix) -> sp.csr_matrix:
    free = mesh.free_nodes
    return A[free][:, free].tocsr()


@dataclass(frozen=True)
class DiscreteOperator:
    """Assembled operator and load on the free (non-Dirichlet) nodes."""

    matrix: sp.csr_matrix
    load: np.ndarray


def assemble_operator(
    mesh: Mesh,
    e: ParameterField,
    form: str = "grad_grad",
    g: Callable | float = 1.0,
) -> DiscreteOperator:
    """Assemble T(e) and the load vector for the source g.

    The coefficient enters every element matrix linearly, so
    assemble(e1 + e2) = assemble(e1) + assemble(e2) entrywise.  The load uses
    a one-point rule (midpoint/centroid), consistent with P1 accuracy; ``g``
    is either a constant or a callable receiving the (E, dim) array of
    element midpoints.

    Raises
    ------
    ValueError
        If the coefficient vector leaves the field's admissible box.
    """
    vals = e.values
    if vals.shape != (mesh.n_elements,):
        raise ValueError(
            f"expected one ellipticity value per element ({mesh.n_elements}), got {vals.shape}"
        )
    if vals.min() < e.lower_bound or vals.max() > e.upper_bound:
        raise ValueError("ellipticity values outside the admissible box")
    A = _restrict(mesh, _assemble_full(mesh, vals, form))

    mids = element_midpoints(mesh)
    meas = element_measures(mesh)
    gv = np.asarray(g(mids), dtype=float) if callable(g) else np.full(mesh.n_elements, float(g))
    m = mesh.elements.shape[1]
    contrib = (gv * meas / m)[:, None].repeat(m, axis=1)
    load_full = np.zeros(mesh.n_nodes)
    np.add.at(load_full, mesh.elements.ravel(), contrib.ravel())
    return DiscreteOperator(matrix=A, load=load_full[mesh.free_nodes])


def matrix_for_direction(mesh: Mesh, delta_e: np.ndarray, form: str) -> sp.csr_matrix:
    """T(delta_e) on free nodes for an arbitrary (sign-unrestricted) direction."""
    delta_e = np.asarray(delta_e, dtype=float)
    if delta_e.shape != (mesh.n_elements,):
        raise ValueError("direction length must equal the element count")
    return _restrict(mesh, _assemble_full(mesh, delta_e, form))


def elementwise_energy(mesh: Mesh, form: str, u_full: np.ndarray, p_full: np.ndarray) -> np.ndarray:
    """Per-element values t(1_j; u, p), the e-derivative of t(e; u, p).

    Returns the vector whose j-th entry is u^T (K_j + M_j) p over element j
    with unit coefficient, so that t(e; u, p) = sum_j e_j * out_j.
    """
    K, M = _local_matrices(mesh)
    loc = K + M if form == "grad_grad_plus_mass" else K
    ue = u_full[mesh.elements]
    pe = p_full[mesh.elements]
    return np.einsum("eij,ei,ej->e", loc, ue, pe)


# ---------------------------------------------------------------------------
# Trace map onto the friction set.
# ---------------------------------------------------------------------------


def trace_apply(mesh: Mesh, v: np.ndarray) -> np.ndarray:
    """Restrict a full nodal vector to the friction nodes (gamma v)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise ValueError(f"expected a nodal vector of length {mesh.n_nodes}")
    return v[mesh.friction_nodes]


def trace_adjoint(mesh: Mesh, mu: np.ndarray) -> np.ndarray:
    """Scatter a D-vector back to the nodes (gamma* mu).

    Weighted so that (gamma v, mu)_D = sum_i w_i (gamma v)_i mu_i equals the
    plain nodal dot product <v, gamma* mu> exactly.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (mesh.friction_nodes.size,):
        raise ValueError(f"expected a D-vector of length {mesh.friction_nodes.size}")
    out = np.zeros(mesh.n_nodes)
    out[mesh.friction_nodes] = mesh.friction_weights * mu
    return out


def free_part(mesh: Mesh, v_full: np.ndarray) -> np.ndarray:
    """Restrict a full nodal vector to the free dofs."""
    return np.asarray(v_full, dtype=float)[mesh.free_nodes]


def full_part(mesh: Mesh, v_free: np.ndarray) -> np.ndarray:
    """Extend a free-dof vector by zeros on the Dirichlet nodes."""
    out = np.zeros(mesh.n_nodes)
    out[mesh.free_nodes] = v_free
    return out


# ---------------------------------------------------------------------------
# Regularization inner products and norms.
# ---------------------------------------------------------------------------


def reg_inner(field_: ParameterField, a: np.ndarray, b: np.ndarray) -> float:
    """The field's regularization inner product a^T G b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = field_.values.size
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError(f"expected vectors of length {n}")
    return float(a @ (field_.reg_inner_product @ b))


def elementwise_h1_gram(mesh: Mesh) -> sp.csr_matrix:
    """H1-type Gram matrix for elementwise-constant coefficients.

    Mass part: diagonal of element measures.  Stiffness part: a finite-volume
    difference across each interior facet with weight |facet| / (centroid
    distance), the two-point flux analogue of int grad e . grad e for fields
    that are constant per element.
    """
    E = mesh.n_elements
    meas = element_measures(mesh)
    mids = element_midpoints(mesh)
    pairs = []
    weights = []
    if mesh.dimension == 1:
        order = np.argsort(mids[:, 0])
        for a, b in zip(order[:-1], order[1:]):
            pairs.append((a, b))
            weights.append(1.0 / np.linalg.norm(mids[a] - mids[b]))
    else:
        seen: dict[tuple[int, int], int] = {}
        for j, tri in enumerate(mesh.elements):
            for k in range(3):
                edge = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
                if edge in seen:
                    a = seen.pop(edge)
                    elen = np.linalg.norm(mesh.nodes[edge[0]] - mesh.nodes[edge[1]])
                    pairs.append((a, j))
                    weights.append(elen / np.linalg.norm(mids[a] - mids[j]))
                else:
                    seen[edge] = j
    G = sp.lil_matrix((E, E))
    G.setdiag(meas)
    for (a, b), w in zip(pairs, weights):
        G[a, a] += w
        G[b, b] += w
        G[a, b] -= w
        G[b, a] -= w
    return G.tocsr()


def friction_gram(mesh: Mesh):
    """Gram matrix of the friction field's regularization inner product.

    The 1D point-friction case uses the scalar 1.  In 2D it is the P1
    mass+stiffness matrix of the bottom edge with its Dirichlet endpoints
    eliminated, i.e. a discrete H1 inner product along D.
    """
    nf = mesh.friction_nodes.size
    if mesh.dimension == 1:
        return np.eye(nf)
    xs = mesh.nodes[mesh.friction_nodes, 0]
    order = np.argsort(xs)
    if not np.array_equal(order, np.arange(nf)):
        raise ConfigError("friction nodes are expected ordered along the edge")
    # Segment lengths including the two boundary segments to the corners.
    corners = np.array([0.0, 1.0])
    coords = np.concatenate([[corners[0]], xs, [corners[1]]])
    hseg = np.diff(coords)
    G = sp.lil_matrix((nf, nf))
    for s in range(hseg.size):
        left = s - 1  # index into friction nodes; -1 or nf means corner (fixed)
        right = s
        h = hseg[s]
        k = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
        m = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0
        loc = k + m
        idx = (left, right)
        for a in range(2):
            if not 0 <= idx[a] < nf:
                continue
            for b in range(2):
                if not 0 <= idx[b] < nf:
                    continue
                G[idx[a], idx[b]] += loc[a, b]
    return G.tocsr()


def h1_gram(mesh: Mesh) -> sp.csr_matrix:
    """Discrete H1 (V-norm) Gram matrix on the free nodes."""
    ones = np.ones(mesh.n_elements)
    return _restrict(mesh, _assemble_full(mesh, ones, "grad_grad") + _mass_full(mesh))


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """P1 mass matrix on the free nodes (L2 inner product on V)."""
    return _restrict(mesh, _mass_full(mesh))


def v_norm(mesh: Mesh, v_full: np.ndarray, gram: sp.csr_matrix | None = None) -> float:
    """Discrete H1 norm of a nodal vector vanishing on the Dirichlet set."""
    if gram is None:
        gram = h1_gram(mesh)
    vf = free_part(mesh, v_full)
    return float(np.sqrt(vf @ (gram @ vf)))
