import numpy as np
import pytest

from eitkit.mesh import (ElectrodeLayout, MeshError, TriMesh,
                         adjacency_difference_operator, build_transfer,
                         derive_adjacency, generate_disk_mesh, load_mesh,
                         save_mesh)


def test_generated_counts_match_paper_scale(fine_mesh, coarse_mesh):
    assert abs(fine_mesh.n_elements - 1968) <= 0.15 * 1968
    assert abs(coarse_mesh.n_elements - 492) <= 0.15 * 492
    # node counts in the right neighborhood (1049 and 279 in the reference setup)
    assert 900 <= fine_mesh.n_nodes <= 1200
    assert 230 <= coarse_mesh.n_nodes <= 330


def test_minimal_two_electrode_mesh():
    mesh = generate_disk_mesh(64, ElectrodeLayout(2))
    assert abs(mesh.n_elements - 64) <= 0.15 * 64
    assert all(len(e) >= 1 for e in mesh.electrode_edges)
    mesh.validate()


def test_rejects_tiny_targets():
    with pytest.raises(ValueError):
        generate_disk_mesh(63, ElectrodeLayout(16))
    with pytest.raises(ValueError):
        # 32 electrodes need at least one boundary edge each; no admissible
        # triangulation lands within 15% of 64 elements
        generate_disk_mesh(64, ElectrodeLayout(32))


def test_positive_areas_and_boundary_on_circle(coarse_mesh):
    assert np.all(coarse_mesh.areas > 0)
    bnodes = np.unique(coarse_mesh.boundary_edges)
    r = np.hypot(*coarse_mesh.nodes[bnodes].T)
    assert np.abs(r - 1.0).max() <= 1e-9


def test_electrode_arcs_disjoint_contiguous(coarse_mesh):
    seen = set()
    for edges in coarse_mesh.electrode_edges:
        s = set(int(e) for e in edges)
        assert not (seen & s)
        seen |= s
        idx = np.sort(edges)
        assert np.all(np.diff(idx) == 1)  # consecutive boundary edges


def test_adjacency_symmetric_unique(coarse_mesh):
    adj = coarse_mesh.element_adjacency
    pairs = {tuple(p) for p in adj}
    assert len(pairs) == adj.shape[0]
    assert all(a < b for a, b in pairs)
    # consistency with an independent derivation
    assert np.array_equal(adj, derive_adjacency(coarse_mesh.elements))


def test_mesh_file_roundtrip(tmp_path, coarse_mesh):
    path = tmp_path / "mesh.txt"
    save_mesh(coarse_mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.elements, coarse_mesh.elements)
    assert np.allclose(back.nodes, coarse_mesh.nodes, rtol=0, atol=0)
    for a, b in zip(back.electrode_edges, coarse_mesh.electrode_edges):
        pairs_a = {frozenset(map(int, e)) for e in back.boundary_edges[a]}
        pairs_b = {frozenset(map(int, e)) for e in coarse_mesh.boundary_edges[b]}
        assert pairs_a == pairs_b


def test_transfer_identity_on_same_mesh(coarse_mesh):
    t = build_transfer(coarse_mesh, coarse_mesh)
    assert np.array_equal(t.coarse_of_fine, np.arange(coarse_mesh.n_elements))
    assert np.allclose(t.weights, coarse_mesh.areas, rtol=1e-12)
    vals = np.linspace(0.1, 2.0, coarse_mesh.n_elements)
    assert np.allclose(t.map_values(vals), vals, rtol=1e-12)


def test_transfer_covers_every_coarse_element(transfer, coarse_mesh):
    counts = np.bincount(transfer.coarse_of_fine,
                         minlength=coarse_mesh.n_elements)
    assert counts.min() >= 1


def test_transfer_weight_sums(transfer, coarse_mesh):
    # per coarse element the weights sum to that element's area
    sums = np.bincount(transfer.coarse_of_fine, transfer.weights,
                       minlength=coarse_mesh.n_elements)
    assert np.allclose(sums, coarse_mesh.areas, rtol=1e-9)
    # the total equals the mesh polygon area exactly; pi only up to the
    # polygonal boundary deficit of the discretized disk
    assert abs(transfer.weights.sum() - coarse_mesh.areas.sum()) <= 1e-12
    assert abs(transfer.weights.sum() - np.pi) / np.pi < 5e-3


def test_transfer_constant_field_maps_to_constant(transfer):
    mapped = transfer.map_values(np.full(transfer.coarse_of_fine.shape[0], 3.5))
    assert np.allclose(mapped, 3.5, rtol=1e-12)


def test_difference_operator_basics(coarse_mesh):
    R = adjacency_difference_operator(coarse_mesh)
    assert R.shape == (coarse_mesh.element_adjacency.shape[0],
                       coarse_mesh.n_elements)
    const = np.full(coarse_mesh.n_elements, 2.7)
    assert np.abs(R @ const).max() == 0.0
    # exactly two entries per row, +1 and -1
    nnz_per_row = np.diff(R.indptr)
    assert np.all(nnz_per_row == 2)
    assert np.allclose(np.abs(R.data), 1.0)


def test_difference_operator_two_element_mesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 2], [0, 2, 3]])
    mesh = TriMesh(nodes, elements, np.array([[0, 1]]), [np.array([0])],
                   derive_adjacency(elements))
    R = adjacency_difference_operator(mesh)
    assert R.shape == (1, 2)
    assert np.array_equal(sorted(R.toarray().ravel()), [-1.0, 1.0])


def test_rtr_symmetric_psd_with_constant_nullspace(coarse_mesh, rng):
    R = adjacency_difference_operator(coarse_mesh)
    RtR = (R.T @ R).toarray()
    assert np.allclose(RtR, RtR.T)
    x = rng.standard_normal((coarse_mesh.n_elements, 20))
    quad = np.einsum("ik,ij,jk->k", x, RtR, x)
    assert np.all(quad >= -1e-10)
    assert np.abs(RtR @ np.ones(coarse_mesh.n_elements)).max() < 1e-12


def test_interior_edge_count_via_euler(coarse_mesh):
    # every interior edge shared by exactly two elements: 3M = 2*I + B
    m = coarse_mesh.n_elements
    b = coarse_mesh.boundary_edges.shape[0]
    assert coarse_mesh.element_adjacency.shape[0] == (3 * m - b) // 2


def test_validate_catches_broken_orientation():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 2], [0, 2, 3]])
    # degenerate element: repeated node
    bad = np.array([[0, 1, 1], [0, 2, 3]])
    with pytest.raises(MeshError):
        TriMesh(nodes, bad, np.array([[0, 1]]), [np.array([0])],
                derive_adjacency(bad)).validate()
