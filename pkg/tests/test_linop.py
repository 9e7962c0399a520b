import warnings

import numpy as np
import pytest
from scipy.sparse.linalg import aslinearoperator

from jointsparse.linop import (BlockOperator, BlurDecimate, HaarSynthesis, blur_decimate_matrix,
                               build_color_model, diagonal_operator, estimate_norm,
                               estimate_residual_norm, gaussian_kernel, identity_operator, inner,
                               rescale_to_contraction, shared_design_operator, zero_operator)
from jointsparse.oracle import dense_svd_norm


def adjoint_defect(op, rng, pairs=100):
    worst = 0.0
    for _ in range(pairs):
        u = rng.standard_normal(op.domain_shape)
        g = [rng.standard_normal(n) for n in op.range_sizes]
        lhs, rhs = inner(op.apply(u), g), float(np.sum(u * op.adjoint(g)))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


def dense_grid(rng, N=2, M=3, rows=4, L=6):
    return [[rng.standard_normal((rows, L)) for _ in range(M)] for _ in range(N)]


# --- apply / adjoint -----------------------------------------------------------------

def test_identity_apply(rng):
    u = rng.standard_normal((5, 2))
    out = identity_operator(5, 2).apply(u)
    np.testing.assert_array_equal(np.concatenate(out), u.T.ravel())


def test_zero_operator(rng):
    op = zero_operator(4, 3, [2, 5])
    out = op.apply(rng.standard_normal((4, 3)))
    assert [o.shape for o in out] == [(2,), (5,)]
    assert all(np.all(o == 0) for o in out)


def test_unit_vector_gives_matrix_column(rng):
    blocks = dense_grid(rng)
    op = BlockOperator(blocks)
    for lam, ell in [(0, 0), (3, 1), (5, 2)]:
        u = np.zeros((6, 3))
        u[lam, ell] = 1.0
        out = op.apply(u)
        for j in range(2):
            np.testing.assert_array_equal(out[j], blocks[j][ell][:, lam])


def test_to_dense_matches_apply(rng):
    op = BlockOperator(dense_grid(rng), scale=0.7)
    u = rng.standard_normal((6, 3))
    np.testing.assert_allclose(op.to_dense() @ u.ravel(), np.concatenate(op.apply(u)), atol=1e-13)


def test_adjoint_dense_grid(rng):
    assert adjoint_defect(BlockOperator(dense_grid(rng), scale=0.3), rng) <= 1e-10


def test_single_block_equals_scalar_operator(rng):
    A = rng.standard_normal((7, 5))
    op = BlockOperator([[None, A, None]])
    u = rng.standard_normal((5, 3))
    np.testing.assert_array_equal(op.apply(u)[0], A @ u[:, 1])


def test_shape_errors(rng):
    with pytest.raises(ValueError, match="same number of channels"):
        BlockOperator([[np.eye(2), None], [np.eye(2)]])
    with pytest.raises(ValueError, match="disagree"):
        BlockOperator([[np.eye(2), np.eye(3)]])
    with pytest.raises(ValueError, match="number of indices"):
        BlockOperator([[None, None]])
    with pytest.raises(ValueError, match="output size"):
        BlockOperator([[None, None]], n_indices=3)
    op = identity_operator(3, 2)
    with pytest.raises(ValueError, match="indices"):
        op.apply(np.zeros((4, 2)))
    with pytest.raises(ValueError, match="do not match"):
        op.adjoint([np.zeros(3)])


def test_shared_design(rng):
    X = rng.standard_normal((8, 5))
    U = rng.standard_normal((5, 2))
    out = shared_design_operator(X, 2).apply(U)
    np.testing.assert_allclose(np.column_stack(out), X @ U)


# --- Haar and blur -------------------------------------------------------------------

def test_haar_orthonormal(rng):
    F = HaarSynthesis(16, levels=3)
    x = rng.standard_normal(256)
    np.testing.assert_allclose(F.rmatvec(F.matvec(x)), x, atol=1e-12)
    assert np.linalg.norm(F.matvec(x)) == pytest.approx(np.linalg.norm(x), rel=1e-13)
    np.testing.assert_allclose(F.H.matvec(F.matvec(x)), x, atol=1e-12)


def test_haar_scales():
    j = HaarSynthesis(8, levels=2).scales().reshape(8, 8)
    assert j[0, 0] == 0 and j[1, 1] == 0
    assert j[0, 2] == 1 and j[3, 3] == 1
    assert j[0, 4] == 2 and j[7, 7] == 2


def test_haar_rejects_bad_side():
    with pytest.raises(ValueError):
        HaarSynthesis(12, levels=3)


def test_gaussian_kernel():
    k = gaussian_kernel(1.0)
    assert k.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(k, k[::-1])
    np.testing.assert_array_equal(gaussian_kernel(0.0), [1.0])


def test_blur_decimate_delta_image_against_direct_convolution():
    k = gaussian_kernel(1.0)
    img = np.zeros((8, 8))
    img[3, 5] = 1.0
    out = BlurDecimate(k, 8, 4).matvec(img.ravel())
    assert out.shape == (4,)
    # direct 2-D convolution with mirror padding, then decimation
    r = len(k) // 2
    padded = np.pad(img, r, mode="symmetric")
    direct = np.zeros((8, 8))
    for a in range(8):
        for b in range(8):
            direct[a, b] = np.sum(np.outer(k, k) * padded[a:a + 2 * r + 1, b:b + 2 * r + 1])
    np.testing.assert_allclose(out.reshape(2, 2), direct[::4, ::4], atol=1e-15)


def test_color_model_identity_blur_gives_three_F_blocks(rng):
    F = HaarSynthesis(8, 2)
    op = build_color_model([1.0], 1, F)
    u = rng.standard_normal((64, 3))
    out = op.apply(u)
    for c in range(3):
        np.testing.assert_allclose(out[c], F.matvec(u[:, c]), atol=1e-14)


def test_color_model_preserves_dc():
    F = HaarSynthesis(16, 2)
    op = build_color_model(gaussian_kernel(1.5), 4, F)
    u = np.column_stack([F.rmatvec(np.full(256, 0.3))] * 3)
    out = op.apply(u)
    assert [o.shape for o in out] == [(256,), (16,), (16,)]
    np.testing.assert_allclose(out[1], 0.3, atol=1e-14)


def test_color_model_adjoint(rng):
    op = build_color_model(gaussian_kernel(1.0), 4, HaarSynthesis(16, 2), block_weights=(2, 1, 1))
    assert adjoint_defect(op, rng) <= 1e-10


def test_color_model_rejects_unnormalised_kernel():
    with pytest.raises(ValueError, match="sum to 1"):
        build_color_model([1.0, 1.0], 1, HaarSynthesis(8, 1))
    with pytest.raises(ValueError, match="divide"):
        build_color_model([1.0], 3, HaarSynthesis(8, 1))


def test_blur_matrix_rows_sum_to_one():
    B = blur_decimate_matrix(gaussian_kernel(2.0), 16, 2)
    np.testing.assert_allclose(B.sum(axis=1), 1.0)


# --- norm estimation -----------------------------------------------------------------

def test_estimate_norm_diagonal():
    assert estimate_norm(diagonal_operator([0.5, 0.25])) == pytest.approx(0.505, rel=1e-9)


def test_estimate_norm_identity():
    assert estimate_norm(identity_operator(10)) == pytest.approx(1.01, rel=1e-12)


def test_estimate_norm_matches_svd(rng):
    A = rng.standard_normal((5, 5))
    est = estimate_norm(BlockOperator([[A]]), safety=1.0)
    assert abs(est - dense_svd_norm(A)) <= 1e-6


def test_estimate_norm_warns_without_convergence(rng):
    op = BlockOperator([[rng.standard_normal((30, 30))]])
    with pytest.warns(Warning, match="did not converge"):
        estimate_norm(op, max_iters=2)


def test_estimate_norm_is_deterministic(rng):
    op = BlockOperator(dense_grid(rng))
    assert estimate_norm(op) == estimate_norm(op)


def test_rescale_examples():
    _, s = rescale_to_contraction(diagonal_operator([2.0, 1.0]), 0.9)
    assert s == pytest.approx(0.9 / 2.02)
    assert s == pytest.approx(0.445, abs=1e-3)
    _, s = rescale_to_contraction(diagonal_operator([0.5]), 0.9)
    assert s == pytest.approx(1.782, abs=5e-4)


def test_rescale_zero_operator():
    with pytest.raises(ValueError, match="zero operator"):
        rescale_to_contraction(zero_operator(3, 1, [3]))


def test_rescaled_norm_is_below_target(rng):
    op, _ = rescale_to_contraction(BlockOperator(dense_grid(rng, rows=20, L=10)), 0.9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert estimate_norm(op) <= 0.95
    assert dense_svd_norm(op.to_dense()) <= 0.9


def test_residual_norm_underdetermined_is_one(rng):
    op, _ = rescale_to_contraction(BlockOperator([[rng.standard_normal((4, 6))]]))
    assert estimate_residual_norm(op) == 1.0


def test_residual_norm_overdetermined(rng):
    A = rng.standard_normal((40, 6))
    op, _ = rescale_to_contraction(BlockOperator([[A]]))
    exact = 1 - np.linalg.svd(op.to_dense(), compute_uv=False)[-1] ** 2
    est = estimate_residual_norm(op)
    assert exact <= est <= 1.0
    assert est == pytest.approx(min(1.0, 1.01 * exact), rel=1e-6)


def test_linear_operator_blocks_are_accepted(rng):
    A = rng.standard_normal((3, 4))
    op = BlockOperator([[aslinearoperator(A), A]])
    u = rng.standard_normal((4, 2))
    np.testing.assert_allclose(op.apply(u)[0], A @ u[:, 0] + A @ u[:, 1])
