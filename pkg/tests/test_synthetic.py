import numpy as np
import pytest

from jointsparse.oracle import dense_svd_norm
from jointsparse.synthetic import ProblemSpec, load_problem, make_problem, save_problem


def supports(u):
    return [set(np.flatnonzero(u[:, c])) for c in range(u.shape[1])]


def test_full_overlap_shares_support():
    p = make_problem(ProblemSpec(n_indices=40, n_channels=3, sparsity=6, seed=1))
    s = supports(p.u_true)
    assert len(s[0]) == 6 and s[0] == s[1] == s[2]


def test_zero_overlap_gives_disjoint_supports():
    p = make_problem(ProblemSpec(n_indices=40, n_channels=2, n_blocks=2, sparsity=6, overlap=0.0))
    s = supports(p.u_true)
    assert len(s[0]) == len(s[1]) == 6 and not s[0] & s[1]


def test_operator_norm_and_data():
    p = make_problem(ProblemSpec(n_indices=30, n_channels=2, n_blocks=1, sparsity=4, seed=2))
    assert dense_svd_norm(p.op.to_dense()) <= 0.9
    np.testing.assert_allclose(np.concatenate(p.g), p.op.to_dense() @ p.u_true.ravel())


def test_luma_identity_block_and_chroma_scale():
    spec = ProblemSpec(n_indices=20, n_channels=3, n_blocks=3, sparsity=5, rows=8,
                       full_first_channel=True, chroma_scale=0.1, seed=3)
    p = make_problem(spec)
    T00 = p.op.blocks[0][0].matmat(np.eye(20)) * p.op.scale
    np.testing.assert_allclose(T00, T00[0, 0] * np.eye(20))
    assert np.abs(p.u_true[:, 1:]).max() < np.abs(p.u_true[:, 0]).max()


@pytest.mark.parametrize("kwargs", [dict(sparsity=50, n_indices=40), dict(overlap=0.0, sparsity=20, n_indices=40),
                                    dict(overlap=1.5), dict(noise=-1.0), dict(chroma_scale=0.0),
                                    dict(full_first_channel=True, n_blocks=1)])
def test_infeasible_specs(kwargs):
    with pytest.raises(ValueError):
        make_problem(ProblemSpec(**kwargs))


def test_save_load_round_trip_is_byte_stable(tmp_path):
    spec = ProblemSpec(n_indices=16, n_channels=2, n_blocks=2, sparsity=3, noise=0.01, seed=5)
    a = save_problem(make_problem(spec), tmp_path / "a.npz")
    b = save_problem(make_problem(spec), tmp_path / "b.npz")
    assert a.read_bytes() == b.read_bytes()
    p = load_problem(a)
    assert p.spec == spec
    np.testing.assert_array_equal(p.u_true, make_problem(spec).u_true)
    np.testing.assert_array_equal(p.op.to_dense(), make_problem(spec).op.to_dense())
