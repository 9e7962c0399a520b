"""Seeded synthetic multi-channel sparse recovery problems and their storage."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .linop import BlockOperator, rescale_to_contraction


@dataclass(frozen=True)
class ProblemSpec:
    n_indices: int = 128
    n_channels: int = 3
    n_blocks: int = 3
    sparsity: int = 16
    overlap: float = 1.0
    noise: float = 0.0
    rows: int | None = None
    full_first_channel: bool = False
    chroma_scale: float = 1.0
    target_norm: float = 0.9
    seed: int = 0

    def validate(self):
        if self.n_indices < 1 or self.n_channels < 1 or self.n_blocks < 1:
            raise ValueError("n_indices, n_channels and n_blocks must be positive")
        if not 0 <= self.sparsity <= self.n_indices:
            raise ValueError(f"sparsity {self.sparsity} must lie in [0, {self.n_indices}]")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")
        shared = int(round(self.overlap * self.sparsity))
        if shared + self.n_channels * (self.sparsity - shared) > self.n_indices:
            raise ValueError("supports do not fit: need shared + M*(k - shared) <= n_indices")
        if self.chroma_scale <= 0:
            raise ValueError("chroma_scale must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if self.full_first_channel and self.n_blocks != self.n_channels:
            raise ValueError("full_first_channel needs one block per channel")


@dataclass
class Problem:
    op: BlockOperator
    g: list
    u_true: np.ndarray
    spec: ProblemSpec


def _supports(spec: ProblemSpec, rng) -> list[np.ndarray]:
    shared = int(round(spec.overlap * spec.sparsity))
    private = spec.sparsity - shared
    perm = rng.permutation(spec.n_indices)
    common = perm[:shared]
    out, pos = [], shared
    for _ in range(spec.n_channels):
        out.append(np.sort(np.concatenate([common, perm[pos:pos + private]])))
        pos += private
    return out


def make_problem(spec: ProblemSpec) -> Problem:
    """Draw supports, coefficients, a Gaussian operator and noisy data.

    With ``n_blocks == n_channels`` each channel has its own measurement
    matrix (block-diagonal operator); otherwise every block mixes all
    channels.  ``full_first_channel`` observes channel 0 directly, the
    analogue of a full-resolution luminance channel; ``chroma_scale``
    shrinks the coefficients of the remaining channels.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    L, M, N = spec.n_indices, spec.n_channels, spec.n_blocks
    rows = spec.rows if spec.rows is not None else max(1, L // 2)

    u = np.zeros((L, M))
    for ell, supp in enumerate(_supports(spec, rng)):
        u[supp, ell] = rng.standard_normal(len(supp)) * (1.0 if ell == 0 else spec.chroma_scale)

    diagonal = N == M
    blocks = []
    for j in range(N):
        row = []
        for ell in range(M):
            if diagonal and j != ell:
                row.append(None)
            elif spec.full_first_channel and j == 0:
                row.append(np.eye(L))
            else:
                row.append(rng.standard_normal((rows, L)) / np.sqrt(rows))
        blocks.append(row)
    op, _ = rescale_to_contraction(BlockOperator(blocks), spec.target_norm)
    # bake the scale into the stored matrices
    blocks = [[None if b is None else op.scale * b for b in row] for row in blocks]
    op = BlockOperator(blocks)
    g = [gj + spec.noise * rng.standard_normal(gj.shape) for gj in op.apply(u)]
    return Problem(op, g, u, spec)


def save_problem(problem: Problem, path) -> Path:
    """Write the problem as a single ``.npz`` (deterministic bytes)."""
    path = Path(path)
    arrays = {"u_true": problem.u_true}
    for j, row in enumerate(problem.op.blocks):
        for ell, b in enumerate(row):
            if b is not None:
                arrays[f"T_{j}_{ell}"] = b.matmat(np.eye(b.shape[1])) * problem.op.scale
        arrays[f"g_{j}"] = problem.g[j]
    for key, value in asdict(problem.spec).items():
        arrays[f"spec_{key}"] = np.array(-1 if value is None else value)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_problem(path) -> Problem:
    with np.load(path) as data:
        fields = {k[5:]: data[k].item() for k in data.files if k.startswith("spec_")}
        if fields.get("rows") == -1:
            fields["rows"] = None
        spec = ProblemSpec(**fields)
        N, M = spec.n_blocks, spec.n_channels
        blocks = [[data[f"T_{j}_{ell}"] if f"T_{j}_{ell}" in data.files else None
                   for ell in range(M)] for j in range(N)]
        g = [data[f"g_{j}"] for j in range(N)]
        u_true = data["u_true"]
    return Problem(BlockOperator(blocks), g, u_true, spec)
