"""Linear algebra, the MLP, and optimizers."""

from coadapt.numerics.linalg import as_matrix, eig_complex, hessenberg, svd_values
from coadapt.numerics.mlp import (
    HEAD_MODES,
    ForwardCache,
    Gradients,
    MlpParams,
    backward_from_cache,
    central_difference,
    finite_diff_grad,
    init_mlp,
    mlp_backward,
    mlp_forward,
    mlp_forward_cache,
)
from coadapt.numerics.optim import AdamState, adam_init, adam_step, sgd_step

__all__ = [
    "HEAD_MODES",
    "AdamState",
    "ForwardCache",
    "Gradients",
    "MlpParams",
    "adam_init",
    "adam_step",
    "as_matrix",
    "backward_from_cache",
    "central_difference",
    "eig_complex",
    "finite_diff_grad",
    "hessenberg",
    "init_mlp",
    "mlp_backward",
    "mlp_forward",
    "mlp_forward_cache",
    "sgd_step",
    "svd_values",
]
