"""Neural constitutive models in nonlinear finite elements."""

from ._core import (
    ConvergenceError,
    DomainError,
    FeModel,
    Model,
    ValidationError,
    __version__,
    assemble,
    eval_batch,
    eval_point,
    gent_thomas_model,
    load_model,
    load_problem,
    loading_path,
    make_twist_cube,
    model_from_json,
    newton_solve,
    path_scan,
    random_model,
    verify,
)

__all__ = [
    "ConvergenceError",
    "DomainError",
    "FeModel",
    "Model",
    "ValidationError",
    "assemble",
    "eval_batch",
    "eval_point",
    "gent_thomas_model",
    "load_model",
    "load_problem",
    "loading_path",
    "make_twist_cube",
    "model_from_json",
    "newton_solve",
    "path_scan",
    "random_model",
    "verify",
]
