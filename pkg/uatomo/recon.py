# UATomo performs ultrasound attenuation tomography with a passive reflector.
# Copyright (C) 2024 The UATomo Development Team
#
# This file is part of UATomo.
#
# UATomo is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# UATomo is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
# --
"""Regularized L1 reconstruction of the attenuation image.

The image minimizes ``||L alpha + b||_1 + lambda ||D alpha||_1`` where ``D``
stacks weighted horizontal, vertical and diagonal differences. Both absolute
values are replaced by ``sqrt(x^2 + eps^2)`` and the smooth surrogate is
minimized with SciPy's L-BFGS-B, starting from a zero image. The smoothing
parameter is lowered in stages, each stage warm-started from the previous.
"""


from dataclasses import dataclass, field
import logging
import time

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import csr_matrix

try:
    from numba import jit
except ImportError:
    jit = None

from .geometry import DimensionError
from .physics import db_per_cm_to_np_per_m, np_per_m_to_db_per_cm


__all__ = [
    "AttenuationImage",
    "RegularizerMatrix",
    "ReconConfig",
    "ConvergenceReport",
    "build_regularizer",
    "objective",
    "solve",
]


logger = logging.getLogger(__name__)


DEFAULT_WEIGHTS = (1.0, 1.0, 1 / np.sqrt(2), 1 / np.sqrt(2))


@dataclass(frozen=True, eq=False)
class AttenuationImage:
    """Attenuation values on an ``ImagingGrid``, stored in Np/m."""

    grid: object
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.grid.check_image(self.values), dtype=float)
        if not np.isfinite(values).all():
            raise ValueError("Attenuation image contains non-finite values.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_db_per_cm(cls, grid, values):
        """Create an image from values in dB/cm."""
        return cls(grid, db_per_cm_to_np_per_m(values))

    @property
    def db_per_cm(self):  # noqa: D401
        """Values converted to dB/cm."""
        return np_per_m_to_db_per_cm(self.values)


@dataclass(frozen=True, eq=False)
class RegularizerMatrix:
    """Stacked directional first differences, one row per neighboring cell pair."""

    matrix: csr_matrix
    weights: tuple
    counts: tuple

    @property
    def shape(self):  # noqa: D401
        """Shape ``(npair, N1 * N2)``."""
        return self.matrix.shape


def build_regularizer(grid, weights=DEFAULT_WEIGHTS):
    """Build the anisotropic difference operator of a grid.

    Parameters
    ----------
    grid
        An ``ImagingGrid``.
    weights
        Weights ``(horizontal, vertical, diagonal1, diagonal2)``. Diagonal 1
        couples ``(i, j)`` with ``(i + 1, j + 1)``, diagonal 2 couples
        ``(i, j + 1)`` with ``(i + 1, j)``. Directions with zero weight are
        left out.

    Returns
    -------
    regularizer
        A ``RegularizerMatrix``. Pairs across the grid boundary do not exist,
        there is no wrap-around.

    """
    if len(weights) != 4:
        raise ValueError("Expecting four directional weights.")
    if min(weights) < 0:
        raise ValueError("Directional weights must be nonnegative.")
    index = np.arange(grid.size).reshape(grid.shape)
    pairs = [
        (index[:, :-1], index[:, 1:]),
        (index[:-1, :], index[1:, :]),
        (index[:-1, :-1], index[1:, 1:]),
        (index[:-1, 1:], index[1:, :-1]),
    ]
    firsts, seconds, values, counts = [], [], [], []
    for (first, second), weight in zip(pairs, weights):
        count = first.size if weight > 0 else 0
        counts.append(count)
        if count > 0:
            firsts.append(first.ravel())
            seconds.append(second.ravel())
            values.append(np.full(count, float(weight)))
    nrow = sum(counts)
    if nrow == 0:
        return RegularizerMatrix(
            csr_matrix((0, grid.size)), tuple(weights), tuple(counts)
        )
    rows = np.arange(nrow)
    kappa = np.concatenate(values)
    matrix = csr_matrix(
        (
            np.concatenate([kappa, -kappa]),
            (np.concatenate([rows, rows]), np.concatenate(firsts + seconds)),
        ),
        shape=(nrow, grid.size),
    )
    return RegularizerMatrix(matrix, tuple(weights), tuple(counts))


@dataclass(frozen=True)
class ReconConfig:
    """Settings of the reconstruction.

    Parameters
    ----------
    lam
        Regularization weight lambda.
    weights
        Directional difference weights, see ``build_regularizer``.
    epsilon
        Smoothing of the absolute values. None means
        ``epsilon_factor * median(|b|)``.
    epsilon_factor
        Relative smoothing used when ``epsilon`` is None.
    max_iterations
        L-BFGS iteration budget of every continuation stage.
    gtol
        Gradient tolerance, relative to the gradient norm of the zero image.
    length_scale
        Unit of length, in meters, in which path lengths enter the objective.
        The default measures them in centimeters, so that ``lam`` weighs
        attenuation differences in Np/cm against data in Np. The inputs and
        the returned image stay in SI units.
    continuation_stages
        Number of extra stages with a ten times larger smoothing each.

    """

    lam: float = 0.6
    weights: tuple = DEFAULT_WEIGHTS
    epsilon: float = None
    epsilon_factor: float = 1e-6
    max_iterations: int = 2000
    gtol: float = 1e-8
    length_scale: float = 0.01
    continuation_stages: int = 4

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative.")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be strictly positive.")
        if not self.epsilon_factor > 0:
            raise ValueError("epsilon_factor must be strictly positive.")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least one.")
        if not self.length_scale > 0:
            raise ValueError("length_scale must be strictly positive.")
        if self.continuation_stages < 0:
            raise ValueError("continuation_stages must be nonnegative.")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))


@dataclass
class ConvergenceReport:
    """Outcome of ``solve``."""

    converged: bool
    iterations: int
    function_calls: int
    objective: float
    data_term: float
    regularizer_term: float
    gradient_norm: float
    epsilon: float
    message: str
    history: list = field(default_factory=list)

    def to_text(self):
        """Return the report as ``key=value`` lines."""
        lines = [
            "converged={}".format(int(self.converged)),
            "iterations={:d}".format(self.iterations),
            "function_calls={:d}".format(self.function_calls),
            "objective={:.12e}".format(self.objective),
            "data_term={:.12e}".format(self.data_term),
            "regularizer_term={:.12e}".format(self.regularizer_term),
            "gradient_norm={:.12e}".format(self.gradient_norm),
            "epsilon={:.12e}".format(self.epsilon),
            "message={}".format(self.message),
        ]
        return "\n".join(lines) + "\n"


def jit_smooth_abs(x, eps):
    """Sum of ``sqrt(x^2 + eps^2)`` and its derivative.

    This function is kept outside the objective to make it easily jit-able.
    """
    root = np.sqrt(x * x + eps * eps)
    return root.sum(), x / root


if jit is not None:
    jit_smooth_abs = jit(nopython=True)(jit_smooth_abs)


def _sparse(operator):
    return getattr(operator, "matrix", operator)


def _vector(data):
    return np.asarray(getattr(data, "values", data), dtype=float)


def _terms(alpha, L, b, D, lam, eps):
    """Return data term, regularizer term and the gradient of their weighted sum."""
    data_term, data_slope = jit_smooth_abs(L.dot(alpha) + b, eps)
    gradient = L.T.dot(data_slope)
    reg_term = 0.0
    if D.shape[0] > 0:
        reg_term, reg_slope = jit_smooth_abs(D.dot(alpha), eps)
        gradient += lam * D.T.dot(reg_slope)
    return data_term, reg_term, gradient


def objective(alpha, L, b, D, lam, eps):
    """Compute the smoothed objective and its exact gradient.

    Parameters
    ----------
    alpha
        Image values, flat or with the grid shape.
    L
        Ray-path matrix (``RayPathMatrix`` or sparse matrix).
    b
        Normalized data (``NormalizedData`` or vector).
    D
        Regularizer (``RegularizerMatrix`` or sparse matrix).
    lam
        Regularization weight.
    eps
        Smoothing parameter of the absolute values.

    Returns
    -------
    value
        ``sum(sqrt((L alpha + b)^2 + eps^2)) + lam * sum(sqrt((D alpha)^2 + eps^2))``
    gradient
        Gradient w.r.t. the flat ``alpha``.

    """
    L = _sparse(L)
    D = _sparse(D)
    alpha = np.asarray(alpha, dtype=float).ravel()
    b = _vector(b)
    if alpha.size != L.shape[1] or b.shape != (L.shape[0],) or D.shape[1] != L.shape[1]:
        raise DimensionError(
            "Inconsistent sizes: image {}, matrix {}, data {}, regularizer {}.".format(
                alpha.size, L.shape, b.shape, D.shape
            )
        )
    data_term, reg_term, gradient = _terms(alpha, L, b, D, lam, eps)
    return data_term + lam * reg_term, gradient


def _data_scale(b):
    for scale in np.median(abs(b)), abs(b).max():
        if scale > 0:
            return scale
    return 1.0


def _canonical_rows(lmat, b):
    """Sort the rays by their contents, so that the input order does not matter.

    Rows with equal keys are bit-identical, including the data entry. The
    returned matrix is a copy with sorted column indices.
    """
    lmat = csr_matrix(lmat, copy=True)
    lmat.sum_duplicates()
    bounds = zip(lmat.indptr[:-1], lmat.indptr[1:])
    keys = [
        (
            b[iray : iray + 1].tobytes(),
            lmat.indices[start:stop].tobytes(),
            lmat.data[start:stop].tobytes(),
        )
        for iray, (start, stop) in enumerate(bounds)
    ]
    order = np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=int)
    return lmat[order], b[order]


# A stage ends when one iteration lowers the objective by less than this
# fraction of the largest possible smoothing bias, ``nterm * eps``.
STAGE_TOLERANCE = 1e-2


def solve(L, b, config=None):
    """Reconstruct the attenuation image.

    Parameters
    ----------
    L
        The ``RayPathMatrix``.
    b
        ``NormalizedData`` (or a vector with one entry per ray).
    config
        A ``ReconConfig``, defaults are used when None.

    Returns
    -------
    image
        The reconstructed ``AttenuationImage`` in Np/m. Negative values are
        kept. The result does not depend on the order of the rays.
    report
        A ``ConvergenceReport``. When a stage runs out of iterations, the last
        (and best) iterate is returned with ``converged=False``. The history
        holds ``(stage, objective)`` after every accepted step.

    """
    if config is None:
        config = ReconConfig()
    b = _vector(b)
    if b.shape != (L.shape[0],):
        raise DimensionError(
            "Data has shape {}, matrix expects ({},).".format(b.shape, L.shape[0])
        )
    if not np.isfinite(b).all():
        raise ValueError("Normalized data contains NaN or infinite values.")
    grid = L.grid
    # Lengths in units of length_scale, attenuation in Np per length_scale.
    lmat, b = _canonical_rows(_sparse(L) / config.length_scale, b)
    dmat = build_regularizer(grid, config.weights).matrix
    lam = config.lam
    eps_final = config.epsilon or config.epsilon_factor * _data_scale(b)
    epsilons = eps_final * 10.0 ** np.arange(config.continuation_stages, -1, -1)
    nterm = lmat.shape[0] + lam * dmat.shape[0]

    x = np.zeros(grid.size)
    gradient0 = _terms(x, lmat, b, dmat, lam, eps_final)[2]
    gtol = config.gtol * abs(gradient0).max()
    history = []
    info = {}

    def cost_grad(pars, eps):
        time_start = time.process_time()
        data_term, reg_term, gradient = _terms(pars, lmat, b, dmat, lam, eps)
        info.update(
            pars=pars.copy(),
            data_term=data_term,
            reg_term=reg_term,
            value=data_term + lam * reg_term,
            gradient=gradient,
            time=time.process_time() - time_start,
        )
        return info["value"], gradient

    def callback(current_pars):
        if not np.array_equal(current_pars, info["pars"]):
            cost_grad(current_pars, epsilons[stage])
        history.append((stage, info["value"]))
        gradient = info["gradient"]
        logger.info(
            "{:5d} {:5d} {:12.5e} {:12.5e} {:12.5e} {:12.4e} {:12.7f}".format(
                stage,
                len(history),
                info["value"],
                info["data_term"],
                info["reg_term"],
                np.linalg.norm(gradient) / np.sqrt(len(gradient)),
                info["time"],
            )
        )

    iterations = 0
    calls = 0
    status = 0
    converged = True
    message = "zero gradient at the initial image"
    if gtol > 0:
        logger.info("Reconstruction on a %d x %d grid", grid.n_axial, grid.n_lateral)
        logger.info(
            "Stage  Iter    objective    data term  regularizer     grad.rms  cputime (s)"
        )
        logger.info(
            "-----  ----  -----------  -----------  -----------  -----------  -----------"
        )
        for stage, eps in enumerate(epsilons):
            data_term, reg_term, _gradient = _terms(x, lmat, b, dmat, lam, eps)
            value = data_term + lam * reg_term
            # L-BFGS-B scales ftol with max(|f|, 1).
            ftol = max(STAGE_TOLERANCE * nterm * eps / max(value, 1.0), 1e-15)
            with np.errstate(over="raise", divide="raise", invalid="raise"):
                optresult = minimize(
                    cost_grad,
                    x,
                    args=(eps,),
                    method="L-BFGS-B",
                    jac=True,
                    callback=callback,
                    options={
                        "maxiter": config.max_iterations,
                        "gtol": gtol,
                        "ftol": ftol,
                        "maxcor": 20,
                    },
                )
            x = optresult.x
            iterations += optresult.nit
            calls += optresult.nfev
            status = optresult.status
            message = str(optresult.message)
            if status == 1:
                converged = False
                break
        logger.info('Optimizer message: "%s"', message)

    if status == 2:
        logger.warning("Line search stalled at the final smoothing: %s", message)
    if not converged:
        logger.warning(
            "No convergence within %d iterations per stage.", config.max_iterations
        )
    data_term, reg_term, gradient = _terms(x, lmat, b, dmat, lam, eps_final)
    report = ConvergenceReport(
        converged=bool(converged),
        iterations=int(iterations),
        function_calls=int(calls),
        objective=float(data_term + lam * reg_term),
        data_term=float(data_term),
        regularizer_term=float(reg_term),
        gradient_norm=float(np.linalg.norm(gradient)),
        epsilon=float(eps_final),
        message=message,
        history=history,
    )
    return AttenuationImage(grid, x / config.length_scale), report
