"""
Rational matrix all-pass filters in Direct Form II and their design from
unitary samples.

A filter is a right co-prime pair G(z) = N(z) D(z)^-1 of matrix polynomials in
z^-1 with D_0 = I. Designs are produced in lattice coordinates (see lattice.py)
so every candidate is stable and all-pass by construction; lattice_to_lccde
turns them into the polynomial pair when a Direct Form II realisation is needed.

Usage:
    params = snip_design([(omega_k, V_k), ...], order=3)
    G = lattice_to_lccde(params)
    V = evaluate(G, omega)
"""

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy import optimize

from config import (
    COND_LIMIT,
    DESIGN_MAX_ITER,
    DESIGN_RESTARTS,
    DESIGN_TOL,
)
from errors import DesignNotConverged, InvalidInput, NumericalInstability, UnstableLattice
from lattice import (
    LatticeParams,
    clip_contractive,
    stability_check,
    stage_response,
    t_matrix,
)
from matcore import CMat, as_cmat, assert_unitary, hermitian, phase_align, unitary_project

logger = logging.getLogger(__name__)

FORMAT_HEADER = "lattice-params v1"
# Reflection matrices stay this far inside the unit ball while designing.
DESIGN_MARGIN = 1e-6
# ftol / xtol / gtol handed to the trust-region solver.
SOLVER_TOL = 1e-12
MATCH_MODES = ("exact", "subspace")


@dataclass(frozen=True)
class MatrixPolynomial:
    """Coefficients C_0..C_{M-1} of sum_i C_i z^-i, stacked as (M, m, m)."""

    coeffs: CMat

    def __post_init__(self):
        C = as_cmat(self.coeffs, "polynomial coefficients")
        if C.ndim == 2:
            C = C[None]
        if C.ndim != 3 or C.shape[0] < 1 or C.shape[1] != C.shape[2]:
            raise InvalidInput(f"Polynomial needs at least one square coefficient, got {C.shape}.")
        object.__setattr__(self, "coeffs", C)

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def at(self, omegas) -> CMat:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        powers = np.exp(-1j * np.outer(omegas, np.arange(len(self))))
        return np.einsum("wi,ijk->wjk", powers, self.coeffs)


@dataclass(frozen=True)
class RationalAllPass:
    num: MatrixPolynomial
    den: MatrixPolynomial

    def __post_init__(self):
        if len(self.num) != len(self.den):
            raise InvalidInput(
                f"Numerator has {len(self.num)} coefficients but denominator has {len(self.den)}."
            )
        if self.num.coeffs.shape[1:] != self.den.coeffs.shape[1:]:
            raise InvalidInput("Numerator and denominator coefficient sizes differ.")
        eye = np.eye(self.den.coeffs.shape[1])
        if np.linalg.norm(self.den.coeffs[0] - eye) > 1e-10:
            raise InvalidInput("Denominator must be normalized so that D_0 = I.")

    @property
    def m(self) -> int:
        return self.num.coeffs.shape[1]

    @property
    def order(self) -> int:
        return len(self.num)


@dataclass(frozen=True)
class DesignResult:
    params: LatticeParams
    residual: float
    iterations: int
    restarts: int


def evaluate_grid(G: RationalAllPass, omegas) -> CMat:
    N = G.num.at(omegas)
    D = G.den.at(omegas)
    if np.max(np.linalg.cond(D)) > COND_LIMIT:
        raise NumericalInstability("Denominator D(e^jw) is numerically singular.")
    # X D = N  <=>  D^H X^H = N^H
    return hermitian(np.linalg.solve(hermitian(D), hermitian(N)))


def evaluate(G: RationalAllPass, omega: float) -> CMat:
    """N(e^jw) D(e^jw)^-1."""
    return evaluate_grid(G, [omega])[0]


def paraunitary_error(G: RationalAllPass, n_freqs: int = 128) -> float:
    omegas = np.linspace(-np.pi, np.pi, n_freqs, endpoint=False)
    V = evaluate_grid(G, omegas)
    return float(np.max(np.linalg.norm(hermitian(V) @ V - np.eye(G.m), axis=(-2, -1))))


def lattice_to_lccde(params: LatticeParams) -> RationalAllPass:
    """
    Compose the lattice stages into one (N, D) pair, innermost stage first.

    Closing one stage around G = N D^-1 gives E = D + K^H z^-1 N and
    N' = K T21^-1 E + T12 z^-1 N, D' = T21^-1 E; both are then right-multiplied
    by T21 so that D'_0 = I again.
    """
    if not stability_check(params):
        raise UnstableLattice("Lattice parameters violate the contractivity condition.")
    m = params.m
    N = params.residue[None].copy()
    D = np.eye(m, dtype=np.complex128)[None]
    for K in params.kappas[::-1]:
        T = t_matrix(K)
        zero = np.zeros((1, m, m), dtype=np.complex128)
        shifted_N = np.concatenate([zero, N])
        E = np.concatenate([D, zero]) + hermitian(K) @ shifted_N
        D_new = np.linalg.solve(np.broadcast_to(T.T21, E.shape), E)
        N_new = K @ D_new + T.T12 @ shifted_N
        D = D_new @ T.T21
        N = N_new @ T.T21
    D[0] = np.eye(m)
    return RationalAllPass(num=MatrixPolynomial(N), den=MatrixPolynomial(D))


# --- Interpolation design -------------------------------------------------------


def _check_nodes(nodes) -> tuple[npt.NDArray[np.float64], CMat]:
    if not nodes:
        raise InvalidInput("At least one interpolation node is required.")
    omegas = np.array([float(w) for w, _ in nodes])
    if np.any(omegas <= -np.pi) or np.any(omegas > np.pi):
        raise InvalidInput("Node frequencies must lie in (-pi, pi].")
    if len(np.unique(omegas)) != len(omegas):
        raise InvalidInput("Node frequencies must be distinct.")
    mats = [assert_unitary(V, what=f"node {k} precoder") for k, (_, V) in enumerate(nodes)]
    if len({V.shape for V in mats}) != 1:
        raise InvalidInput("All node precoders must have the same size.")
    return omegas, np.array(mats)


def _contract(X: CMat) -> CMat:
    """X (I + X^H X)^(-1/2): singular values s -> s / sqrt(1 + s^2), always below 1."""
    if X.shape[0] == 0:
        return X
    w, U = np.linalg.eigh(hermitian(X) @ X)
    scale = (U * (1.0 / np.sqrt(1.0 + np.clip(w, 0.0, None)))[..., None, :]) @ hermitian(U)
    return np.array([clip_contractive(K, DESIGN_MARGIN) for K in X @ scale]).reshape(X.shape)


def _uncontract(kappas: CMat) -> CMat:
    """Inverse of _contract: K (I - K^H K)^(-1/2)."""
    if kappas.shape[0] == 0:
        return kappas
    K = np.array([clip_contractive(k, DESIGN_MARGIN) for k in kappas]).reshape(kappas.shape)
    w, U = np.linalg.eigh(hermitian(K) @ K)
    w = np.clip(w, 0.0, (1.0 - DESIGN_MARGIN) ** 2)
    return K @ ((U * (1.0 / np.sqrt(1.0 - w))[..., None, :]) @ hermitian(U))


class _DesignProblem:
    """
    Node residuals of a lattice candidate over unconstrained real coordinates.

    x = [Re X_0.., Im X_0.., A] with K_k = X_k (I + X_k^H X_k)^(-1/2) and
    R = R0 expm(iH), H = sym(A) + i skew(A). Every x is a stable all-pass
    filter, so the solver never has to be kept inside the feasible set.
    An optional penalty row block kappa_penalty * K pulls the fit toward the
    interpolant with the smallest reflection matrices.
    """

    def __init__(self, omegas, targets, order: int, match: str, kappa_penalty: float = 0.0):
        self.omegas = omegas
        self.targets = targets
        self.z_inv = np.exp(-1j * omegas)
        self.m = targets.shape[-1]
        self.n_kappas = order - 1
        self.match = match
        self.block = self.m * self.m
        self.kappa_penalty = kappa_penalty
        self.R0 = np.eye(self.m, dtype=np.complex128)

    def response(self, kappas: CMat, R: CMat) -> CMat:
        G = np.broadcast_to(R, self.targets.shape).copy()
        for K in kappas[::-1]:
            G = stage_response(t_matrix(K), G, self.z_inv)
        return G

    def node_errors(self, G: CMat) -> CMat:
        if self.match == "subspace":
            return G - phase_align(G, self.targets)
        return G - self.targets

    def max_node_residual(self, kappas: CMat, R: CMat) -> float:
        diff = self.node_errors(self.response(kappas, R))
        return float(np.max(np.linalg.norm(diff, axis=(-2, -1))))

    def start(self, kappas: CMat, R: CMat) -> npt.NDArray[np.float64]:
        self.R0 = unitary_project(R)
        X = _uncontract(np.asarray(kappas, dtype=np.complex128)).ravel()
        return np.concatenate([X.real, X.imag, np.zeros(self.block)])

    def unpack(self, x) -> tuple[CMat, CMat]:
        n = self.n_kappas * self.block
        X = (x[:n] + 1j * x[n:2 * n]).reshape(self.n_kappas, self.m, self.m)
        A = x[2 * n:].reshape(self.m, self.m)
        H = 0.5 * (A + A.T) + 0.5j * (A - A.T)
        return _contract(X), self.R0 @ scipy.linalg.expm(1j * H)

    def residual(self, x) -> npt.NDArray[np.float64]:
        kappas, R = self.unpack(x)
        diff = self.node_errors(self.response(kappas, R)).ravel()
        parts = [diff.real, diff.imag]
        if self.kappa_penalty > 0:
            parts += [self.kappa_penalty * kappas.real.ravel(), self.kappa_penalty * kappas.imag.ravel()]
        return np.concatenate(parts)


def _solve(problem: _DesignProblem, kappas, R, max_iter: int) -> tuple[CMat, CMat, int]:
    sol = optimize.least_squares(
        problem.residual,
        problem.start(kappas, R),
        method="trf",
        ftol=SOLVER_TOL,
        xtol=SOLVER_TOL,
        gtol=SOLVER_TOL,
        max_nfev=max_iter,
    )
    kappas, R = problem.unpack(sol.x)
    logger.debug("least_squares: cost %.3e after %d evaluations (%s)", sol.cost, sol.nfev, sol.message)
    return kappas, R, int(sol.nfev)


def _descend(problem: _DesignProblem, kappas, R, max_iter: int, tol: float, stop_tol: float):
    """Penalized fit first (if asked), then an unpenalized polish when the nodes are still missed."""
    kappas = np.asarray(kappas, dtype=np.complex128).reshape(problem.n_kappas, problem.m, problem.m)
    residual = problem.max_node_residual(kappas, R)
    iterations = 0
    if residual > stop_tol and problem.kappa_penalty > 0:
        kappas, R, n = _solve(problem, kappas, R, max_iter)
        iterations += n
        residual = problem.max_node_residual(kappas, R)
    if residual > (tol if problem.kappa_penalty > 0 else stop_tol):
        exact = _DesignProblem(problem.omegas, problem.targets, problem.n_kappas + 1, problem.match)
        kappas, R, n = _solve(exact, kappas, R, max_iter)
        iterations += n
        residual = exact.max_node_residual(kappas, R)
    return LatticeParams(kappas=kappas, residue=R), residual, iterations


def _restart_point(k: int, m: int, n_kappas: int, targets: CMat):
    rng = np.random.default_rng(k)
    shape = (n_kappas, m, m)
    kappas = 0.3 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * m)
    kappas = np.array([clip_contractive(K, DESIGN_MARGIN) for K in kappas]).reshape(shape)
    return kappas, targets[k % len(targets)]


def snip_design_report(
    nodes,
    order: int,
    tol: float = DESIGN_TOL,
    match: str = "exact",
    initial: LatticeParams | None = None,
    group_delays=None,
    max_iter: int = DESIGN_MAX_ITER,
    restarts: int = DESIGN_RESTARTS,
    kappa_penalty: float = 0.0,
) -> DesignResult:
    """
    Fit a stable lattice all-pass filter of length `order` through unitary samples.

    The fit is a trust-region least-squares solve (scipy.optimize.least_squares)
    over coordinates in which every point is a contractive lattice with a unitary
    residue. The start is K = 0 and R equal to the median node's matrix (or
    `initial` for warm starts), followed by seeded restarts while the residual
    stays above `tol`. `max_iter` caps residual evaluations per solve.

    kappa_penalty > 0 first solves with a ridge term on the reflection matrices,
    which picks the interpolant with the least frequency variation among the
    many that fit the nodes, then polishes without it if the nodes are missed.

    match="subspace" leaves the phase of each target column free at every node.
    Group-delay hints are accepted but not used.
    """
    if match not in MATCH_MODES:
        raise InvalidInput(f"Unknown match mode '{match}'; use one of {MATCH_MODES}.")
    if order < 1:
        raise InvalidInput(f"Filter order must be at least 1, got {order}.")
    if kappa_penalty < 0:
        raise InvalidInput(f"Reflection penalty must be non-negative, got {kappa_penalty}.")
    omegas, targets = _check_nodes(nodes)
    if order < len(omegas) - 1:
        raise InvalidInput(f"Order {order} is too low for {len(omegas)} nodes (need >= {len(omegas) - 1}).")
    if group_delays is not None:
        logger.debug("Group-delay hints supplied for %d nodes; not used by the fit.", len(group_delays))
    m = targets.shape[-1]
    problem = _DesignProblem(omegas, targets, order, match, kappa_penalty)
    stop_tol = tol * 1e-3

    if initial is not None:
        if initial.order != order or initial.m != m:
            raise InvalidInput("Initial lattice parameters do not match the requested order and size.")
        start = (initial.kappas, initial.residue)
    else:
        median = targets[np.argsort(omegas)[len(omegas) // 2]]
        start = (np.zeros((order - 1, m, m), dtype=np.complex128), median)

    best, best_residual, total_iter = None, np.inf, 0
    used = 0
    for attempt in range(restarts + 1):
        if attempt > 0:
            start = _restart_point(attempt, m, order - 1, targets)
            used = attempt
        params, residual, iters = _descend(problem, *start, max_iter=max_iter, tol=tol, stop_tol=stop_tol)
        total_iter += iters
        if residual < best_residual:
            best, best_residual = params, residual
        if best_residual <= tol:
            break
    logger.debug("design residual %.3e after %d evaluations, %d restarts", best_residual, total_iter, used)
    if best_residual > tol:
        raise DesignNotConverged(best_residual, tol, params=best)
    return DesignResult(params=best, residual=best_residual, iterations=total_iter, restarts=used)


def snip_design(nodes, order: int, tol: float = DESIGN_TOL, **kwargs) -> LatticeParams:
    return snip_design_report(nodes, order, tol=tol, **kwargs).params


def node_residuals(params: LatticeParams, nodes, match: str = "exact") -> npt.NDArray[np.float64]:
    omegas, targets = _check_nodes(nodes)
    problem = _DesignProblem(omegas, targets, params.order, match)
    G = problem.response(params.kappas, params.residue)
    return np.linalg.norm(problem.node_errors(G), axis=(-2, -1))


def order_sweep(nodes, orders, tol: float = DESIGN_TOL, match: str = "exact") -> dict[int, float]:
    """Best residual reached at each order, converged or not."""
    out = {}
    for order in orders:
        try:
            out[order] = snip_design_report(nodes, order, tol=tol, match=match).residual
        except DesignNotConverged as exc:
            out[order] = exc.residual
    return out


# --- Serialization --------------------------------------------------------------


def _format_row(row) -> str:
    return " ".join(f"{format(v.real, '.17g')} {format(v.imag, '.17g')}" for v in row)


def dumps_params(params: LatticeParams) -> str:
    lines = [FORMAT_HEADER, f"m {params.m}", f"order {params.order}"]
    for k, K in enumerate(params.kappas):
        lines.append(f"K {k}")
        lines.extend(_format_row(row) for row in K)
    lines.append("R")
    lines.extend(_format_row(row) for row in params.residue)
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_matrix(lines: list[str], start: int, m: int) -> CMat:
    mat = np.empty((m, m), dtype=np.complex128)
    for i in range(m):
        values = [float(tok) for tok in lines[start + i].split()]
        if len(values) != 2 * m:
            raise InvalidInput(f"Expected {2 * m} numbers on matrix row, got {len(values)}.")
        mat[i] = np.array(values[0::2]) + 1j * np.array(values[1::2])
    return mat


def loads_params(text: str) -> LatticeParams:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    try:
        if lines[0] != FORMAT_HEADER:
            raise InvalidInput(f"Unsupported lattice file header '{lines[0]}'.")
        m = int(lines[1].split()[1])
        order = int(lines[2].split()[1])
        pos = 3
        kappas = []
        for k in range(order - 1):
            if lines[pos] != f"K {k}":
                raise InvalidInput(f"Expected 'K {k}' but found '{lines[pos]}'.")
            kappas.append(_parse_matrix(lines, pos + 1, m))
            pos += m + 1
        if lines[pos] != "R":
            raise InvalidInput(f"Expected 'R' but found '{lines[pos]}'.")
        residue = _parse_matrix(lines, pos + 1, m)
        if lines[pos + m + 1] != "end":
            raise InvalidInput("Lattice file is missing its 'end' marker.")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"Malformed lattice parameter file: {exc}") from exc
    return LatticeParams(kappas=np.array(kappas, dtype=np.complex128).reshape(-1, m, m), residue=residue)


def save_params(params: LatticeParams, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_params(params))


def load_params(path: str) -> LatticeParams:
    with open(path, "r", encoding="utf-8") as f:
        return loads_params(f.read())
