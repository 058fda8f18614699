"""Small dense matrix-equation solvers.

Continuous Lyapunov equations are solved by Kronecker vectorization and
continuous algebraic Riccati equations by Newton-Kleinman iteration on top
of the Lyapunov solver. Problem sizes here are tiny (n <= 25), so the
O(n^6) vectorized solve is cheap and exact enough.
"""

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotHurwitz, NotStabilizable, SingularSystem

HURWITZ_MARGIN = -1e-12


def symmetrize(M):
    return 0.5 * (M + M.T)


def is_hurwitz(A, margin=HURWITZ_MARGIN):
    """True iff every eigenvalue of `A` has real part below `margin`."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        return False
    return bool(np.max(np.linalg.eigvals(A).real) < margin)


def solve_lyapunov(A, Q):
    """Solve ``A^T P + P A + Q = 0`` for symmetric P.

    Parameters
    ----------
    A : (n, n) array_like
        Hurwitz matrix.
    Q : (n, n) array_like
        Symmetric right-hand side.

    Returns
    -------
    P : (n, n) ndarray
        Symmetric solution. PSD whenever Q is PSD.

    Raises
    ------
    NotHurwitz
        If A has an eigenvalue with real part >= -1e-12.
    SingularSystem
        If the vectorized system is numerically singular.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ValueError(f"shape mismatch: A {A.shape}, Q {Q.shape}")
    if not is_hurwitz(A):
        raise NotHurwitz(f"max Re(eig(A)) = {np.max(np.linalg.eigvals(A).real):.3e}")
    eye = np.eye(n)
    # column-major vec: vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P)
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    if np.linalg.cond(K) > 1e14:
        raise SingularSystem("Kronecker Lyapunov operator is numerically singular")
    p = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    return symmetrize(p.reshape((n, n), order="F"))


def lyapunov_residual(A, P, Q, relative=False):
    """Frobenius norm of ``A^T P + P A + Q``.

    With `relative`, divided by ``||Q|| + 2 ||A^T P||`` (backward error).
    """
    r = np.linalg.norm(A.T @ P + P @ A + Q)
    return r / (np.linalg.norm(Q) + 2 * np.linalg.norm(A.T @ P)) if relative else r


def are_residual(A, B, Q, R, P, relative=False):
    """Frobenius norm of ``A^T P + P A - P B R^-1 B^T P + Q``.

    With `relative`, divided by ``||Q|| + 2 ||A^T P|| + ||P S P||``.
    """
    S = B @ np.linalg.solve(R, B.T)
    r = np.linalg.norm(A.T @ P + P @ A - P @ S @ P + Q)
    if not relative:
        return r
    return r / (np.linalg.norm(Q) + 2 * np.linalg.norm(A.T @ P) + np.linalg.norm(P @ S @ P))


def _initial_gain(A, B, R):
    for c in 10.0 ** np.arange(0, 7):
        K = c * B.T
        if is_hurwitz(A - B @ K):
            return K
    return None


def _hamiltonian_are(A, B, Q, R):
    n = A.shape[0]
    S = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -S], [-Q, -A.T]])
    eigs = np.linalg.eigvals(H)
    if np.min(np.abs(eigs.real)) < 1e-10 * max(1.0, np.max(np.abs(eigs))):
        raise NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis")
    T, U, sdim = scipy.linalg.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NotStabilizable("stable invariant subspace has wrong dimension")
    U11, U21 = U[:n, :n], U[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise NotStabilizable("stable subspace is not a graph")
    return symmetrize(np.linalg.solve(U11.T, U21.T).T)


def solve_are(A, B, Q, R, max_iter=100, tol=1e-13):
    """Stabilizing solution of ``A^T P + P A - P B R^-1 B^T P + Q = 0``.

    Newton-Kleinman: each step solves one Lyapunov equation for the
    current gain. The initial gain ``c B^T`` is scanned over
    c = 1, 10, ..., 1e6; if none is stabilizing, the stable invariant
    subspace of the Hamiltonian supplies the start instead.

    Raises
    ------
    NotStabilizable
        No stabilizing initial gain could be found.
    NoConvergence
        The Newton iteration exceeded `max_iter`.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = symmetrize(np.atleast_2d(np.asarray(Q, dtype=float)))
    R = symmetrize(np.atleast_2d(np.asarray(R, dtype=float)))
    K = _initial_gain(A, B, R)
    if K is None:
        P = _hamiltonian_are(A, B, Q, R)
        K = np.linalg.solve(R, B.T @ P)
        if not is_hurwitz(A - B @ K):
            raise NotStabilizable("Hamiltonian solution is not stabilizing")
    P = None
    prev_step = np.inf
    for _ in range(max_iter):
        Ak = A - B @ K
        try:
            P_next = solve_lyapunov(Ak, Q + K.T @ R @ K)
        except NotHurwitz as exc:
            raise NotStabilizable("Newton iterate lost stability") from exc
        K = np.linalg.solve(R, B.T @ P_next)
        if P is not None:
            step = np.linalg.norm(P_next - P) / (1.0 + np.linalg.norm(P_next))
            # quadratic convergence ends at a rounding floor that grows with cond(P);
            # stop once the step stops shrinking there
            if step <= tol or (step <= 1e-6 and step >= prev_step):
                return P_next
            prev_step = step
        P = P_next
    raise NoConvergence(f"Newton-Kleinman did not converge in {max_iter} iterations")


def spectral_normalize(W, bound):
    """Rescale `W` so that its largest singular value is at most `bound`."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        return W.copy()
    sigma = np.linalg.norm(W, 2)
    if sigma <= bound:
        return W.copy()
    return W * (bound / sigma)
