"""Pure-numpy fallback for the diluted likelihood-maximization kernel.

Implements the same iteration as the compiled extension: candidates are
rho <- N[(I + eps R) rho (I + eps R)] with R the frequency-weighted
effect average, a step is accepted only if the log-likelihood does not
drop by more than DECREASE_ATOL, and eps is halved (for that step only)
while it does.

Both backends work on a packed real representation of Hermitian
matrices: [diagonal, 2 x upper real, 2 x upper imaginary], so that every
Tr[rho Pi_m] is a single real dot product of length d^2. Results agree
with the compiled kernel up to floating-point summation order.
"""

import numpy as np

BACKEND = "python"

DECREASE_ATOL = 1e-9
MAX_HALVINGS = 20


def pack_effects(matrices: np.ndarray) -> np.ndarray:
    """(n_eff, d, d) Hermitian stack -> (n_eff, d*d) packed real rows.

    Row layout: [Re diag (d), 2 Re upper (d(d-1)/2), 2 Im upper (d(d-1)/2)];
    dotted with a state packed by :func:`pack_state` this yields Tr[rho Pi].
    """
    n_eff, d, _ = matrices.shape
    iu = np.triu_indices(d, 1)
    rows = np.empty((n_eff, d * d))
    rows[:, :d] = matrices.real[:, range(d), range(d)]
    rows[:, d : d + iu[0].size] = 2 * matrices.real[:, iu[0], iu[1]]
    rows[:, d + iu[0].size :] = 2 * matrices.imag[:, iu[0], iu[1]]
    return np.ascontiguousarray(rows)


def pack_state(rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([rho.real[range(d), range(d)], rho.real[iu], rho.imag[iu]])


def _unpack_half(vec: np.ndarray, d: int) -> np.ndarray:
    """Inverse of the effect-row weighting: packed accumulator -> Hermitian matrix."""
    iu = np.triu_indices(d, 1)
    out = np.zeros((d, d), dtype=complex)
    out[range(d), range(d)] = vec[:d]
    upper = vec[d : d + iu[0].size] / 2 + 1j * vec[d + iu[0].size :] / 2
    out[iu] = upper
    out[(iu[1], iu[0])] = upper.conj()
    return out


def run_mle(packed_effects, freqs, rho0, epsilon, max_iters, tol_per_shot, prob_floor):
    """Maximize the multinomial likelihood of ``freqs`` under the packed effects.

    Parameters
    ----------
    packed_effects : (n_eff, d*d) float64
        Output of :func:`pack_effects`.
    freqs : (n_eff,) float64
        Outcome counts; their sum M is the number of copies.
    rho0 : (d, d) complex
        Starting state (full rank recommended).
    epsilon : float
        Dilution strength of each candidate step.
    max_iters : int
        Iteration budget.
    tol_per_shot : float
        Stop once the log-likelihood gain of an accepted step divided by
        M falls below this.
    prob_floor : float
        Probabilities are clamped from below by this in logs and ratios.

    Returns
    -------
    rho : (d, d) complex ndarray
    ll_trace : (iterations + 1,) float64, starting with the initial value
    converged : bool
    """
    d = rho0.shape[0]
    m_total = float(freqs.sum())
    if m_total <= 0:
        raise ValueError("frequency vector sums to zero")
    eye = np.eye(d)
    rho = np.asarray(rho0, dtype=complex)

    def loglike(p):
        return float(freqs @ np.log(np.maximum(p, prob_floor)))

    p = packed_effects @ pack_state(rho)
    ll = loglike(p)
    trace = [ll]
    converged = False
    for _ in range(max_iters):
        w = freqs / np.maximum(p, prob_floor) / m_total
        r_op = _unpack_half(w @ packed_effects, d)
        eps = epsilon
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            t_op = eye + eps * r_op
            cand = t_op @ rho @ t_op
            cand /= np.trace(cand).real
            cand = (cand + cand.conj().T) / 2
            pc = packed_effects @ pack_state(cand)
            llc = loglike(pc)
            if llc >= ll - DECREASE_ATOL:
                accepted = True
                break
            eps /= 2
        if not accepted:
            converged = True  # ascent exhausted at the numerical plateau
            break
        gain = llc - ll
        rho, p, ll = cand, pc, llc
        trace.append(ll)
        if gain < tol_per_shot * m_total:
            converged = True
            break
    return rho, np.array(trace), converged
