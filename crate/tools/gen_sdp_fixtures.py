"""Reference optima for small Toeplitz-block SDPs, computed with an
interior-point solver through cvxpy.

    minimize   reg/(2c) Tr(Z) + reg/2 u_0 + 1/2 ||Y - s A U||_F^2
    subject to [[Toep(u), U], [U^H, Z]] >= 0

Usage: python3 tools/gen_sdp_fixtures.py crates/core/tests/fixtures/sdp_oracle.json
"""

import json
import sys
import warnings

import cvxpy as cp
import numpy as np


def solve(Y, A, reg, scale):
    m, n = A.shape
    c = Y.shape[1]
    X = cp.Variable((n + c, n + c), hermitian=True)
    cons = [X >> 0]
    cons += [X[i, j] == X[i + 1, j + 1] for i in range(n - 1) for j in range(n - 1)]
    U = X[:n, n:]
    Z = X[n:, n:]
    obj = reg / (2 * c) * cp.real(cp.trace(Z)) + reg / 2 * cp.real(X[0, 0])
    obj += 0.5 * cp.sum_squares(Y - scale * A @ U)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise RuntimeError(prob.status)
    primary = prob.value
    # Cross-check with a first-order solver run to high accuracy.
    prob.solve(solver=cp.SCS, eps_abs=1e-9, eps_rel=1e-9, max_iters=200000)
    check = prob.value
    if abs(primary - check) > 1e-6 * max(abs(primary), 1e-9):
        raise RuntimeError(f"solvers disagree: {primary} vs {check}")
    return primary


def atom(n, f):
    return np.exp(2j * np.pi * f * np.arange(n))


def rows(M):
    return [[[float(z.real), float(z.imag)] for z in r] for r in np.atleast_2d(M)]


def main(path):
    warnings.simplefilter("ignore")
    rng = np.random.default_rng(20240611)
    cases = []
    for k in range(20):
        n = int(rng.integers(3, 9))
        c = int(rng.integers(1, 4))
        m = int(rng.integers(max(2, n // 2), n + 3))
        scale = float(rng.choice([1.0, 2.0, 0.5]))
        A = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2 * m)
        kind = k % 3
        if kind == 0:
            # Sparse spectral signal plus noise.
            L = int(rng.integers(1, 3))
            freqs = rng.uniform(-0.5, 0.5, L)
            amps = rng.standard_normal((L, c)) + 1j * rng.standard_normal((L, c))
            U0 = sum(np.outer(atom(n, f), a) for f, a in zip(freqs, amps))
            Y = scale * A @ U0 + 0.05 * (rng.standard_normal((m, c)) + 1j * rng.standard_normal((m, c)))
        elif kind == 1:
            Y = rng.standard_normal((m, c)) + 1j * rng.standard_normal((m, c))
        else:
            # Identity sensing (pure denoising).
            A = np.eye(n, dtype=complex)
            m = n
            f = rng.uniform(-0.5, 0.5)
            Y = np.outer(atom(n, f), rng.standard_normal(c) + 1j * rng.standard_normal(c))
            Y += 0.1 * (rng.standard_normal((n, c)) + 1j * rng.standard_normal((n, c)))
        reg = float(rng.uniform(0.05, 1.0) * np.linalg.norm(Y) / np.sqrt(n))
        value = solve(Y, A, reg, scale)
        cases.append({
            "name": f"case{k:02d}_n{n}_c{c}_m{m}",
            "observations": rows(Y),
            "sensing": rows(A),
            "reg": reg,
            "scale": scale,
            "objective": float(value),
        })
        print(cases[-1]["name"], value)
    doc = {
        "version": 1,
        "kind": "sdp_oracle",
        "payload": {
            "source": f"cvxpy {cp.__version__} / CLARABEL, cross-checked with SCS to 1e-6 relative",
            "tolerance": 1e-4,
            "psd_tolerance": 1e-7,
            "cases": cases,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


if __name__ == "__main__":
    main(sys.argv[1])
