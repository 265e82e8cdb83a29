#!/usr/bin/env python3
"""Reference optimizer for the penalized quantile objective.

Reads a batch of instances from the JSON file named by argv[1] and prints a
JSON array of optimal objective values computed by an independent conic
solver. Each instance supplies the design (row-major, intercept column
included), the response, tau, the group sizes over the full design, one
penalty weight per group (0 for unpenalized groups), and lambda.

The objective mirrors the library's definition:
    (1/n) sum_i rho_tau(y_i - x_i' beta)
      + (lambda/n) sum_k w_k || (X_k' X_k / n)^{1/2} beta_k ||_2
with the epigraph handled by the conic solver, not by the library under test.
"""
import json
import sys

import numpy as np
import cvxpy as cp


def psd_sqrt(g):
    vals, vecs = np.linalg.eigh(g)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def solve_instance(inst):
    n = int(inst["n"])
    p = int(inst["p"])
    tau = float(inst["tau"])
    lam = float(inst["lambda"])
    x = np.asarray(inst["x"], dtype=float).reshape(n, p)
    y = np.asarray(inst["y"], dtype=float)
    sizes = [int(s) for s in inst["group_sizes"]]
    weights = [float(w) for w in inst["weights"]]

    beta = cp.Variable(p)
    r = y - x @ beta
    objective = cp.sum(cp.maximum(tau * r, (tau - 1.0) * r)) / n
    col = 0
    for size, weight in zip(sizes, weights):
        cols = slice(col, col + size)
        col += size
        if weight == 0.0 or lam == 0.0:
            continue
        sqrt_block = psd_sqrt(x[:, cols].T @ x[:, cols] / n)
        objective = objective + (lam / n) * weight * cp.norm(sqrt_block @ beta[cols], 2)

    problem = cp.Problem(cp.Minimize(objective))
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        return {"status": problem.status}
    return {"status": problem.status, "objective": float(problem.value)}


def main():
    with open(sys.argv[1]) as handle:
        batch = json.load(handle)
    results = [solve_instance(inst) for inst in batch["instances"]]
    json.dump({"results": results}, sys.stdout)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
