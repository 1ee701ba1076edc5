"""Independent reference values for the C++ tests.

Run with `python3 tests/oracle/derive.py`. Every number printed here is copied
into the matching GoogleTest file; nothing here imports the C++ library.
"""

import numpy as np
from scipy.optimize import linprog
from scipy.stats import multivariate_normal, norm


def kernel_values():
    phi0 = norm.pdf(0.0)
    phi2 = norm.pdf(2.0)
    ml = 0.5 * (phi0 + phi2)
    print(f"phi(0)              {phi0:.12f}")
    print(f"phi(2)              {phi2:.12f}")
    print(f"ml two atoms        {ml:.12f}")
    post = np.array([0.5 * phi2, 0.5 * phi0]) / ml
    w = 0.5 * np.array([0.5, 0.5]) + 0.5 * post
    print(f"responsibilities    {post}")
    print(f"newton a=0.5        {w[0]:.10f} {w[1]:.10f}")
    g = -np.array([phi2, phi0]) / ml
    print(f"likelihood force    {g[0]:.10f} {g[1]:.10f}")


def mixture_value():
    comps = [
        (np.array([0.3, -0.2]), np.array([[0.5, 0.1], [0.1, 0.4]]), 0.3),
        (np.array([-1.0, 1.5]), np.array([[1.2, -0.3], [-0.3, 0.8]]), 0.7),
    ]
    x = np.array([0.1, 0.4])
    p = sum(w * multivariate_normal(m, c).pdf(x) for m, c, w in comps)
    print(f"mixture density     {p:.15e}")


def w2_lp(a, wa, b, wb):
    n, m = len(a), len(b)
    c = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1).ravel()
    rows = []
    for i in range(n):
        r = np.zeros(n * m)
        r[i * m:(i + 1) * m] = 1
        rows.append(r)
    for j in range(m):
        r = np.zeros(n * m)
        r[j::m] = 1
        rows.append(r)
    res = linprog(c, A_eq=np.array(rows), b_eq=np.concatenate([wa, wb]), bounds=(0, None), method="highs")
    return np.sqrt(res.fun)


def exact_w2_values():
    a = np.array([[0.0, 0.0], [1.0, 2.0], [-1.5, 0.5], [2.0, -1.0]])
    wa = np.array([0.1, 0.2, 0.3, 0.4])
    b = np.array([[0.5, 0.5], [-1.0, 1.0], [1.5, -0.5], [0.0, 2.5], [-2.0, -2.0]])
    wb = np.array([0.25, 0.15, 0.2, 0.3, 0.1])
    print(f"w2 4x5 LP           {w2_lp(a, wa, b, wb):.15f}")
    print(f"w2 01 vs 23         {w2_lp(np.array([[0.], [1.]]), np.full(2, .5), np.array([[2.], [3.]]), np.full(2, .5)):.15f}")


def quantile_band():
    v = np.arange(1, 101, dtype=float)
    print(f"band 1..100         {np.quantile(v, 0.05):.4f} {v.mean():.4f} {np.quantile(v, 0.95):.4f}")


def priors():
    d, c = 0.2, 10.0
    print(f"first stick mean    {(1 - d) / (1 + c):.6f}")
    print(f"dp last atom c=1    {(1.0 / 2.0) ** 9:.8f}")


def sinkhorn_two_by_two(eps=0.05):
    x = np.array([0.0, 1.0])
    C = (x[:, None] - x[None, :]) ** 2
    w = np.full(2, 0.5)
    f = np.zeros(2)
    g = np.zeros(2)
    for _ in range(2000):
        g = -eps * np.log((w[:, None] * np.exp((f[:, None] - C) / eps)).sum(0))
        f = -eps * np.log((w[None, :] * np.exp((g[None, :] - C) / eps)).sum(1))
    P = w[:, None] * w[None, :] * np.exp((f[:, None] + g[None, :] - C) / eps)
    print(f"sinkhorn 2x2 plan   {P.ravel()}")
    print(f"OT_eps 2x2          {(w @ f + w @ g):.12f}")


def newton_trace():
    """Newton recursion on the 3-atom fixture used by the CLI test."""
    atoms = np.array([[-1.0, 0.0], [0.0, 1.0], [1.5, -0.5]])
    w = np.array([0.2, 0.3, 0.5])
    stream = np.array([[0.1, 0.9], [1.2, -0.4], [-0.8, 0.2], [0.0, 0.7], [1.4, -0.6]])
    h = 0.35
    for n, x in enumerate(stream):
        a = 1.0 / (n + 2)
        k = np.exp(-((atoms - x) ** 2).sum(1) / (2 * h * h)) / (2 * np.pi * h * h)
        w = (1 - a) * w + a * w * k / (w @ k)
        print(f"newton step {n + 1}       " + " ".join(f"{v:.15e}" for v in w))


def repeated_point():
    atoms = np.array([[-1.0, 0.0], [0.0, 1.0], [1.5, -0.5]])
    w = np.full(3, 1 / 3)
    x = np.array([0.2, 0.6])
    for n in range(100):
        a = 1.0 / (n + 2)
        k = np.exp(-((atoms - x) ** 2).sum(1) / 2.0)
        w = (1 - a) * w + a * w * k / (w @ k)
    print(f"repeated point      {w}")


if __name__ == "__main__":
    kernel_values()
    mixture_value()
    exact_w2_values()
    quantile_band()
    priors()
    sinkhorn_two_by_two()
    newton_trace()
    repeated_point()
