"""Independent reference values for the C++ tests.

Uses numpy/jax (float64) only; nothing here calls into the library. Writes
tests/oracle_values.inc and tests/data/random_point_n5_p3_seed42.txt.

    python3 tests/oracle/derive_values.py tests/data/gaussian_draws_seed42.txt
"""
import pathlib
import sys

import jax
import jax.numpy as jnp
import numpy as np

jax.config.update("jax_enable_x64", True)

ROOT = pathlib.Path(__file__).resolve().parents[1]


def vec(x):
    return x.reshape(-1, order="F")


def unvec(v, n, p):
    return v.reshape((n, p), order="F")


def polar(x):
    u, _, vt = np.linalg.svd(x, full_matrices=False)
    return u @ vt


def cxx(name, a):
    a = np.asarray(a, dtype=float)
    body = ", ".join(repr(float(v)) for v in a.reshape(-1))
    return f"inline constexpr double {name}[] = {{{body}}};\n"


def model_inputs():
    w = np.array([[0.5, -0.3, 0.2, 0.1], [-0.4, 0.6, 0.3, -0.2], [0.1, 0.2, -0.5, 0.7]])
    b = np.array([[0.05, -0.1, 0.0, 0.2]])
    head = polar(np.array([[1.0, 0.2], [0.3, -0.8], [-0.5, 0.4], [0.2, 0.6]]))
    xs = np.array([[1.0, 0.5, -0.2], [-0.3, 0.8, 0.4], [0.6, -0.7, 0.1], [-0.9, -0.2, 0.5]])
    ys = np.array([0, 1, 0, 1])
    xq = np.array([[0.7, 0.1, 0.3], [-0.5, 0.9, -0.1], [0.2, -0.4, 0.8], [-0.6, 0.3, -0.7]])
    yq = np.array([1, 1, 0, 0])
    return w, b, head, xs, ys, xq, yq


def loss_fn(params, x, y, scale=10.0):
    w, b, head = params
    h = jnp.tanh(x @ w + b)
    f = h / jnp.linalg.norm(h, axis=1, keepdims=True)
    z = scale * f @ head
    logp = jax.nn.log_softmax(z, axis=1)
    return -jnp.mean(logp[jnp.arange(x.shape[0]), y])


def main():
    out = ["// Generated by tests/oracle/derive_values.py; do not edit.\n#pragma once\n\n"]

    s = np.array([[4.0, 1.0, 2.0], [1.0, 3.0, 0.0], [2.0, 0.0, 5.0]])
    out.append(cxx("kSymEigValues", np.linalg.eigvalsh(s)))

    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    out.append(cxx("kPolarOf123456", polar(x)))

    phi = np.array([[0.6, -0.1], [0.2, 0.9], [-0.7, 0.3]])
    gs = np.array([[0.3, 0.5], [-0.2, 0.1], [0.4, -0.6]])
    gq = np.array([[-0.5, 0.2], [0.7, 0.3], [0.1, -0.4]])
    alpha = 0.1
    a = phi.T @ gs
    bmat = phi @ gs.T
    ksum = np.kron(a, np.eye(3)) + np.kron(np.eye(2), bmat)
    h = np.eye(6) - 0.5 * alpha * ksum
    out.append(cxx("kFactorApplied", unvec(h.T @ vec(gq), 3, 2)))

    w, b, head, xs, ys, xq, yq = model_inputs()
    params = (jnp.array(w), jnp.array(b), jnp.array(head))
    lq, gq_params = jax.value_and_grad(loss_fn)(params, jnp.array(xq), jnp.array(yq))
    out.append(cxx("kQueryLoss", [lq]))
    out.append(cxx("kQueryGradW", gq_params[0]))
    out.append(cxx("kQueryGradB", gq_params[1]))
    out.append(cxx("kQueryGradHead", gq_params[2]))

    def unrolled(params, k):
        cur = params
        for _ in range(k):
            g = jax.grad(loss_fn)(cur, jnp.array(xs), jnp.array(ys))
            cur = tuple(p - alpha * gi for p, gi in zip(cur, g))
        return loss_fn(cur, jnp.array(xq), jnp.array(yq))

    k = 2
    mg = jax.grad(unrolled)(params, k)
    out.append(cxx("kExactMetaGradW", mg[0]))
    out.append(cxx("kExactMetaGradB", mg[1]))
    out.append(cxx("kExactMetaGradHead", mg[2]))

    theta = polar(np.array([[1.0, 0.3], [-0.2, 0.8], [0.5, -0.4], [0.1, 0.6]]))
    cs = np.array([[0.4, -0.3], [0.2, 0.5], [-0.6, 0.1], [0.3, 0.7]])
    cq = np.array([[-0.2, 0.6], [0.5, -0.1], [0.3, 0.4], [-0.7, 0.2]])

    def additive_objective(t):
        u = -alpha * jnp.array(cs)
        step = u - t @ (0.5 * (t.T @ u + u.T @ t))
        return jnp.sum(jnp.array(cq) * (t + step))

    exact_linear = jax.grad(additive_objective)(jnp.array(theta))
    out.append(cxx("kLinearTheta", theta))
    out.append(cxx("kLinearExactMetaGrad", exact_linear))
    printed = cq - 0.5 * alpha * (cq @ (theta.T @ cs) + cs @ (theta.T @ cq))
    out.append(cxx("kLinearFormlPrinted", printed))

    ci = 1.96 * np.std(np.tile([0.0, 1.0], 50), ddof=1) / np.sqrt(100)
    out.append(cxx("kAlternatingCi95", [ci]))

    (ROOT / "oracle_values.inc").write_text("".join(out))

    draws = np.loadtxt(sys.argv[1]).reshape(5, 3)
    point = polar(draws)
    with open(ROOT / "data" / "random_point_n5_p3_seed42.txt", "w") as f:
        f.write("# polar factor of the 5x3 row-major normal draw of Rng(42)\n")
        for row in point:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


if __name__ == "__main__":
    main()
