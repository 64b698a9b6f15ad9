import numpy as np
import sympy
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cutofflab.chain import validate_chain
from cutofflab.families import FamilySpec, generate

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def lazy_two_state():
    return validate_chain([[0.5, 0.5], [0.5, 0.5]])


def flip_chain():
    return validate_chain([[0.0, 1.0], [1.0, 0.0]])


def complete(n):
    return generate(FamilySpec("complete", size=n))


def cycle(n, laziness=0.0):
    return generate(FamilySpec("cycle", size=n, laziness=laziness))


def random_chain(seed, n=None, density=None):
    """Seeded random chain with symmetric support; sizes 2..12."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(2, 13))
    if density is None:
        density = float(rng.uniform(0.0, 0.8))
    return generate(FamilySpec("random-symmetric", size=n, seed=seed, density=density))


def corpus_random(count=50):
    return [random_chain(1000 + k) for k in range(count)]


@st.composite
def chains(draw, min_n=2, max_n=8):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    density = draw(st.floats(0.0, 1.0))
    return random_chain(seed, n, density)


def rational_chain(weights):
    """Exact rational matrix with rows ``weights / row sums`` and its float chain."""
    n = weights.shape[0]
    Kq = sympy.Matrix(n, n, lambda i, j: sympy.Rational(int(weights[i, j]), int(weights[i].sum())))
    return Kq, validate_chain(np.array(Kq.evalf(30).tolist(), dtype=float))


def charpoly_gap(K_rational):
    """Spectral gap of (K + K*)/2 from the exact characteristic polynomial.

    (K + K*)/2 is similar to the symmetrized matrix, so it has the same real
    spectrum; with rational K everything up to root finding is exact.
    """
    n = K_rational.shape[0]
    A = K_rational.T - sympy.eye(n)
    A[n - 1, :] = sympy.ones(1, n)
    rhs = sympy.zeros(n, 1)
    rhs[n - 1] = 1
    pi = A.LUsolve(rhs)
    Kstar = sympy.Matrix(n, n, lambda x, y: pi[y] * K_rational[y, x] / pi[x])
    M = (K_rational + Kstar) / 2
    lam = sympy.symbols("lam")
    poly = sympy.Poly(M.charpoly(lam).as_expr(), lam)
    roots = sorted((complex(r).real for r in poly.nroots(n=30, maxsteps=200)), reverse=True)
    return 1 - roots[1]
