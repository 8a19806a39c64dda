import numpy as np
import pytest

from partint import geometry as geo
from partint.geometry import Formalism, HamiltonianSystem, Kind

from randexpr import polynomial

KINDS = list(Kind)


def system(kind, n=2, H="0*q1 + 1"):
    return HamiltonianSystem.from_text(Formalism(kind, n), H)


@pytest.mark.parametrize("kind, chart", [
    (Kind.SYMPLECTIC, ("q1", "q2", "p1", "p2")),
    (Kind.COSYMPLECTIC, ("q1", "q2", "p1", "p2", "t")),
    (Kind.CONTACT, ("q1", "q2", "p1", "p2", "z")),
    (Kind.COCONTACT, ("t", "q1", "q2", "p1", "p2", "z")),
])
def test_chart_layout(kind, chart):
    fm = Formalism(kind, 2)
    assert fm.chart == chart
    assert fm.dim == len(chart)


def test_formalism_rejects_bad_input():
    with pytest.raises(geo.GeometryError):
        Formalism(Kind.CONTACT, 0)
    with pytest.raises(geo.GeometryError):
        Formalism(Kind.CONTACT, 1, ("q",), ("q",))
    with pytest.raises(geo.GeometryError):
        Formalism(Kind.SYMPLECTIC, 1, ("sin",), ("p",))


def test_projectile_momentum_component(projectile):
    sys = HamiltonianSystem(projectile.formalism, projectile.H, {"m": 1.0, "G": 9.8, "gamma": 0.1})
    v = geo.hamiltonian_field(sys, sys.H)(sys.point(dict(x=0, y=0, p_x=2, p_y=0, z=0)))
    assert v[sys.chart.index("p_x")] == pytest.approx(-0.2, abs=1e-15)


def test_constant_field_contact():
    sys = system(Kind.CONTACT, 1, "q1*0 + 1")
    v = geo.hamiltonian_field(sys, sys.parse("1"))(np.array([0.3, -0.7, 2.0]))
    np.testing.assert_array_equal(v, [0, 0, -1])


def test_free_particle_field():
    sys = system(Kind.SYMPLECTIC, 1, "p1^2/2")
    np.testing.assert_array_equal(geo.evolution_field(sys)([0.4, 1.5]), [1.5, 0.0])


def test_cosymplectic_evolution_has_unit_time_rate():
    sys = HamiltonianSystem.from_text(Formalism(Kind.COSYMPLECTIC, 1, ("q",), ("p",)),
                                      "p^2/2 + sin(t)*q")
    np.testing.assert_allclose(geo.evolution_field(sys)([0.0, 1.0, 0.0]), [1, 0, 1], atol=1e-15)
    assert geo.hamiltonian_field(sys, sys.H)([0.0, 1.0, 0.7])[2] == 0.0


def test_cocontact_evolution_extends_contact():
    H = "p1^2/2 + q1*p1 + 0.3*z"
    co = HamiltonianSystem.from_text(Formalism(Kind.COCONTACT, 1), H)
    c = HamiltonianSystem.from_text(Formalism(Kind.CONTACT, 1), H)
    x = np.array([0.2, -0.4, 0.9])
    v = geo.evolution_field(co)(np.concatenate([[5.0], x]))
    assert v[0] == 1.0
    np.testing.assert_allclose(v[1:], geo.evolution_field(c)(x), rtol=0, atol=1e-15)


def test_reeb_apply(projectile):
    x = projectile.point(dict(x=1, y=2, p_x=3, p_y=4, z=5))
    assert geo.reeb_apply(projectile, "z", projectile.H, x) == 0.5
    cos = system(Kind.COSYMPLECTIC, 1, "p1^2/2")
    assert geo.reeb_apply(cos, "time", cos.H, [0.1, 0.2, 0.3]) == 0.0
    with pytest.raises(geo.FormalismMismatch):
        geo.reeb_apply(cos, "z", cos.H, [0.1, 0.2, 0.3])
    with pytest.raises(geo.FormalismMismatch):
        geo.reeb_apply(system(Kind.SYMPLECTIC, 1), "time", "q1", [0, 0])


def test_projectile_px_bracket_vanishes(projectile, rng):
    for _ in range(50):
        x = rng.uniform(-3, 3, 5)
        assert abs(geo.bracket(projectile, "p_x", projectile.H, x)) <= 1e-14


def test_contact_canonical_brackets(rng):
    sys = system(Kind.CONTACT, 1, "p1^2/2")
    for _ in range(10):
        x = rng.uniform(-2, 2, 3)
        assert geo.bracket(sys, "q1", "p1", x) == 1.0
        assert geo.bracket(sys, "p1", "q1", x) == -1.0


def _random_triples(kind, count, seed):
    rng = np.random.default_rng(seed)
    sys = system(kind, 2)
    for _ in range(count):
        fs = [sys.parse(polynomial(rng, sys.chart, terms=3, degree=3)) for _ in range(3)]
        yield sys, fs, rng.uniform(-1, 1, len(sys.chart))


@pytest.mark.parametrize("kind", KINDS)
def test_antisymmetry(kind):
    for sys, (f, g, _), x in _random_triples(kind, 100, 1):
        assert abs(geo.bracket(sys, f, g, x) + geo.bracket(sys, g, f, x)) <= 1e-9
        assert abs(geo.bracket(sys, f, f, x)) <= 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_jacobi_identity(kind):
    for sys, (f, g, h), x in _random_triples(kind, 100, 2):
        B = lambda a, b: geo.bracket_observable(sys, a, b)
        total = (geo.bracket(sys, f, B(g, h), x) + geo.bracket(sys, g, B(h, f), x)
                 + geo.bracket(sys, h, B(f, g), x))
        assert abs(total) <= 1e-7


@pytest.mark.parametrize("kind", [Kind.SYMPLECTIC, Kind.COSYMPLECTIC])
def test_poisson_leibniz(kind):
    for sys, (f, g, h), x in _random_triples(kind, 100, 3):
        gh = sys.parse(f"({g.unparse()})*({h.unparse()})")
        lhs = geo.bracket(sys, f, gh, x)
        rhs = (sys.observable(g).value(x) * geo.bracket(sys, f, h, x)
               + sys.observable(h).value(x) * geo.bracket(sys, f, g, x))
        assert abs(lhs - rhs) <= 1e-9


def test_contact_leibniz_violation_documented_triple():
    # {z, q1*q1} - 2 q1 {z, q1} = q1^2
    sys = system(Kind.CONTACT, 1)
    x = np.array([1.0, 0.3, -0.2])
    lhs = geo.bracket(sys, "z", "q1*q1", x)
    rhs = 2 * x[0] * geo.bracket(sys, "z", "q1", x)
    assert abs(lhs - rhs) == pytest.approx(1.0, rel=1e-12)


def test_cosymplectic_chain_rule(rng):
    sys = HamiltonianSystem.from_text(Formalism(Kind.COSYMPLECTIC, 1, ("q",), ("p",)),
                                      "p^2/2 + sin(t)*q")
    g = sys.parse("q*p*cos(t) + p^3")
    E = geo.evolution_field(sys)
    for _ in range(50):
        x = rng.uniform(-2, 2, 3)
        lhs = E.apply(sys.observable(g), x)
        rhs = geo.bracket(sys, g, sys.H, x) + geo.reeb_apply(sys, "time", g, x)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_contact_antihomomorphism(rng):
    sys = system(Kind.CONTACT, 2)
    for _ in range(10):
        f, g, k = (sys.parse(polynomial(rng, sys.chart, terms=3, degree=2)) for _ in range(3))
        x = rng.uniform(-1, 1, 5)
        Xf, Xg = geo.hamiltonian_field(sys, f), geo.hamiltonian_field(sys, g)
        Xfg = geo.hamiltonian_field(sys, geo.bracket_observable(sys, f, g))
        grad = sys.observable(k).value_and_gradient(x)[1]
        lhs = grad @ geo.lie_bracket(Xf, Xg, x)
        rhs = -grad @ Xfg(x)
        assert lhs == pytest.approx(rhs, abs=1e-6)


def test_lie_bracket_exact_matches_fd(rng):
    sys = system(Kind.COCONTACT, 1)
    f, g = sys.parse("q1^2*p1 + t*z"), sys.parse("sin(p1) + q1*z^2")
    X, Y = geo.hamiltonian_field(sys, f), geo.hamiltonian_field(sys, g)
    x = rng.uniform(-1, 1, 4)
    np.testing.assert_allclose(geo.lie_bracket(X, Y, x, exact=True), geo.lie_bracket(X, Y, x),
                               atol=1e-7)
