import numpy as np
import pytest

import loceq


def test_degree_formula_anchor():
    assert loceq.degree_formula(4, 2, 1) == 7
    assert loceq.degree_formula(8, 8, 7) == 255


def test_exact_sample_is_hermitian_and_normalised():
    s = loceq.sample("exh", 6, 2, 1, seed=3)
    h = s.dense()
    assert h.shape == (64, 64)
    assert np.allclose(h, h.conj().T)
    assert np.linalg.norm(h, 2) == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(s.observable) >= 0)
    assert set(s.degrees()) == {loceq.degree_formula(6, 2, 1)}
    assert s.band_violations() == 0


def test_variants_share_the_edge_count():
    w = {"diag_slope": 0.1, "diag_intercept": 0.5, "sigma_off": 0.7}
    counts = {loceq.sample(v, 6, seed=5, weights=w).nonzeros for v in loceq.VARIANTS}
    assert len(counts) == 1


def test_dynamics_and_flow():
    s = loceq.sample("exh", 5, 2, 1, seed=2)
    o, o2 = loceq.evolve(s, [0.0, 1.0, 2.0])
    assert o[0] == pytest.approx(s.observable[-1])
    assert np.all(np.asarray(o2) >= 0)
    r = loceq.equilibration_time(s)
    assert r["reached"] == (r["t_eq"] is not None)
    assert loceq.max_flow(s, r["diag_o"]) > 0


def test_domain_errors():
    with pytest.raises(loceq.DomainError):
        loceq.sample("exh", 4, 3, 1)
    with pytest.raises(loceq.DomainError):
        loceq.sample("nope", 4)
