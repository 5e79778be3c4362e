import numpy as np
import pytest

from sphereqp import oracle
from sphereqp.errors import ParseError, ValidationError
from sphereqp.linalg import SymMatrix
from sphereqp.dual import ProblemInstance
from sphereqp.problems import (
    GenSpec,
    gen_general,
    gen_hard,
    read_instance,
    read_instance_meta,
    read_solution,
    write_instance,
    write_solution,
)
from sphereqp.solver import solve

from conftest import example_hard


class TestGenSpec:
    def test_hard_needs_two_dims(self):
        with pytest.raises(ValidationError):
            GenSpec(1, "hard")

    def test_empty_range(self):
        with pytest.raises(ValidationError):
            GenSpec(3, "general", coeff_range=(2, 1))


class TestGeneral:
    def test_deterministic(self):
        a, b = gen_general(GenSpec(4, "general", 7)), gen_general(GenSpec(4, "general", 7))
        np.testing.assert_array_equal(a.Q.to_dense(), b.Q.to_dense())
        np.testing.assert_array_equal(a.f, b.f)
        assert a.r == b.r

    @pytest.mark.parametrize("seed", range(10))
    def test_integer_structure(self, seed):
        prob = gen_general(GenSpec(500, "general", seed))
        A = prob.Q.to_dense()
        np.testing.assert_array_equal(A, A.T)
        np.testing.assert_array_equal(2 * A, np.round(2 * A))
        assert np.abs(A).max() <= 100
        np.testing.assert_array_equal(prob.f, np.round(prob.f))
        assert prob.r > 0 and prob.r == int(prob.r)

    def test_degenerate_range(self):
        prob = gen_general(GenSpec(3, "general", 0, coeff_range=(5, 5)))
        np.testing.assert_array_equal(prob.Q.to_dense(), 5.0)
        np.testing.assert_array_equal(prob.f, 5.0)
        assert prob.r == 5.0


class TestHard:
    @pytest.mark.parametrize("seed", range(10))
    def test_existence_condition_fails(self, seed):
        prob, cert = gen_hard(GenSpec(40, "hard", seed))
        holds, head, tail = oracle.existence_condition(oracle.eig_full(prob.Q), prob.f, prob.r)
        assert not holds
        assert abs(cert.v1 @ prob.f) <= 1e-12 * np.linalg.norm(prob.f)
        assert tail == pytest.approx(cert.tail_sum, rel=1e-8)
        assert cert.r == pytest.approx(1.25 * np.sqrt(cert.tail_sum))

    def test_spectrum_layout(self):
        _, cert = gen_hard(GenSpec(50, "hard", 1))
        lam = cert.lambdas
        assert -100 <= lam[0] <= -1
        assert np.all(lam[1:] >= lam[0] + 1) and np.all(lam <= 100)
        assert np.all(np.diff(lam) >= 0)

    def test_two_dim_family(self):
        prob, cert = gen_hard(GenSpec(2, "hard", 3, spectrum=(-1.0, 1.0)))
        np.testing.assert_allclose(np.linalg.eigvalsh(prob.Q.to_dense()), [-1.0, 1.0], atol=1e-14)
        # f lies on the second eigenvector, as in the planar worked example.
        dec = oracle.eig_full(prob.Q)
        assert abs(dec.project(prob.f)[0]) <= 1e-12 * np.linalg.norm(prob.f)
        assert cert.tail_sum == pytest.approx((prob.f @ prob.f) / 4)

    @pytest.mark.parametrize("seed", range(3))
    def test_general_instances_solve(self, seed):
        sol = solve(gen_general(GenSpec(50, "general", seed)))
        assert sol.converged and (sol.case.value == "Interior" or abs(sol.psi_final) <= 1e-8)


class TestIO:
    def test_roundtrip_example(self, tmp_path):
        prob = example_hard()
        write_instance(prob, tmp_path / "ex1")
        back = read_instance(tmp_path / "ex1")
        np.testing.assert_array_equal(back.Q.to_dense(), prob.Q.to_dense())
        np.testing.assert_array_equal(back.f, prob.f)
        assert back.r == prob.r

    @pytest.mark.parametrize("case", ["general", "hard"])
    def test_roundtrip_bitwise(self, tmp_path, case):
        spec = GenSpec(30, case, 4)
        prob = gen_hard(spec)[0] if case == "hard" else gen_general(spec)
        write_instance(prob, tmp_path / "x", meta={"case": case})
        for path in (tmp_path / "x", tmp_path / "x.mtx", tmp_path / "x.rhs"):
            back = read_instance(path)
            assert back.Q.to_dense().tobytes() == prob.Q.to_dense().tobytes()
            assert back.f.tobytes() == prob.f.tobytes()
            assert back.r == prob.r
        assert read_instance_meta(tmp_path / "x")["case"] == case

    def test_array_format(self, tmp_path):
        (tmp_path / "a.mtx").write_text(
            "%%MatrixMarket matrix array real symmetric\n2 2\n1.0\n2.0\n3.0\n"
        )
        (tmp_path / "a.rhs").write_text("1.5\n1 2\n")
        prob = read_instance(tmp_path / "a")
        np.testing.assert_array_equal(prob.Q.to_dense(), [[1.0, 2.0], [2.0, 3.0]])

    def test_rejects_general_header(self, tmp_path):
        (tmp_path / "g.mtx").write_text(
            "%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 1.0\n"
        )
        (tmp_path / "g.rhs").write_text("1\n0 0 0\n")
        with pytest.raises(ParseError, match="symmetric"):
            read_instance(tmp_path / "g")

    def test_negative_radius(self, tmp_path):
        write_instance(example_hard(), tmp_path / "e")
        (tmp_path / "e.rhs").write_text("-1\n0 -1.8\n")
        with pytest.raises(ValidationError):
            read_instance(tmp_path / "e")

    def test_parse_error_location(self, tmp_path):
        (tmp_path / "b.mtx").write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 1 abc\n"
        )
        (tmp_path / "b.rhs").write_text("1\n0 0\n")
        with pytest.raises(ParseError) as info:
            read_instance(tmp_path / "b")
        assert (info.value.line, info.value.column) == (4, 5)

    def test_upper_triangle_entry_rejected(self, tmp_path):
        (tmp_path / "u.mtx").write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n"
        )
        with pytest.raises(ParseError):
            read_instance(tmp_path / "u")

    def test_wrong_f_length(self, tmp_path):
        write_instance(example_hard(), tmp_path / "e")
        (tmp_path / "e.rhs").write_text("1\n0 -1.8 3\n")
        with pytest.raises(ParseError):
            read_instance(tmp_path / "e")

    def test_solution_document(self, tmp_path):
        sol = solve(example_hard())
        write_solution(sol, tmp_path / "s.json")
        doc = read_solution(tmp_path / "s.json")
        assert doc["case"] == "BoundaryHardPerturbed"
        assert doc["sigma"] == sol.sigma
        assert doc["x"] == list(sol.x)
        assert doc["perturbation"]["alpha"] == 1e-4
        write_solution(sol, tmp_path / "s.txt", fmt="text")
        text = (tmp_path / "s.txt").read_text()
        assert "case = BoundaryHardPerturbed" in text and "kkt.stationarity" in text
