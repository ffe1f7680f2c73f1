import numpy as np
import pytest

from hatcc.factor_graph import (SEMIRINGS, FactorDecl, FactorGraph,
                                PotentialSlice, VariableDecl, restrict)
from hatcc.generators import gen_four_cycle
from hatcc.holonomy import (HolonomyMatrix, InterfaceCapExceeded, compose,
                            diagnose, holonomy_matrix, is_trivial,
                            mode_quotient, structural_checksum,
                            transport_kernel)
from hatcc.nerve import NerveEdge, backbone, build_factor_nerve, \
    fundamental_cycle


def _h(matrix) -> HolonomyMatrix:
    edge = NerveEdge(0, 1, (0,), 0.0)
    return HolonomyMatrix(edge, (0,), np.asarray(matrix, dtype=bool))


class TestTransportKernel:
    def test_copy_factor_identity(self):
        g = gen_four_cycle("even")
        # factor 3 couples D and A with a copy constraint
        k = transport_kernel(g, 3, (0,), (3,))
        np.testing.assert_array_equal(k.matrix, np.eye(2, dtype=bool))

    def test_not_factor_antidiagonal(self):
        g = gen_four_cycle("odd")
        # factor 2 couples C and D with a NOT constraint
        k = transport_kernel(g, 2, (3,), (2,))
        np.testing.assert_array_equal(k.matrix,
                                      [[False, True], [True, False]])

    def test_all_zero_potential_empty_kernel(self):
        g = FactorGraph("sum_product",
                        (VariableDecl(0, 2), VariableDecl(1, 2)),
                        (FactorDecl(0, (0, 1), [0.0] * 4),))
        k = transport_kernel(g, 0, (0,), (1,))
        assert not k.matrix.any()

    def test_overlapping_interfaces_require_agreement(self):
        g = FactorGraph("sum_product",
                        (VariableDecl(0, 2), VariableDecl(1, 2)),
                        (FactorDecl(0, (0, 1), [1.0] * 4),))
        k = transport_kernel(g, 0, (0,), (0, 1))
        # source state x supports only target states agreeing on var 0
        for x in range(2):
            for y in range(4):
                y0 = y // 2
                assert k.matrix[x, y] == (x == y0)

    def test_scope_violation_rejected(self):
        g = gen_four_cycle("even")
        with pytest.raises(ValueError):
            transport_kernel(g, 0, (2,), (0,))

    def test_matches_restriction_support(self):
        r = np.random.default_rng(0)
        for seed in range(20):
            rr = np.random.default_rng(seed)
            table = rr.uniform(0, 1, (2, 3, 2))
            table[table < 0.4] = 0.0
            g = FactorGraph("sum_product",
                            (VariableDecl(0, 2), VariableDecl(1, 3),
                             VariableDecl(2, 2)),
                            (FactorDecl(0, (0, 1, 2), table.ravel()),))
            k = transport_kernel(g, 0, (0,), (2,))
            marg = restrict(PotentialSlice((0, 1, 2), table), (0, 2),
                            SEMIRINGS["sum_product"])
            np.testing.assert_array_equal(k.matrix, marg.table > 0)

    def test_tolerance_drops_small_entries(self):
        table = np.array([[1.0, 0.05], [0.05, 1.0]])
        g = FactorGraph("sum_product",
                        (VariableDecl(0, 2), VariableDecl(1, 2)),
                        (FactorDecl(0, (0, 1), table.ravel()),))
        exact = transport_kernel(g, 0, (0,), (1,))
        assert exact.matrix.all()
        tol = transport_kernel(g, 0, (0,), (1,), tol=0.1)
        np.testing.assert_array_equal(tol.matrix, np.eye(2, dtype=bool))


def _chord_cycle(graph):
    bb = backbone(build_factor_nerve(graph))
    return fundamental_cycle(graph, bb, bb.chords[0])


class TestHolonomyMatrix:
    def test_odd_cycle_swap(self):
        g = gen_four_cycle("odd")
        H = holonomy_matrix(g, _chord_cycle(g))
        np.testing.assert_array_equal(H.matrix.astype(int),
                                      [[0, 1], [1, 0]])

    def test_even_cycle_identity(self):
        g = gen_four_cycle("even")
        H = holonomy_matrix(g, _chord_cycle(g))
        assert is_trivial(H)

    def test_uniform_support_cycle_all_ones(self):
        # positive tables everywhere: every state reaches every state
        r = np.random.default_rng(1)
        variables = tuple(VariableDecl(i, 2) for i in range(4))
        factors = tuple(
            FactorDecl(i, (i, (i + 1) % 4), r.uniform(0.1, 1, 4))
            for i in range(4))
        g = FactorGraph("sum_product", variables, factors)
        H = holonomy_matrix(g, _chord_cycle(g))
        assert H.matrix.all()

    def test_composition_association_invariance(self):
        g = gen_four_cycle("odd")
        cyc = _chord_cycle(g)
        kernels = [transport_kernel(g, cyc.factor_sequence[0],
                                    cyc.interface_sequence[-1],
                                    cyc.interface_sequence[0]).matrix]
        for i in range(1, len(cyc.factor_sequence)):
            kernels.append(transport_kernel(
                g, cyc.factor_sequence[i], cyc.interface_sequence[i - 1],
                cyc.interface_sequence[i]).matrix)
        left = kernels[0]
        for k in kernels[1:]:
            left = compose(left, k)
        right = kernels[-1]
        for k in reversed(kernels[:-1]):
            right = compose(k, right)
        np.testing.assert_array_equal(left, right)

    def test_interface_cap_enforced(self):
        g = gen_four_cycle("odd")
        with pytest.raises(InterfaceCapExceeded):
            holonomy_matrix(g, _chord_cycle(g), cap=1)


class TestModeQuotient:
    def test_swap_single_mode(self):
        q = mode_quotient(_h([[0, 1], [1, 0]]))
        assert q.modes == ((0, 1),)
        assert not q.fixed_point_mask.any()

    def test_identity_singleton_modes(self):
        q = mode_quotient(_h(np.eye(2)))
        assert q.modes == ((0,), (1,))
        assert list(q.quotient) == [0, 1]
        assert q.fixed_point_mask.all()

    def test_zero_matrix_singletons_no_fixed_points(self):
        q = mode_quotient(_h(np.zeros((3, 3))))
        assert q.modes == ((0,), (1,), (2,))
        assert not q.fixed_point_mask.any()

    def test_quotient_soundness_mutual_reachability(self):
        r = np.random.default_rng(4)
        for _ in range(30):
            n = int(r.integers(2, 9))
            mat = r.random((n, n)) < 0.3
            q = mode_quotient(_h(mat))
            # transitive closure
            reach = mat.copy()
            for _ in range(n):
                reach = reach | compose(reach, mat)
            for mode in q.modes:
                for x in mode:
                    for y in mode:
                        if x != y:
                            assert reach[x, y] and reach[y, x]


class TestTriviality:
    def test_identity_trivial(self):
        assert is_trivial(_h(np.eye(3)))

    def test_swap_not_trivial(self):
        assert not is_trivial(_h([[0, 1], [1, 0]]))

    def test_upper_triangular_not_trivial(self):
        assert not is_trivial(_h([[1, 1], [0, 1]]))


class TestReport:
    def test_report_rows_for_odd_cycle(self):
        from hatcc.holonomy import report_to_json_dict
        rep = diagnose(gen_four_cycle("odd"))
        d = report_to_json_dict(rep)
        assert d["n_chords"] == 1
        assert d["chords"][0]["matrix_rows"] == ["01", "10"]
        assert d["chords"][0]["mode_sizes"] == [2]
        assert not d["chords"][0]["trivial"]

    def test_checksum_stable_and_parity_sensitive(self):
        odd = structural_checksum(diagnose(gen_four_cycle("odd")))
        odd2 = structural_checksum(diagnose(gen_four_cycle("odd")))
        even = structural_checksum(diagnose(gen_four_cycle("even")))
        assert odd == odd2
        assert odd != even
