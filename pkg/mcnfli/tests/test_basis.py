import numpy as np
from django.test import SimpleTestCase, tag

from mcnfli.basis import (
    BasisState,
    FlowNetwork,
    VariableRef,
    build_cert,
    delta,
    dump_cert_csv,
    gauss_rank,
    gauss_solve,
    is_good,
)
from mcnfli.exceptions import BasisError, SingularMatrixError
from mcnfli.oracle import assemble, dense_rank
from mcnfli.simplex import compute_potentials, reduced_costs

from .factories import random_instance, worked_example, worked_start


class EliminationTests(SimpleTestCase):
    def test_rank(self):
        self.assertEqual(gauss_rank(np.eye(3)), 3)
        self.assertEqual(gauss_rank([[1, 2], [2, 4]]), 1)
        self.assertEqual(gauss_rank(np.zeros((0, 0))), 0)

    def test_solve(self):
        a = np.array([[0.0, 2.0], [1.0, 1.0]])
        np.testing.assert_allclose(gauss_solve(a, [4.0, 3.0]), [1.0, 2.0])
        with self.assertRaises(SingularMatrixError):
            gauss_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])


class ForestTests(SimpleTestCase):
    def setUp(self):
        self.basis = worked_start()
        self.forest = self.basis.forest

    def test_delta(self):
        # node ids are positions + 1; trees are {1,4}, {2,3,6,7,10,11}, {5}, {8,9}
        self.assertEqual(delta(0, 4, 0, self.forest), 1)
        self.assertEqual(delta(0, 4, 2, self.forest), -1)
        self.assertEqual(delta(0, 4, 1, self.forest), 0)
        self.assertEqual(delta(0, 3, 0, self.forest), 0)

    def test_roots_are_smallest_nodes(self):
        self.assertEqual(self.forest.roots, [0, 1, 4, 7])
        for tree in self.forest.trees:
            for node in tree[1:]:
                self.assertLess(tree.index(self.forest.parent[node]), tree.index(node))

    def test_sets(self):
        net = self.basis.network
        self.assertEqual(self.basis.r, 7)
        self.assertEqual({net.label(net.column(v)) for v in self.basis.upper}, {"x(2,5)", "x(5,9)"})
        self.assertIn(VariableRef.slack(2), self.basis.lower)


class FromSetsTests(SimpleTestCase):
    def setUp(self):
        self.net = FlowNetwork.from_instance(worked_example())
        self.start = worked_start()

    def test_rejects_bad_sets(self):
        basic = list(self.start.basic)
        with self.assertRaisesMessage(BasisError, "expected 14"):
            BasisState.from_sets(self.net, basic[:-1])
        with self.assertRaisesMessage(BasisError, "duplicate"):
            BasisState.from_sets(self.net, basic[:-1] + basic[:1])
        with self.assertRaisesMessage(BasisError, "no finite upper bound"):
            BasisState.from_sets(self.net, basic, [VariableRef.slack(2)])
        with self.assertRaisesMessage(BasisError, "both basic"):
            BasisState.from_sets(self.net, basic, [basic[0]])

    def test_cycle(self):
        # x(1,4), x(1,5), x(4,5) close a cycle
        cycle = [1, 2, 10]
        others = [c for c in range(self.net.n) if c not in cycle and not self.net.is_interdependent(c)]
        with self.assertRaisesMessage(BasisError, "cycle"):
            BasisState.from_sets(self.net, cycle + others[:8] + [24, 25, 26])


class CertificateTests(SimpleTestCase):
    def test_worked_example_is_good(self):
        basis = worked_start()
        cert = build_cert(basis)
        self.assertTrue(is_good(cert, cross_check=True))
        self.assertEqual(cert.dhat.shape, (4, 4))
        self.assertEqual(cert.dhat_rows, [0, 1, 2, 5])

    def test_tree_rows_sum_with_dropped_row_to_zero(self):
        cert = build_cert(worked_start())
        tree_rows = cert.r - 4
        np.testing.assert_allclose(cert.d[:tree_rows].sum(axis=0) + cert.dropped_row, 0)

    def test_dump_csv(self):
        basis = worked_start()
        text = dump_cert_csv(build_cert(basis), basis.network)
        lines = text.splitlines()
        self.assertEqual(lines[0], "# D")
        self.assertEqual(lines[1], "row,x(4,8),x(3,5),x(1,2),x(5,10),s1,s2,s4")
        self.assertEqual(lines[2], "T1,1.0,0.0,1.0,0.0,0.0,0.0,0.0")
        self.assertEqual(lines[9], "# D-hat")
        self.assertEqual(lines[10], "row,x(4,8),x(3,5),x(1,2),x(5,10)")
        self.assertEqual([line.split(",")[0] for line in lines[11:]], ["T1", "T2", "T3", "I3"])

    def test_rank_equivalence(self):
        self._sample(seeds=range(4), draws=250)

    @tag("slow")
    def test_rank_equivalence_many_networks(self):
        self._sample(seeds=range(100, 140), draws=250)

    def _sample(self, seeds, draws):
        good = 0
        for seed in seeds:
            m, p = 3 + seed % 8, 1 + seed % 3
            instance = random_instance(seed, m=m, extra_arcs=m + 2 * p, p=p)
            net = FlowNetwork.from_instance(instance)
            a = assemble(instance).a
            size = net.m + net.p - 1
            rng = np.random.default_rng(seed)
            for _ in range(draws):
                cols = sorted(rng.choice(net.ncols, size=size, replace=False).tolist())
                full = dense_rank(a[:, cols]) == size
                try:
                    basis = BasisState.from_sets(net, cols)
                except BasisError:
                    self.assertFalse(full, cols)
                    continue
                cert = build_cert(basis)
                rows, width = cert.dhat.shape
                self.assertEqual(rows, width)
                self.assertEqual(is_good(cert, cross_check=True), full, cols)
                self.assertEqual(gauss_rank(cert.dhat) == rows, full, cols)
                np.testing.assert_allclose(cert.d[: basis.forest.count - 1].sum(axis=0) + cert.dropped_row, 0)
                if full:
                    rc = reduced_costs(net, compute_potentials(basis, cert=cert))
                    np.testing.assert_allclose(rc[sorted(basis.basic)], 0, atol=1e-7)
                good += full
        self.assertGreater(good, 0)
