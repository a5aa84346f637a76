import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from mcnfli.approx import check_bidm, solve_bidm
from mcnfli.exceptions import ConfigurationError, InstanceError
from mcnfli.instance import InstanceKind
from mcnfli.oracle import assemble, brute_force_bidm, dense_rank, fixed_lp, solve_dense
from mcnfli.simplex import SolveStatus

from .factories import bidm, build, idle_trap, random_instance, saturating_trap, worked_example


class AssembleTests(SimpleTestCase):
    def test_network_only(self):
        instance = build({1: 2, 3: -2}, [(1, 2, 5, 1), (2, 3, 5, 1)])
        lp = assemble(instance)
        np.testing.assert_array_equal(lp.a, [[1, 0], [-1, 1], [0, -1]])
        np.testing.assert_array_equal(lp.rhs, [2, 0, -2])
        self.assertEqual(lp.n_arcs, 2)

    def test_interdependence_rows(self):
        instance = build(3, [(1, 2, 5, 1), (2, 3, 5, 1), (1, 3, 5, 1)], [(1, 3, 2.0, 1.0)])
        lp = assemble(instance)
        self.assertEqual(lp.a.shape, (4, 4))
        np.testing.assert_array_equal(lp.a[3], [-2, 0, 1, 1])
        self.assertEqual(lp.rhs[3], 1.0)
        self.assertEqual(lp.upper[3], np.inf)
        self.assertEqual(lp.cost[3], 0.0)

    def test_bidm_is_assembled_as_relaxation(self):
        lp = assemble(saturating_trap())
        # child (5,7) over parent (2,3): 100 / 2
        self.assertEqual(lp.a[11, 1], -50.0)
        self.assertEqual(lp.rhs[11], 0.0)


class DenseSolveTests(SimpleTestCase):
    def test_worked_example(self):
        lp = assemble(worked_example())
        self.assertEqual(dense_rank(lp.a), 14)
        result = solve_dense(lp)
        self.assertEqual(result.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, 189.25, places=6)

    def test_infeasible(self):
        result = solve_dense(assemble(build({1: 5, 2: -5}, [(1, 2, 3, 1)])))
        self.assertEqual(result.status, SolveStatus.INFEASIBLE)

    def test_unbounded(self):
        inf = float("inf")
        result = solve_dense(assemble(build(3, [(1, 2, inf, -1), (2, 3, inf, 0), (3, 1, inf, 0)])))
        self.assertEqual(result.status, SolveStatus.UNBOUNDED)

    def test_upper_bounds_are_used(self):
        instance = build({1: 4, 3: -4}, [(1, 3, 1, 1), (1, 2, 10, 1), (2, 3, 10, 1)])
        result = solve_dense(assemble(instance))
        np.testing.assert_allclose(result.flows, [1, 3, 3], atol=1e-9)
        self.assertAlmostEqual(result.objective, 7)


class BruteForceTests(SimpleTestCase):
    def test_no_interdependencies(self):
        instance = build({1: 2, 3: -2}, [(1, 2, 5, 1), (2, 3, 5, 1), (1, 3, 1, 5)], kind=InstanceKind.BIDM)
        result, y = brute_force_bidm(instance)
        self.assertEqual(y, ())
        self.assertAlmostEqual(result.objective, 4)

    def test_traps(self):
        for factory, objective, expected_y in ((saturating_trap, 20, (0, 0)), (idle_trap, 10, (0, 1))):
            instance = factory()
            with self.subTest(factory.__name__):
                result, y = brute_force_bidm(instance)
                self.assertEqual(y, expected_y)
                self.assertAlmostEqual(result.objective, objective)
                self.assertEqual(check_bidm(instance, result.flows, y), [])

    def test_fixed_lp_moves_saturated_parents_to_the_constant(self):
        instance = build(
            {1: 1, 2: -1}, [(1, 2, 3, 2), (2, 1, 3, 0), (1, 2, 5, 1)], [(1, 3, 5 / 3, 0.0)], InstanceKind.BIDM
        )
        lp, keep = fixed_lp(instance, (1,))
        self.assertEqual(keep, [1, 2])
        self.assertEqual(lp.constant, 6.0)
        np.testing.assert_array_equal(lp.rhs, [-2, 2])
        result, y = brute_force_bidm(instance)
        # y = 0 ships on (1,2) at 2; y = 1 pays 6 for the parent and ships back for free
        self.assertEqual(y, (0,))
        self.assertAlmostEqual(result.objective, 2)

    def test_unbounded_assignment_makes_the_problem_unbounded(self):
        inf = float("inf")
        instance = bidm(
            {1: 1, 2: -1, 3: 0, 4: 0},
            [(1, 2, 2, 0), (1, 2, 1, 1), (3, 4, inf, -1), (4, 3, inf, 0)],
            [(1, 2)],
        )
        exact, y = brute_force_bidm(instance)
        self.assertEqual(exact.status, SolveStatus.UNBOUNDED)
        self.assertEqual(exact.objective, -inf)
        self.assertIsNone(y)
        searched, y = solve_bidm(instance)
        self.assertEqual(searched.status, SolveStatus.UNBOUNDED)
        self.assertEqual(searched.objective, -inf)
        self.assertIsNone(y)

    def test_limits(self):
        with override_settings(MCNFLI={"BRUTE_FORCE_MAX_P": 1}), self.assertRaises(ConfigurationError):
            brute_force_bidm(saturating_trap())
        with self.assertRaises(InstanceError):
            brute_force_bidm(worked_example())

    def test_branch_and_bound_agrees(self):
        self._compare(range(15))

    @tag("slow")
    def test_branch_and_bound_agrees_many(self):
        self._compare(range(100, 200), p=6)

    def _compare(self, seeds, p=3):
        for seed in seeds:
            instance = random_instance(seed, m=7, extra_arcs=max(12, 2 * p + 2), p=p, kind=InstanceKind.BIDM)
            with self.subTest(seed=seed):
                exact, y_exact = brute_force_bidm(instance)
                searched, y = solve_bidm(instance)
                self.assertEqual(searched.status, exact.status)
                self.assertAlmostEqual(searched.objective, exact.objective, delta=1e-6)
                self.assertEqual(check_bidm(instance, searched.flows, y), [])
                self.assertEqual(check_bidm(instance, exact.flows, y_exact), [])
