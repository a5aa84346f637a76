import numpy as np
from django.test import SimpleTestCase

from mcnfli.exceptions import ConfigurationError, GenerationError
from mcnfli.generator import GenSpec, InterdepMode, bidm_feasible, generate, share
from mcnfli.instance import InstanceKind, serialize, validate


class GenSpecTests(SimpleTestCase):
    def test_derived_sizes(self):
        spec = GenSpec(256)
        self.assertEqual((spec.arcs, spec.sources, spec.sinks, spec.total_supply), (1024, 51, 51, 10000))
        spec = GenSpec(512)
        self.assertEqual((spec.arcs, spec.total_supply), (2048, 20000))
        self.assertEqual(share(0.02, 1024), 20)
        self.assertEqual(share(0.001, 10), 1)

    def test_rejects_bad_parameters(self):
        cases = [
            {"nodes": 1},
            {"nodes": 10, "source_frac": 0.0},
            {"nodes": 10, "interdep_frac": 1.0},
            {"nodes": 10, "cost_range": (5, 1)},
            {"nodes": 10, "cap_range": (0, 10)},
            {"nodes": 10, "source_frac": 0.9, "sink_frac": 0.9},
            {"nodes": 10, "arcs_per_node": 0},
        ]
        for params in cases:
            with self.subTest(params=params), self.assertRaises(ConfigurationError):
                GenSpec(**params)


class GenerateTests(SimpleTestCase):
    def test_unstructured_desk_scale(self):
        generated = generate(GenSpec(256, seed=1, ensure_feasible=False))
        instance = generated.instance
        self.assertEqual(instance.kind, InstanceKind.BIDM)
        self.assertEqual((instance.m, instance.n, instance.p), (256, 1024, 20))
        self.assertEqual(instance.total_supply, 10000)
        self.assertEqual(validate(instance), [])
        used = [arc for rec in instance.interdeps for arc in (rec.parent, rec.child)]
        self.assertEqual(len(set(used)), 40)

        provenance = generated.provenance
        self.assertEqual(provenance["seed"], 1)
        self.assertEqual(len(provenance["sources"]), 51)
        self.assertEqual(len(provenance["skeleton_arcs"]), 256)
        for arc_id in provenance["skeleton_arcs"]:
            self.assertEqual(instance.arc(arc_id).cost, 100)
            self.assertGreaterEqual(instance.arc(arc_id).capacity, 10000)

    def test_relaxation_coefficients(self):
        instance = generate(GenSpec(64, seed=4, ensure_feasible=False)).instance
        for rec in instance.interdeps:
            self.assertAlmostEqual(rec.alpha, instance.arc(rec.child).capacity / instance.arc(rec.parent).capacity)
            self.assertEqual(rec.beta, 0.0)

    def test_costs_look_uniform(self):
        generated = generate(GenSpec(256, arcs_per_node=8, seed=11, ensure_feasible=False))
        skeleton = set(generated.provenance["skeleton_arcs"])
        costs = [arc.cost for arc in generated.instance.arcs if arc.id not in skeleton]
        counts, _ = np.histogram(costs, bins=10, range=(0.5, 100.5))
        expected = len(costs) / 10
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # 0.999 quantile with 9 degrees of freedom
        self.assertLess(chi2, 27.88)

    def test_capacities_look_uniform(self):
        generated = generate(GenSpec(256, arcs_per_node=8, seed=12, ensure_feasible=False))
        skeleton = set(generated.provenance["skeleton_arcs"])
        caps = np.array([arc.capacity for arc in generated.instance.arcs if arc.id not in skeleton])
        lo, hi = 100, 500
        # ten bins of 40 or 41 integer values each
        width = hi - lo + 1
        counts = np.bincount(((caps - lo) * 10 // width).astype(int), minlength=10)
        values_per_bin = np.bincount(np.arange(width) * 10 // width, minlength=10)
        expected = len(caps) * values_per_bin / width
        self.assertEqual(len(counts), 10)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # 0.999 quantile with 9 degrees of freedom
        self.assertLess(chi2, 27.88)

    def test_structured(self):
        generated = generate(
            GenSpec(40, interdep_mode=InterdepMode.STRUCTURED, interdep_frac=0.25, seed=3, ensure_feasible=False)
        )
        instance = generated.instance
        parent_nodes = generated.provenance["parent_nodes"]
        self.assertEqual(len(parent_nodes), 2)
        self.assertEqual((instance.m, instance.p), (43, 2))
        self.assertEqual(validate(instance), [])
        for rec, node_id in zip(instance.interdeps, parent_nodes):
            parent = instance.arc(rec.parent)
            self.assertEqual(parent.tail, node_id)
            self.assertEqual(instance.node(node_id).supply, 0)
            self.assertEqual(instance.node(parent.head).supply, -parent.capacity)
            self.assertIn(node_id, generated.provenance["sinks"])
            self.assertLessEqual(rec.child, 160)

    def test_same_seed_same_instance(self):
        spec = GenSpec(32, seed=9, ensure_feasible=False)
        self.assertEqual(serialize(generate(spec).instance), serialize(generate(spec).instance))
        other = GenSpec(32, seed=10, ensure_feasible=False)
        self.assertNotEqual(serialize(generate(spec).instance), serialize(generate(other).instance))

    def test_feasibility_check(self):
        generated = generate(GenSpec(16, seed=5))
        self.assertTrue(generated.provenance["feasibility_checked"])
        self.assertTrue(bidm_feasible(generated.instance))

    def test_too_many_pairs(self):
        with self.assertRaises(GenerationError):
            generate(GenSpec(2, arcs_per_node=1, interdep_frac=0.9, ensure_feasible=False))
