import json
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from rest_framework import serializers

from mcnfli.cli import cli
from mcnfli.instance import read_instance, write_instance
from mcnfli.serializers import (
    BenchConfigSerializer,
    GenSpecSerializer,
    SolveResultSerializer,
    StartBasisSerializer,
)
from mcnfli.simplex import solve

from .factories import WORKED_BASIS, WORKED_EXAMPLE, build, idle_trap, saturating_trap, worked_example

WORKED = str(WORKED_EXAMPLE)


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, instance=None, text=None):
        path = self.tmp / name
        if instance is not None:
            write_instance(path, instance)
        else:
            path.write_text(text)
        return str(path)

    def call(self, *args, **options):
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err, **options)
        return out.getvalue(), err.getvalue()

    def assertFails(self, code, *args, **options):
        with self.assertRaises(CommandError) as cm:
            self.call(*args, **options)
        self.assertEqual(cm.exception.returncode, code)
        return cm.exception


class SolveCommandTests(CommandTestCase):
    def test_json(self):
        out, _ = self.call("solve", input=WORKED)
        data = json.loads(out)
        self.assertEqual(data["status"], "optimal")
        self.assertAlmostEqual(data["objective"], 189.25, places=6)
        self.assertEqual(data["flows"][0]["arc"], 1)
        self.assertEqual(len(data["slacks"]), 4)

    def test_csv_to_file(self):
        target = self.tmp / "flows.csv"
        self.call("solve", input=WORKED, format="csv", output=str(target), use_dhat=True)
        lines = target.read_text().splitlines()
        self.assertEqual(lines[0], "arc,tail,head,flow")
        self.assertEqual(len(lines), 25)

    def test_infeasible(self):
        path = self.write("tight.dimacs", build({1: 5, 2: -5}, [(1, 2, 3, 1)]))
        out, err = self.call("solve", input=path)
        data = json.loads(out)
        self.assertEqual(data["status"], "infeasible")
        self.assertIsNone(data["objective"])
        self.assertIn("no feasible flow", err)
        self.assertFails(3, "solve", input=path, require_feasible=True)

    def test_bad_input(self):
        self.assertFails(1, "solve", input=str(self.tmp / "missing.dimacs"))
        error = self.assertFails(1, "solve", input=self.write("bad.dimacs", text="p mcnfli 2 1 0\na 1 1 x 1 1\n"))
        self.assertIn("Line 2", str(error))
        unbalanced = self.write("unbalanced.dimacs", build({1: 5, 2: -4}, [(1, 2, 9, 1)]))
        self.assertFails(1, "solve", input=unbalanced)


class BidmCommandTests(CommandTestCase):
    def test_solve_bidm(self):
        path = self.write("trap.dimacs", saturating_trap())
        data = json.loads(self.call("solve_bidm", input=path)[0])
        self.assertAlmostEqual(data["objective"], 20)
        self.assertEqual(data["y"], [0, 0])
        self.assertIn("explored", data["search"])

        data = json.loads(self.call("solve_bidm", input=path, brute_force=True)[0])
        self.assertEqual(data["y"], [0, 0])
        self.assertNotIn("search", data)

    def test_solve_bidm_needs_bidm(self):
        self.assertFails(1, "solve_bidm", input=WORKED)

    def test_round(self):
        path = self.write("idle.dimacs", idle_trap())
        first, _ = self.call("round", input=path, scheme="child", epsilon=0.05, seed=3)
        second, _ = self.call("round", input=path, scheme="child", epsilon=0.05, seed=3)
        self.assertEqual(first, second)
        data = json.loads(first)
        self.assertEqual(data["status"], "feasible")
        self.assertEqual(data["y"], [0, 1])
        self.assertAlmostEqual(data["objective"], 10)
        self.assertEqual(data["scheme"], "child(0.05)")

        data = json.loads(self.call("round", input=path, scheme="child", epsilon=0.05, with_reference=True)[0])
        self.assertAlmostEqual(data["relative_error"], 0.0)

        data = json.loads(self.call("round", input=path, scheme="parent", max_attempts=20)[0])
        self.assertEqual((data["status"], data["attempts"]), ("failed", 20))
        self.assertIsNone(data["objective"])

    def test_round_rejects_bad_scheme(self):
        path = self.write("idle.dimacs", idle_trap())
        self.assertFails(1, "round", input=path, epsilon=0.7)
        self.assertFails(1, "round", input=WORKED)


class ToolCommandTests(CommandTestCase):
    def test_generate(self):
        target = self.tmp / "gen.dimacs"
        out, _ = self.call("generate", output=str(target), nodes=16, seed=2, no_feasibility_check=True)
        self.assertIn("Wrote", out)
        instance = read_instance(target)
        self.assertEqual((instance.m, instance.n), (16, 64))
        sidecar = json.loads((self.tmp / "gen.dimacs.json").read_text())
        self.assertEqual(sidecar["seed"], 2)
        self.assertFalse(sidecar["feasibility_checked"])
        self.assertEqual(sidecar["spec"]["nodes"], 16)

    def test_generate_rejects_bad_parameters(self):
        self.assertFails(1, "generate", output=str(self.tmp / "x.dimacs"), nodes=1)

    def test_trace(self):
        out, _ = self.call("trace", input=WORKED, start_basis=str(WORKED_BASIS), detail=True)
        lines = [json.loads(line) for line in out.splitlines()]
        self.assertEqual(len(lines), 4)
        self.assertEqual((lines[0]["entering"], lines[0]["leaving"]), ("x(1,5)", "x(3,5)"))
        self.assertIn("d", lines[0])
        self.assertEqual(lines[-1]["status"], "optimal")
        self.assertAlmostEqual(lines[-1]["objective"], 189.25, places=6)
        self.assertEqual(lines[-1]["iterations"], 2)

    def test_trace_from_scratch(self):
        out, _ = self.call("trace", input=WORKED, rule="bland")
        last = json.loads(out.splitlines()[-1])
        self.assertAlmostEqual(last["objective"], 189.25, places=6)

    def test_dump_basis(self):
        out, _ = self.call("dump_basis", input=WORKED, start_basis=str(WORKED_BASIS))
        lines = out.splitlines()
        self.assertEqual(lines[0], "# D")
        self.assertIn("# D-hat", lines)
        out, _ = self.call("dump_basis", input=WORKED)
        self.assertTrue(out.startswith("# D\n"))

    def test_dump_basis_warns_when_not_optimal(self):
        path = self.write("tight.dimacs", build({1: 5, 2: -5}, [(1, 2, 3, 1)]))
        out, err = self.call("dump_basis", input=path)
        self.assertTrue(out.startswith("# D"))
        self.assertIn("solve ended infeasible; dumping the phase-1 basis", err)
        self.assertFails(3, "dump_basis", input=path, require_feasible=True)

    def test_dump_basis_rejects_bad_basis(self):
        path = self.tmp / "basis.json"
        path.write_text(json.dumps({"basic_arcs": [1, 2], "basic_slacks": [1]}))
        self.assertFails(1, "dump_basis", input=WORKED, start_basis=str(path))

    def test_bench(self):
        config = self.tmp / "bench.json"
        config.write_text(
            json.dumps({"seed": 0, "max_attempts": 50, "schemes": [{"family": "fair"}], "groups": [{"nodes": 12, "trials": 1}]})
        )
        out, _ = self.call("bench", config=str(config), output=str(self.tmp / "results"))
        self.assertIn("1 trials, 0 failed", out)
        self.assertTrue((self.tmp / "results" / "summary.json").exists())


class CliTests(CommandTestCase):
    def run_cli(self, *argv):
        out, err = StringIO(), StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = cli(list(argv))
        return code, out.getvalue(), err.getvalue()

    def test_exit_codes(self):
        code, out, _ = self.run_cli("solve", "--input", WORKED)
        self.assertEqual(code, 0)
        self.assertAlmostEqual(json.loads(out)["objective"], 189.25, places=6)

        infeasible = self.write("tight.dimacs", build({1: 5, 2: -5}, [(1, 2, 3, 1)]))
        self.assertEqual(self.run_cli("solve", "--input", infeasible, "--require-feasible")[0], 3)
        self.assertEqual(self.run_cli("solve-bidm", "--input", WORKED)[0], 1)
        self.assertEqual(self.run_cli("solve")[0], 1)
        self.assertEqual(self.run_cli("solve", "--input", WORKED, "--use-dhat", "maybe")[0], 1)
        self.assertEqual(self.run_cli("frobnicate")[0], 1)
        self.assertEqual(self.run_cli()[0], 1)
        self.assertEqual(self.run_cli("--help")[0], 0)

    def test_hyphenated_names(self):
        path = self.write("trap.dimacs", saturating_trap())
        code, out, _ = self.run_cli("solve-bidm", "--input", path)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["y"], [0, 0])
        code, out, _ = self.run_cli("dump-basis", "--input", WORKED)
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("# D"))


class SerializerTests(SimpleTestCase):
    def test_start_basis_validation(self):
        instance = worked_example()
        serializer = StartBasisSerializer(data={"basic_arcs": [1, 99], "basic_slacks": [9]}, context={"instance": instance})
        self.assertFalse(serializer.is_valid())
        self.assertIn("basic_arcs", serializer.errors)

        serializer = StartBasisSerializer(data={"basic_arcs": [1, 2]}, context={"instance": instance})
        self.assertTrue(serializer.is_valid())
        with self.assertRaises(serializers.ValidationError):
            serializer.save()

    def test_bench_config(self):
        self.assertFalse(BenchConfigSerializer(data={"groups": []}).is_valid())
        serializer = BenchConfigSerializer(data={"groups": [{"nodes": 16, "interdep_frac": 0.05}], "max_attempts": 7})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(len(config.schemes), 7)
        self.assertTrue(all(s.max_attempts == 7 for s in config.schemes))
        self.assertEqual(config.groups[0].trials, 30)
        self.assertEqual(config.groups[0].spec.interdep_frac, 0.05)

    def test_gen_spec(self):
        serializer = GenSpecSerializer(data={"nodes": 10, "source_frac": 0.9, "sink_frac": 0.9})
        self.assertFalse(serializer.is_valid())
        self.assertIn("non_field_errors", serializer.errors)

    def test_non_finite_objective_renders_null(self):
        inf = float("inf")
        result = solve(build(3, [(1, 2, inf, -1), (2, 3, inf, 0), (3, 1, inf, 0)]))
        data = SolveResultSerializer(result).data
        self.assertEqual(data["status"], "unbounded")
        self.assertIsNone(data["objective"])
        self.assertEqual(data["flows"][0]["arc"], 1)
