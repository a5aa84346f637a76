import json
from pathlib import Path

from mcnfli.exceptions import GenerationError
from mcnfli.generator import generate
from mcnfli.instance import write_instance
from mcnfli.management.base import SolverCommand
from mcnfli.serializers import GenSpecSerializer


class Command(SolverCommand):
    help = "Generate a random interdependent instance plus a provenance sidecar (<output>.json)."

    def add_arguments(self, parser):
        parser.add_argument("--output", required=True, help="Instance file to write.")
        parser.add_argument("--config", default="", help="JSON file with generation parameters.")
        parser.add_argument("--nodes", type=int, default=None)
        parser.add_argument("--arcs-per-node", type=int, default=None)
        parser.add_argument("--mode", choices=["structured", "unstructured"], default=None)
        parser.add_argument("--density", type=float, default=None, help="Interdependence fraction.")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--no-feasibility-check", action="store_true")

    def handle(self, *args, **opts):
        params = self.load_json(opts["config"]) if opts["config"] else {}
        overrides = {
            "nodes": opts["nodes"],
            "arcs_per_node": opts["arcs_per_node"],
            "interdep_mode": opts["mode"],
            "interdep_frac": opts["density"],
            "seed": opts["seed"],
        }
        params.update({key: value for key, value in overrides.items() if value is not None})
        if opts["no_feasibility_check"]:
            params["ensure_feasible"] = False
        spec = self.validated(GenSpecSerializer(data=params), opts["config"] or "arguments")

        try:
            generated = generate(spec)
        except GenerationError as exc:
            raise self.solver_failure(exc)
        output = Path(opts["output"])
        write_instance(output, generated.instance)
        sidecar = output.with_name(output.name + ".json")
        sidecar.write_text(json.dumps(generated.provenance, indent=2))
        inst = generated.instance
        self.stdout.write(
            self.style.SUCCESS(f"Wrote {output} (m={inst.m}, n={inst.n}, p={inst.p}) and {sidecar.name}")
        )
