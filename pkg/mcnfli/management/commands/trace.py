import json

from mcnfli.exceptions import MCNFLIError
from mcnfli.management.base import SolverCommand
from mcnfli.serializers import StartBasisSerializer
from mcnfli.simplex import NetworkSimplex


class Command(SolverCommand):
    help = "Solve and print one JSON line per iteration."

    def add_arguments(self, parser):
        self.add_input_argument(parser)
        parser.add_argument("--output", default="")
        self.add_solver_arguments(parser)
        parser.add_argument(
            "--start-basis", default="", help="JSON basis (basic_arcs, basic_slacks, upper_arcs) to start phase 2 from."
        )
        parser.add_argument(
            "--detail",
            action="store_true",
            help="Include basic values, trees, requirements, potentials and D in each line.",
        )

    def handle(self, *args, **opts):
        instance = self.load_instance(opts["input"])
        start = None
        if opts["start_basis"]:
            serializer = StartBasisSerializer(data=self.load_json(opts["start_basis"]), context={"instance": instance})
            start = self.validated(serializer, opts["start_basis"])

        lines = []
        solver = NetworkSimplex(
            instance,
            opts["rule"],
            opts["use_dhat"],
            trace=lambda record: lines.append(json.dumps(record.as_dict())),
            trace_detail=opts["detail"],
        )
        try:
            result = solver.run(start)
        except MCNFLIError as exc:
            raise self.solver_failure(exc)
        objective = result.objective if result.optimal else None
        lines.append(json.dumps({"status": result.status.value, "objective": objective, "iterations": result.iterations}))
        self.emit("\n".join(lines), opts)
