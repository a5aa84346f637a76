from django.core.management.base import CommandError

from mcnfli.approx import BranchAndBound
from mcnfli.exceptions import MCNFLIError
from mcnfli.instance import InstanceKind
from mcnfli.management.base import USAGE, SolverCommand
from mcnfli.oracle import brute_force_bidm
from mcnfli.serializers import SolveResultSerializer
from mcnfli.simplex import SolveStatus


class Command(SolverCommand):
    help = "Solve the binary interdependence model exactly by branch-and-bound."

    def add_arguments(self, parser):
        self.add_input_argument(parser)
        self.add_output_arguments(parser)
        self.add_feasibility_argument(parser)
        parser.add_argument("--max-nodes", type=int, default=None, help="Branch-and-bound node limit.")
        parser.add_argument(
            "--brute-force", action="store_true", help="Enumerate every binary vector with the dense LP instead."
        )

    def handle(self, *args, **opts):
        instance = self.load_instance(opts["input"])
        if instance.kind is not InstanceKind.BIDM:
            raise CommandError(f"{opts['input']}: expected a 'p bidm' instance", returncode=USAGE)
        stats = {}
        try:
            if opts["brute_force"]:
                result, y = brute_force_bidm(instance)
            else:
                search = BranchAndBound(instance, opts["max_nodes"])
                result, y = search.run()
                stats = {"explored": search.explored, "pruned": search.pruned, "incumbents": search.incumbent_updates}
        except MCNFLIError as exc:
            raise self.solver_failure(exc)
        if result.status is SolveStatus.INFEASIBLE:
            self.infeasible(f"{opts['input']}: no binary vector admits a feasible flow", opts)

        data = dict(SolveResultSerializer(result, context={"instance": instance}).data)
        data["y"] = list(y) if y is not None else None
        if stats:
            data["search"] = stats
        self.emit_json(data, opts)
