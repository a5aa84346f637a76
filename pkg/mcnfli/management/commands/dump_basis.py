from mcnfli.basis import build_cert, dump_cert_csv
from mcnfli.exceptions import MCNFLIError
from mcnfli.management.base import SolverCommand
from mcnfli.serializers import StartBasisSerializer
from mcnfli.simplex import SolveStatus, solve


class Command(SolverCommand):
    help = "Print D and D-hat of a basis as CSV (the optimal basis unless --start-basis is given)."

    def add_arguments(self, parser):
        self.add_input_argument(parser)
        parser.add_argument("--output", default="")
        parser.add_argument("--start-basis", default="", help="JSON basis to dump instead of the optimal one.")
        self.add_feasibility_argument(parser)

    def handle(self, *args, **opts):
        instance = self.load_instance(opts["input"])
        try:
            if opts["start_basis"]:
                serializer = StartBasisSerializer(
                    data=self.load_json(opts["start_basis"]), context={"instance": instance}
                )
                basis = self.validated(serializer, opts["start_basis"])
            else:
                result = solve(instance)
                if result.status is not SolveStatus.OPTIMAL:
                    stage = "phase-1" if result.status is SolveStatus.INFEASIBLE else "last"
                    self.infeasible(
                        f"{opts['input']}: solve ended {result.status.value}; dumping the {stage} basis, not an optimal one",
                        opts,
                    )
                basis = result.basis
            cert = build_cert(basis)
        except MCNFLIError as exc:
            raise self.solver_failure(exc)
        self.emit(dump_cert_csv(cert, basis.network), opts)
