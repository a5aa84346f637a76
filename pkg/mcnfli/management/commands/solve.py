import io

import pandas as pd

from mcnfli.exceptions import MCNFLIError
from mcnfli.management.base import SolverCommand
from mcnfli.serializers import SolveResultSerializer
from mcnfli.simplex import SolveStatus, solve


class Command(SolverCommand):
    help = "Solve the linear interdependence model (BIDM inputs are read through their relaxation)."

    def add_arguments(self, parser):
        self.add_input_argument(parser)
        self.add_output_arguments(parser, formats=("json", "csv"))
        self.add_solver_arguments(parser)
        self.add_feasibility_argument(parser)
        parser.add_argument(
            "--check-invariants", action="store_true", help="Re-verify basis and flow invariants after every pivot."
        )

    def handle(self, *args, **opts):
        instance = self.load_instance(opts["input"])
        try:
            result = solve(
                instance,
                rule=opts["rule"],
                use_dhat=opts["use_dhat"],
                check_invariants=opts["check_invariants"],
            )
        except MCNFLIError as exc:
            raise self.solver_failure(exc)
        if result.status is SolveStatus.INFEASIBLE:
            self.infeasible(f"{opts['input']}: no feasible flow", opts)

        data = SolveResultSerializer(result, context={"instance": instance}).data
        if opts["format"] == "csv":
            buf = io.StringIO()
            pd.DataFrame(data["flows"]).to_csv(buf, index=False)
            self.emit(buf.getvalue(), opts)
        else:
            self.emit_json(data, opts)
