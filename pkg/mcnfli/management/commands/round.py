from django.core.management.base import CommandError

from mcnfli.approx import RoundingFamily, RoundingScheme, randomized_round, solve_bidm
from mcnfli.conf import solver_setting
from mcnfli.exceptions import ConfigurationError, MCNFLIError
from mcnfli.instance import InstanceKind
from mcnfli.management.base import USAGE, SolverCommand
from mcnfli.serializers import RoundingOutcomeSerializer


class Command(SolverCommand):
    help = "Round the linear relaxation of a BIDM instance with one randomized scheme."

    def add_arguments(self, parser):
        self.add_input_argument(parser)
        self.add_output_arguments(parser)
        parser.add_argument("--scheme", choices=[f.value for f in RoundingFamily], default="child")
        parser.add_argument("--epsilon", type=float, default=0.0)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--max-attempts", type=int, default=None)
        parser.add_argument(
            "--with-reference",
            action="store_true",
            help="Also solve the exact model and report the relative error against it.",
        )

    def handle(self, *args, **opts):
        instance = self.load_instance(opts["input"])
        if instance.kind is not InstanceKind.BIDM:
            raise CommandError(f"{opts['input']}: expected a 'p bidm' instance", returncode=USAGE)
        try:
            scheme = RoundingScheme(
                opts["scheme"],
                opts["epsilon"],
                opts["max_attempts"] or int(solver_setting("MAX_ATTEMPTS")),
                opts["seed"],
            )
        except ConfigurationError as exc:
            raise CommandError(str(exc), returncode=USAGE)

        try:
            reference = None
            if opts["with_reference"]:
                exact, _ = solve_bidm(instance)
                reference = exact.objective if exact.optimal else None
            outcome = randomized_round(instance, scheme, reference=reference)
        except MCNFLIError as exc:
            raise self.solver_failure(exc)
        self.emit_json(RoundingOutcomeSerializer(outcome).data, opts)
