from dataclasses import replace

from mcnfli.harness import run_trials, spearman, write_outputs
from mcnfli.management.base import SolverCommand
from mcnfli.serializers import BenchConfigSerializer


class Command(SolverCommand):
    help = "Run trial groups (exact, relaxation, rounding schemes) and write CSV/JSON/TSV tables."

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="JSON file describing trial groups and schemes.")
        parser.add_argument("--output", required=True, help="Directory for result files.")
        parser.add_argument("--trials", type=int, default=None, help="Override the trial count of every group.")
        parser.add_argument("--seed", type=int, default=None, help="Override the master seed.")
        parser.add_argument("--workers", type=int, default=None, help="Worker processes.")

    def handle(self, *args, **opts):
        config = self.validated(BenchConfigSerializer(data=self.load_json(opts["config"])), opts["config"])
        if opts["trials"]:
            config.groups = [replace(group, trials=opts["trials"]) for group in config.groups]
        if opts["seed"] is not None:
            config.seed = opts["seed"]
        if opts["workers"]:
            config.workers = opts["workers"]

        records, summaries = run_trials(config)
        written = write_outputs(records, summaries, opts["output"])

        for summary in summaries:
            self.stdout.write(
                f"{summary.group}: {summary.completed}/{summary.trials} trials, "
                f"LP error mean {summary.lp_error_mean:.4g}"
            )
        by_family = {}
        for summary in summaries:
            by_family.setdefault((summary.mode, summary.nodes, summary.arcs_per_node), []).append(summary)
        for (mode, nodes, _), group in by_family.items():
            if len(group) >= 3:
                rho = spearman([s.density for s in group], [s.lp_error_mean for s in group])
                self.stdout.write(f"{mode}-n{nodes}: LP error vs density rank correlation {rho:.3f}")
        failed = sum(1 for record in records if record.error)
        style = self.style.WARNING if failed else self.style.SUCCESS
        self.stdout.write(style(f"{len(records)} trials, {failed} failed; {len(written)} files in {opts['output']}"))
