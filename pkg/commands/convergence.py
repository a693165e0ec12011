"""
Refinement study over a structured mesh family.
"""
from brinkman.verification import convergence_study

from .base import BrinkmanCommand, EXIT_OK


class ConvergenceCommand(BrinkmanCommand):
    """Run a convergence study and save the error table as CSV and markdown."""

    @property
    def command_name(self) -> str:
        return "convergence"

    def execute(self) -> int:
        study = self.config.study()
        self.log(f"Study: case={study.case}, k={study.degree}, family={study.family}, "
                 f"n={', '.join(str(n) for n in study.sizes())}, mu={study.mu:g}, a*={study.a_star:g}")

        table = convergence_study(study)

        stem = f"convergence_{study.case}_k{study.degree}_{study.family}"
        csv_path = self.output_path(f"{stem}.csv")
        markdown_path = csv_path.with_suffix(".md")
        table.write(csv_path, markdown_path)

        if not self.quiet:
            print()
            print(table.to_markdown())
        self.log(f"Saved {csv_path} and {markdown_path}")
        return EXIT_OK
