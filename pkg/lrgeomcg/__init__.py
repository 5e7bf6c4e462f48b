"""
lrgeomcg - Low-rank matrix completion by Riemannian conjugate gradients
Main application package
"""

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def create_cli():
    """Application factory: the CLI with every command registered"""
    from lrgeomcg.cli import CLI
    from lrgeomcg.cli.commands.generate import generate_command
    from lrgeomcg.cli.commands.solve import solve_command
    from lrgeomcg.cli.commands.bench import bench_command
    from lrgeomcg.cli.commands.rho import rho_command

    cli = CLI()
    cli.register(generate_command)
    cli.register(solve_command)
    cli.register(bench_command)
    cli.register(rho_command)

    return cli
