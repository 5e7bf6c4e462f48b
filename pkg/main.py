"""
lrgeomcg - Low-rank matrix completion by Riemannian conjugate gradients
Main command-line entry point
"""

import logging
import sys

from lrgeomcg import create_cli
from lrgeomcg.config import Config

# Configure logging
logging.basicConfig(
    level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

# Create CLI
cli = create_cli()

if __name__ == '__main__':
    logger.debug(f"Available commands: {', '.join(cli.commands)}")
    sys.exit(cli.run())
