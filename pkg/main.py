# main.py

import argparse
import logging
import sys
from typing import List, Optional

from controllers.experiment_controller import ExperimentController
from models.errors import ConfigError, DataError, InvalidArgumentError, NumericalRankError
from models.run_config import BACKENDS, VERSION, RunConfig

logger = logging.getLogger("quark")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RANK = 4

COMMANDS = {
    "generate": ("cmd_generate", "simulate the input series and write the window datasets"),
    "embed": ("cmd_embed", "compute (or reuse) reservoir features for both splits"),
    "tune": ("cmd_tune", "select the Matern kernel hyper-parameters per task"),
    "sweep-reg": ("cmd_sweep_reg", "fit the readout over the regularization grid"),
    "sweep-n": ("cmd_sweep_n", "fit the readout on growing training prefixes"),
    "bound": ("cmd_bound", "evaluate the generalization bound next to the observed gap"),
    "all": ("cmd_all", "run every stage in order"),
}


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def _workers(value: str) -> int:
    workers = int(value)
    if workers < 1:
        raise argparse.ArgumentTypeError(f"workers must be at least 1, got {value}")
    return workers


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    common.add_argument("--seed", type=_seed, help="master seed, overrides the config")
    common.add_argument("--backend", choices=BACKENDS, help="feature backend, overrides the config")
    common.add_argument("--workers", type=_workers, help="embedding worker processes")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--progress", action="store_true", default=None, help="show progress bars")
    common.add_argument("--draw-topology", action="store_true", help="render the reservoir coupling graph")
    common.add_argument("--show", action="store_true", help="print the window, audit and bound tables")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="quark", description="Quantum reservoir kernel pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig.load(args.config).with_overrides(
            seed=args.seed, backend=args.backend, workers=args.workers, output_dir=args.out, progress=args.progress)
        controller = ExperimentController(config, show=args.show)
        if args.draw_topology:
            controller.draw_topology()
        getattr(controller, COMMANDS[args.command][0])()
    except ConfigError as error:
        logger.error("Configuration error: %s", error)
        return EXIT_CONFIG
    except DataError as error:
        logger.error("Data error: %s", error)
        return EXIT_DATA
    except NumericalRankError as error:
        logger.error("Numerical rank error: %s", error)
        return EXIT_RANK
    except InvalidArgumentError as error:
        logger.error("Invalid argument: %s", error)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
