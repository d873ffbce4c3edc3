# [file name]: main.py
"""
Main entry point for the atomsense simulator.
Usage: python main.py <subcommand> [options]
"""
import sys

from atomsense.cli import main as cli_main


def main():
    """Application entry point."""
    try:
        return_code = cli_main(sys.argv[1:])
        sys.exit(return_code)
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        sys.exit(130)


if __name__ == '__main__':
    main()
