"""
Salgrad - Command Line Entry Point
Saliency-guided training, gradient attacks and robustness sweeps
"""

import sys

from cli.commands import main


if __name__ == "__main__":
    sys.exit(main())
