"""Allow ``python -m acmagsim``."""

import sys

from acmagsim.experiments.cli import main

sys.exit(main())
