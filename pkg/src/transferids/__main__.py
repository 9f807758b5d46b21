import sys

from transferids.harness.cli import main

sys.exit(main())
