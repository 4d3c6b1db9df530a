import sys

from sparsegrasp.cli import main

sys.exit(main())
