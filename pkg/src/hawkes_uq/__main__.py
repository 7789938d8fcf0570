import sys

from hawkes_uq.cli import main

sys.exit(main())
