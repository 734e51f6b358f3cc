import sys

from zosso.bench.cli import main

sys.exit(main())
