import sys

from kalman_bench.cli import main

sys.exit(main())
