import sys

from memqkd.cli import main

sys.exit(main())
