import sys

from picotx.cli import main

sys.exit(main())
