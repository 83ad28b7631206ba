import sys

from lamm.cli import main

sys.exit(main())
