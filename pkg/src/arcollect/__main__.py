import sys

from arcollect.cli import main

sys.exit(main())
