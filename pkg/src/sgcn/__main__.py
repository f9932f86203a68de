import sys

from sgcn.cli import main

sys.exit(main())
