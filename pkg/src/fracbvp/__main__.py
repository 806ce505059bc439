import sys

from fracbvp.cli import main

sys.exit(main())
