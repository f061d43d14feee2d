import sys

from notchkin.cli import main

sys.exit(main())
