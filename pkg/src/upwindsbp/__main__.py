import sys

from upwindsbp.cli import main

sys.exit(main())
