import sys

from heraklit.cli import main

sys.exit(main())
