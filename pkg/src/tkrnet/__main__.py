import sys

from tkrnet._cli import main

sys.exit(main())
