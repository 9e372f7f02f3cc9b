import sys

from brainvidpy.cli.main import main

sys.exit(main())
