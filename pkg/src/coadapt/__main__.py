import sys

from coadapt.cli.main import main

sys.exit(main())
