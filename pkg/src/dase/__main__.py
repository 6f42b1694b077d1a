from dase.cli import main
import sys

sys.exit(main())
