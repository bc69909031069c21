"""Run the EasyUQ command line with `python -m easyuq`."""
import sys

from .cli import main

sys.exit(main())
