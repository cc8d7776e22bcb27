import sys

from online_sampler.cli import main

if __name__ == "__main__":
    sys.exit(main())
