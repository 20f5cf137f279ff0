import sys

from hvfwi.cli import cli

if __name__ == "__main__":
    sys.exit(cli())
