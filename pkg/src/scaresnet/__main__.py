"""Entry point for `python -m scaresnet`."""

from scaresnet.cli import main

if __name__ == "__main__":
    main()
