"""Allow ``python -m gaitscore``."""

from .cli import main

if __name__ == "__main__":
    main()
