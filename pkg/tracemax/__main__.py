import sys

from tracemax import app


def main():
    sys.exit(app.run())


if __name__ == "__main__":
    main()
