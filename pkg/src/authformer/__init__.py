__version__ = "0.1.0"


def main() -> None:
    from authformer.cli import main as cli_main

    raise SystemExit(cli_main())
