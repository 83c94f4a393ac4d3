from ces_orlicz.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
