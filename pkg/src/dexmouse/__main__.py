"""``python -m dexmouse`` entry point."""

from dexmouse.cli import main

main()
