#!/usr/bin/env python3
"""Write the synthetic demo corpus used by the README walkthrough and the UI.

Usage: python scripts/make_demo_scene.py OUT_DIR [SCENE_ID]
"""
import sys
from pathlib import Path

from foodfuse.demo import write_demo_scene


def main() -> int:
    if len(sys.argv) not in (2, 3):
        print(__doc__.strip(), file=sys.stderr)
        return 1
    out = Path(sys.argv[1])
    scene_id = sys.argv[2] if len(sys.argv) == 3 else "demo"
    root = write_demo_scene(out, scene_id=scene_id)
    print(f"demo corpus written to {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
