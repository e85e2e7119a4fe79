import os
from pathlib import Path

# reference solutions ship with the repository; point the cache there so
# the suite works from any working directory
os.environ.setdefault("SOLHEAT_CACHE_DIR",
                      str(Path(__file__).resolve().parent.parent / "refcache"))
