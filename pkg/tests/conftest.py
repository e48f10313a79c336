import os
from pathlib import Path

# keep index-table caches inside the repo so repeated test runs reuse them
os.environ.setdefault(
    "KGBANDITS_TABLE_DIR", str(Path(__file__).resolve().parent.parent / "var" / "index_tables")
)
