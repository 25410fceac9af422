import sys
from pathlib import Path

# allow test modules to import each other's helpers
sys.path.insert(0, str(Path(__file__).parent))
