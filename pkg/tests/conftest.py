import sys
from pathlib import Path

# Test helpers (synth, fixture_site, protocol_suite) live next to the tests.
sys.path.insert(0, str(Path(__file__).parent))
