import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

# fixed example streams: the same cases run every time
settings.register_profile("repro", derandomize=True, database=None, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))
