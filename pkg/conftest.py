import pathlib
import sys

# allow running the suite from a fresh checkout without installing
sys.path.insert(0, str(pathlib.Path(__file__).parent / "src"))
