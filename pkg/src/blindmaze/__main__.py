import os
import sys

# Tiny matrices gain nothing from BLAS threading; keep runs single-threaded
# so parallel sweep cells do not thrash each other.
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

from .cli import main

sys.exit(main())
