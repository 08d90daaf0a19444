"""Weakly supervised semantic parsing lab.

A non-differentiable Lisp machine over an in-memory knowledge base, a
GRU seq2seq "programmer" with a key-variable memory, and a training loop
that combines iterative maximum likelihood with augmented REINFORCE.
"""

import os

# Single-threaded BLAS keeps runs bit-reproducible and is plenty at this scale.
for _k in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_k, "1")
del _k, os
