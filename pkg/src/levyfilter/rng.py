"""Labeled, counter-based random substreams.

Every stochastic routine in the package draws from a stream derived from
one master seed plus a tuple of labels (strings or small ints).  Streams
with distinct labels are independent, and the derivation depends only on
the labels - not on creation order or thread schedule - so runs are
reproducible under any execution interleaving.

Labels in use across the package:

    ("x0",)                     initial signal state
    ("marks1",) / ("marks2",)   frozen mark samples for compensator integrals
    ("signal-jumps",)           signal-channel Poisson stream
    ("obs-candidates",)         dominating observation-channel Poisson stream
    ("obs-thinning",)           acceptance uniforms for thinning
    ("brownian",)               path Brownian increments
    ("prior",)                  particle-cloud initial sample
    ("particle-brownian",)      per-particle independent Brownian increments
    ("particle-jumps",)         per-particle signal jumps
    ("resample", node)          systematic-resampling offset at a grid node
    ("replica", i)              per-replica child seeds in multi-run drivers
"""

import zlib

import numpy as np


def _label_words(labels):
    words = []
    for lab in labels:
        if isinstance(lab, (int, np.integer)):
            words.append(int(lab) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(lab).encode("utf8")))
    return tuple(words)


def substream(master_seed, *labels):
    """Return a counter-based (Philox) generator for (master_seed, labels)."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & (2**128 - 1),
                                spawn_key=_label_words(labels))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed, *labels):
    """Collapse (master_seed, labels) into a single child seed integer."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & (2**128 - 1),
                                spawn_key=_label_words(labels))
    return int(ss.generate_state(2, np.uint64)[0])
