"""patchlab: exploit-driven validation of smart contract patches.

The pipeline takes a corpus of vulnerable contracts, candidate patches
produced by repair tools, detector reports, and hand-written exploit
scenarios, then classifies every patch by compiling it, diffing it against
the original, replaying benign functional checks, and finally replaying the
real exploit on an embedded EVM.
"""

__version__ = "0.1.0"
