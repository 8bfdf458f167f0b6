"""Counter-based random streams.

Streams are Philox4x64-10 (Salmon et al., Random123) keyed by two 64-bit
words ``(seed, stream)``. Block ``i`` of a stream is the Philox output for
counter ``(i, 0, 0, 0)``; each block yields four 64-bit words consumed in
order. Conversions:

* uniform on [0, 1):  ``(word >> 11) * 2**-53``
* standard normal:    Box-Muller on consecutive word pairs ``(a, b)`` with
  ``u1 = ((a >> 11) + 1) * 2**-53`` and ``u2 = (b >> 11) * 2**-53``, giving
  ``sqrt(-2 ln u1) cos(2 pi u2)`` then ``sqrt(-2 ln u1) sin(2 pi u2)``.

Pinned vectors (also in the test suite): key ``(0, 0)`` block 0 is
``16554d9eca36314c db20fe9d672d0fdc d7e772cee186176b 7e68b68aec7ba23b``.

The ``stream`` word packs a purpose tag in its high 32 bits and an index
in the low 32 bits, see :func:`stream_id`.
"""

import numpy as np

TAG_FOURIER = 1
TAG_NOISE = 2
TAG_PROPERTY = 3

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def stream_id(tag, index):
    if not (0 <= tag < 1 << 32 and 0 <= index < 1 << 32):
        raise ValueError("tag and index must fit in 32 bits")
    return (tag << 32) | index


class CounterStream:
    """A reproducible stream addressed by ``(seed, stream)``.

    Draws always start from block 0, so two streams built from the same key
    produce identical values regardless of what else the program has drawn.
    """

    def __init__(self, seed, stream=0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64

    def raw(self, n):
        """First ``n`` 64-bit words of the stream."""
        nblocks = -(-n // 4)
        # numpy's Philox advances the counter before producing a block
        # explicit uint64 arrays: mixed Python ints would round-trip through float
        bg = np.random.Philox(counter=np.full(4, _MASK64, dtype=np.uint64),
                              key=np.array([self.seed, self.stream], dtype=np.uint64))
        return bg.random_raw(nblocks * 4)[:n]

    def uniform(self, n):
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_M53

    def normal(self, n):
        words = self.raw(2 * (-(-n // 2)))
        a = words[0::2] >> np.uint64(11)
        b = words[1::2] >> np.uint64(11)
        u1 = (a.astype(np.float64) + 1.0) * _TWO_M53
        u2 = b.astype(np.float64) * _TWO_M53
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * len(a))
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:n]
