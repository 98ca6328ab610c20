"""Tour of the codec: field arithmetic, XOR coding, a random linear
generation and incremental decoding.

Run: python demos/codec_tour.py
"""

import random

import numpy as np

from ncsdn import codec
from ncsdn.codec import (DecoderState, GenerationEncoder, InsufficientRankError, SourcePacket,
                         decode_generation)

print("GF(2^8) with reduction polynomial 0x11D")
print(f"  0x02 * 0x80 = 0x{codec.mul(0x02, 0x80):02X}  (the shift overflows and is reduced)")
print(f"  inverse of 0x53 = 0x{codec.inv(0x53):02X}, check: "
      f"0x53 * 0x{codec.inv(0x53):02X} = 0x{codec.mul(0x53, codec.inv(0x53)):02X}")

a, b = b"a", b"b"
x = codec.xor_encode(a, b)
print(f"\nXOR coding: 'a' ^ 'b' = {bytes(x)!r}; anyone holding 'a' recovers "
      f"{bytes(codec.xor_encode(x, a))!r}")

rng = random.Random(7)
g = 4
sources = [SourcePacket(0, i, np.frombuffer(f"packet-{i}".encode(), dtype=np.uint8))
           for i in range(g)]
encoder = GenerationEncoder(sources, rng)
emitted = [encoder.next_packet() for _ in range(g + 2)]
print(f"\nA generation of {g} packets, {len(emitted)} emitted (systematic first):")
for p in emitted:
    print(f"  vector {p.vector}")

# a receiver that missed the first two systematic packets
state = DecoderState(0, g)
for p in emitted[2:]:
    innovative = state.insert(p)
    print(f"  received {p.vector}: innovative={innovative}, rank {state.rank}/{g}")
print("  decoded:", [bytes(s.payload).decode() for s in decode_generation(state)])

short = DecoderState(0, g)
for p in emitted[:g - 1]:
    short.insert(p)
try:
    decode_generation(short)
except InsufficientRankError as exc:
    print(f"\nWith only {g - 1} packets: {exc}")
print("\nDecoder state dump:\n" + state.dump())
