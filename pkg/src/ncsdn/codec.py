"""Network-coding primitives over GF(2^8) and its GF(2) subfield.

Payloads are ``numpy.uint8`` arrays. Field multiplication of a whole payload
by one coefficient is a single lookup into a 256x256 product table, so the
codec stays vectorised even for large symbols.

GF(2) mode reuses the same tables: restricting coefficients to {0, 1} gives
exactly the binary field, and a coefficient of 1 acting on a payload byte is
plain XOR accumulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POLY = 0x11D
FIELDS = ("gf256", "gf2")


class FieldError(ValueError):
    pass


class InsufficientRankError(RuntimeError):
    def __init__(self, rank: int, needed: int):
        super().__init__(f"decoder rank {rank} < generation size {needed}")
        self.rank = rank
        self.needed = needed


def _carryless_mul(a: int, b: int, poly: int = POLY) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= poly
    return r


def _build_tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = _carryless_mul(x, 2)
    exp[255:510] = exp[0:255]
    # 0x02 generates the multiplicative group mod 0x11D
    assert x == 1
    mul = exp[(log[:, None] + log[None, :])].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[1:]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build_tables()


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise FieldError("zero has no multiplicative inverse")
    return int(INV[a])


def div(a: int, b: int) -> int:
    return mul(a, inv(b))


def _check_field(name: str) -> None:
    if name not in FIELDS:
        raise FieldError(f"unknown field {name!r}; expected one of {FIELDS}")


def as_payload(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return data.astype(np.uint8, copy=False)
    return np.frombuffer(bytes(data), dtype=np.uint8).copy()


def xor_encode(a, b) -> np.ndarray:
    """Bytewise XOR of two equal-length payloads."""
    a = as_payload(a)
    b = as_payload(b)
    if a.shape != b.shape:
        raise ValueError(f"payload length mismatch: {a.size} != {b.size}")
    return a ^ b


@dataclass(frozen=True)
class SourcePacket:
    generation_id: int
    index: int
    payload: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, SourcePacket):
            return NotImplemented
        return (self.generation_id == other.generation_id and self.index == other.index
                and np.array_equal(self.payload, other.payload))

    __hash__ = None


@dataclass(frozen=True)
class CodedPacket:
    generation_id: int
    vector: tuple
    payload: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, CodedPacket):
            return NotImplemented
        return (self.generation_id == other.generation_id and self.vector == other.vector
                and np.array_equal(self.payload, other.payload))

    __hash__ = None

    @property
    def size(self) -> int:
        return len(self.vector)


def unit_vector(i: int, g: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(g))


def linear_combination(coeffs: Sequence[int], rows: Sequence[np.ndarray]) -> np.ndarray:
    """Field sum of ``coeffs[i] * rows[i]``; rows must share one length."""
    if len(coeffs) != len(rows):
        raise ValueError(f"{len(coeffs)} coefficients for {len(rows)} rows")
    if not rows:
        raise ValueError("empty combination")
    size = rows[0].size
    out = np.zeros(size, dtype=np.uint8)
    for c, row in zip(coeffs, rows):
        if row.size != size:
            raise ValueError(f"payload length mismatch: {row.size} != {size}")
        if c == 0:
            continue
        if c == 1:
            out ^= row
        else:
            out ^= MUL[c][row]
    return out


def encode_generation(sources: Sequence[SourcePacket], vector: Sequence[int]) -> CodedPacket:
    g = len(sources)
    if len(vector) != g:
        raise ValueError(f"coding vector has length {len(vector)}, generation has {g} packets")
    gens = {s.generation_id for s in sources}
    if len(gens) != 1:
        raise ValueError(f"sources span generations {sorted(gens)}")
    ordered = sorted(sources, key=lambda s: s.index)
    if [s.index for s in ordered] != list(range(g)):
        raise ValueError("source indices must be exactly 0..g-1")
    vec = tuple(int(c) for c in vector)
    if any(c < 0 or c > 255 for c in vec):
        raise FieldError(f"coefficient out of GF(256) range in {vec}")
    payload = linear_combination(vec, [s.payload for s in ordered])
    return CodedPacket(ordered[0].generation_id, vec, payload)


def recode(inputs: Sequence[CodedPacket], weights: Sequence[int]) -> CodedPacket:
    """Combine already-coded packets without decoding them."""
    if not inputs:
        raise ValueError("recode needs at least one input")
    if len(weights) != len(inputs):
        raise ValueError(f"{len(weights)} weights for {len(inputs)} inputs")
    gen = inputs[0].generation_id
    if any(p.generation_id != gen for p in inputs):
        raise ValueError("cannot recode packets from different generations")
    g = inputs[0].size
    if any(p.size != g for p in inputs):
        raise ValueError("inputs carry coding vectors of different lengths")
    vecs = [np.asarray(p.vector, dtype=np.uint8) for p in inputs]
    vector = linear_combination(weights, vecs)
    payload = linear_combination(weights, [p.payload for p in inputs])
    return CodedPacket(gen, tuple(int(c) for c in vector), payload)


def random_coefficient(rng, field_name: str = "gf256") -> int:
    """Uniform over the nonzero elements of the chosen field."""
    if field_name == "gf2":
        return 1
    return rng.randrange(1, 256)


def random_vector(g: int, rng, field_name: str = "gf256") -> tuple:
    """GF(256): every coefficient nonzero. GF(2): uniform over the nonzero
    binary vectors (a nonzero-only GF(2) draw would always be all ones)."""
    _check_field(field_name)
    if field_name == "gf2":
        while True:
            v = tuple(rng.getrandbits(1) for _ in range(g))
            if any(v):
                return v
    return tuple(random_coefficient(rng, field_name) for _ in range(g))


class DecoderState:
    """Incrementally row-reduced basis for one generation.

    Rows are kept in reduced row echelon form, sorted by pivot column, with
    the payload rows transformed in lockstep.
    """

    def __init__(self, generation_id: int, g: int, symbol_size: int | None = None):
        if g < 1:
            raise ValueError("generation size must be >= 1")
        self.generation_id = generation_id
        self.g = g
        self.symbol_size = symbol_size
        self.pivots: list[int] = []
        self.coeffs: list[np.ndarray] = []
        self.payloads: list[np.ndarray] = []

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def complete(self) -> bool:
        return len(self.pivots) == self.g

    def copy(self) -> "DecoderState":
        other = DecoderState(self.generation_id, self.g, self.symbol_size)
        other.pivots = list(self.pivots)
        other.coeffs = [r.copy() for r in self.coeffs]
        other.payloads = [r.copy() for r in self.payloads]
        return other

    def insert(self, packet: CodedPacket) -> bool:
        """Add ``packet`` in place; return True when it raised the rank."""
        if packet.generation_id != self.generation_id:
            raise ValueError(
                f"packet from generation {packet.generation_id} offered to decoder "
                f"for generation {self.generation_id}")
        if len(packet.vector) != self.g:
            raise ValueError(f"vector length {len(packet.vector)} != generation size {self.g}")
        if self.symbol_size is None:
            self.symbol_size = packet.payload.size
        elif packet.payload.size != self.symbol_size:
            raise ValueError(f"payload length {packet.payload.size} != {self.symbol_size}")
        if self.complete:
            return False

        v = np.asarray(packet.vector, dtype=np.uint8).copy()
        p = packet.payload.astype(np.uint8, copy=True)
        for col, row, prow in zip(self.pivots, self.coeffs, self.payloads):
            c = int(v[col])
            if c:
                v ^= MUL[c][row]
                p ^= MUL[c][prow]
        nz = np.flatnonzero(v)
        if nz.size == 0:
            return False
        col = int(nz[0])
        scale = int(INV[v[col]])
        if scale != 1:
            v = MUL[scale][v]
            p = MUL[scale][p]
        # back-substitute the new pivot out of existing rows
        for i, row in enumerate(self.coeffs):
            c = int(row[col])
            if c:
                self.coeffs[i] = row ^ MUL[c][v]
                self.payloads[i] = self.payloads[i] ^ MUL[c][p]
        pos = int(np.searchsorted(self.pivots, col))
        self.pivots.insert(pos, col)
        self.coeffs.insert(pos, v)
        self.payloads.insert(pos, p)
        return True

    def dump(self) -> str:
        lines = [f"generation {self.generation_id} rank {self.rank}/{self.g}"]
        for col, row, prow in zip(self.pivots, self.coeffs, self.payloads):
            lines.append(f"  [{col}] {row.tobytes().hex()} | {prow.tobytes().hex()}")
        return "\n".join(lines)

    def __repr__(self):
        return f"DecoderState(generation_id={self.generation_id}, g={self.g}, rank={self.rank})"


def decoder_insert(state: DecoderState, packet: CodedPacket) -> tuple[bool, DecoderState]:
    """Pure form of :meth:`DecoderState.insert`: ``state`` is left untouched."""
    new = state.copy()
    innovative = new.insert(packet)
    return innovative, new


def decode_generation(state: DecoderState) -> list[SourcePacket]:
    if not state.complete:
        raise InsufficientRankError(state.rank, state.g)
    # full-rank RREF is the identity, so payload rows are the sources in order
    return [SourcePacket(state.generation_id, i, state.payloads[i].copy())
            for i in range(state.g)]


@dataclass
class GenerationEncoder:
    """Systematic-first emitter for one generation.

    The first ``g`` packets are the sources themselves; after that every
    packet is a random combination, except that in GF(2) the first repair
    packet is the parity of all sources. While the emitted set is still rank
    deficient a dependent draw is retried up to ``max_redraws`` times.
    """

    sources: list
    rng: object
    field_name: str = "gf256"
    max_redraws: int = 8
    emitted: int = 0
    _span: DecoderState | None = field(default=None, repr=False)

    def __post_init__(self):
        _check_field(self.field_name)
        self.sources = sorted(self.sources, key=lambda s: s.index)
        g = len(self.sources)
        self._span = DecoderState(self.sources[0].generation_id, g)

    def next_packet(self) -> CodedPacket:
        g = len(self.sources)
        if self.emitted < g:
            vec = unit_vector(self.emitted, g)
        elif self.emitted == g and self.field_name == "gf2":
            vec = (1,) * g
        else:
            vec = random_vector(g, self.rng, self.field_name)
            if not self._span.complete:
                for _ in range(self.max_redraws):
                    probe = CodedPacket(self._span.generation_id, vec,
                                        np.zeros(1, dtype=np.uint8))
                    if self._would_innovate(probe):
                        break
                    vec = random_vector(g, self.rng, self.field_name)
        self.emitted += 1
        pkt = encode_generation(self.sources, vec)
        if not self._span.complete:
            self._span.insert(CodedPacket(pkt.generation_id, vec, np.zeros(1, dtype=np.uint8)))
        return pkt

    def _would_innovate(self, probe: CodedPacket) -> bool:
        return self._span.copy().insert(probe)
