"""Efficient-verifier delegation of a two-round protocol.

The composition makes the verifier's work nearly independent of the
inner protocol's running time T.  The verifier samples a short seed s,
encrypts it, and ships a randomized encoding of the machine M that
expands s into the inner key k; the prover decodes k, answers the inner
protocol, evaluates the verification circuit C[x, e] homomorphically on
the encrypted seed, and proves it did so under a salted oracle.  The
verifier only checks the proof and decrypts one bit.

All cryptographic backends here are functionally correct stubs with no
security: the FHE scheme is transparent, the randomized encoding ships
the machine in the clear, and the SNARK is a hash binding.  They are
marked as such and exist to exercise the composition, the statement
binding, the salting discipline, and the cost asymmetry between the
parties.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .protocol import (
    OracleTable,
    SaltedOracle,
    TwoRoundFS,
    encode,
    fiat_shamir,
    parallel_repeat,
    toy_protocol,
)

ELL_S = 16          # seed length in bytes
ELL_R = 256         # fixed PRG output length in bytes
SECURITY = 16       # n_sec in bytes at desk scale
SALT_LEN = 2 * SECURITY
DEFAULT_TIME_BOUND = 4096
MACHINE_WORD = (1 << 64) - 1


class BackendFailure(Exception):
    pass


class InnerProtocolError(Exception):
    pass


class IncompleteSession(Exception):
    pass


# ---------------------------------------------------------------------------
# Register machine
#
# The machine the verifier delegates is spelled out as a tiny register
# program rather than a Python closure, so "the prover runs M" is a real
# step-counted execution.  Eight 64-bit registers, a byte memory that the
# HASH instruction fills with the PRG expansion of the machine input, and
# an output tape of integers.

_OPS = {"SETI", "MOV", "LOAD", "ADD", "XOR", "AND", "OR", "SHR", "SHL",
        "DEC", "JNZ", "HASH", "OUT", "HALT"}


def run_machine(program: tuple, inp: bytes, prg: Callable, budget: int):
    """Execute until HALT; returns (outputs, steps).  Deterministic.

    Raises BackendFailure when the step budget runs out first; callers
    use the encoding's declared time bound as the budget, so decode time
    is capped by min(T, Time(M)).
    """
    regs = [0] * 8
    mem = bytearray(ELL_R)
    out: list[int] = []
    pc = 0
    steps = 0
    while True:
        if pc < 0 or pc >= len(program):
            raise BackendFailure(f"pc {pc} outside program")
        if steps >= budget:
            raise BackendFailure(f"step budget {budget} exhausted")
        ins = program[pc]
        steps += 1
        name = ins[0]
        nxt = pc + 1
        if name == "HALT":
            return tuple(out), steps
        elif name == "SETI":
            regs[ins[1]] = ins[2] & MACHINE_WORD
        elif name == "MOV":
            regs[ins[1]] = regs[ins[2]]
        elif name == "LOAD":
            regs[ins[1]] = mem[ins[2]]
        elif name == "ADD":
            regs[ins[1]] = (regs[ins[1]] + regs[ins[2]]) & MACHINE_WORD
        elif name == "XOR":
            regs[ins[1]] ^= regs[ins[2]]
        elif name == "AND":
            regs[ins[1]] &= regs[ins[2]]
        elif name == "OR":
            regs[ins[1]] |= regs[ins[2]]
        elif name == "SHR":
            regs[ins[1]] >>= ins[2]
        elif name == "SHL":
            regs[ins[1]] = (regs[ins[1]] << ins[2]) & MACHINE_WORD
        elif name == "DEC":
            regs[ins[1]] = (regs[ins[1]] - 1) & MACHINE_WORD
        elif name == "JNZ":
            if regs[ins[1]] != 0:
                nxt = ins[2]
        elif name == "HASH":
            stream = prg(inp)
            mem[:len(stream)] = stream[:ELL_R]
        elif name == "OUT":
            out.append(regs[ins[1]])
        else:
            raise BackendFailure(f"unknown opcode {name!r}")
        pc = nxt


def key_machine(n: int, m: int, time_bound: int) -> tuple:
    """Program computing the inner keys from the seed, then idling.

    Per coordinate it reads four PRG stream bytes, builds two n-bit
    values, forces their xor to odd parity, and OUTs the pair; the busy
    loop at the end pads execution up to the declared time bound, which
    models an inner key derivation that genuinely costs T steps.
    """
    if not 1 <= n <= 16:
        raise BackendFailure(f"n={n} outside machine word loads")
    if m < 1:
        raise BackendFailure(f"m={m}")
    mask = (1 << n) - 1
    prog: list[tuple] = [("HASH",)]
    for i in range(m):
        base = 4 * i
        prog += [
            ("LOAD", 0, base), ("SHL", 0, 8), ("LOAD", 1, base + 1),
            ("OR", 0, 1), ("SETI", 7, mask), ("AND", 0, 7),
            ("LOAD", 1, base + 2), ("SHL", 1, 8), ("LOAD", 2, base + 3),
            ("OR", 1, 2), ("AND", 1, 7),
            # parity of x0 ^ x1 folds into bit 0 of r2
            ("MOV", 2, 0), ("XOR", 2, 1),
            ("MOV", 3, 2), ("SHR", 3, 8), ("XOR", 2, 3),
            ("MOV", 3, 2), ("SHR", 3, 4), ("XOR", 2, 3),
            ("MOV", 3, 2), ("SHR", 3, 2), ("XOR", 2, 3),
            ("MOV", 3, 2), ("SHR", 3, 1), ("XOR", 2, 3),
            ("SETI", 3, 1), ("AND", 2, 3),
        ]
        skip_to = len(prog) + 3
        prog += [("JNZ", 2, skip_to), ("SETI", 3, 1), ("XOR", 1, 3),
                 ("OUT", 0), ("OUT", 1)]
    base_cost = len(prog) + 4
    if time_bound < base_cost + 4:
        raise BackendFailure(
            f"time bound {time_bound} below key-derivation cost {base_cost + 4}")
    busy = max(1, (time_bound - base_cost) // 2)
    loop_at = len(prog) + 1
    prog += [("SETI", 0, busy), ("DEC", 0), ("JNZ", 0, loop_at), ("HALT",)]
    return tuple(prog)


def derive_keys(stream: bytes, n: int, m: int):
    """Reference key derivation; must agree with key_machine's output."""
    if len(stream) < 4 * m:
        raise BackendFailure("stream shorter than key material")
    mask = (1 << n) - 1
    ks = []
    for i in range(m):
        x0 = int.from_bytes(stream[4 * i:4 * i + 2], "big") & mask
        x1 = int.from_bytes(stream[4 * i + 2:4 * i + 4], "big") & mask
        if bin(x0 ^ x1).count("1") % 2 == 0:
            x1 ^= 1
        ks.append((x0, x1))
    k = tuple(ks)
    return k, k  # the toy trapdoor equals the key


# ---------------------------------------------------------------------------
# Stub backends


class Counters:
    """Per-party work units, switched by the driver between phases."""

    def __init__(self):
        self.verifier = 0
        self.prover = 0
        self.active = "verifier"

    def reset(self):
        self.verifier = 0
        self.prover = 0
        self.active = "verifier"

    def charge(self, units: int):
        setattr(self, self.active, getattr(self, self.active) + int(units))


def _prg_bytes(seed: bytes) -> bytes:
    stream = b""
    counter = 0
    while len(stream) < ELL_R:
        stream += hashlib.sha256(b"prg" + seed + counter.to_bytes(4, "big")).digest()
        counter += 1
    return stream[:ELL_R]


@dataclass(frozen=True)
class FheKey:
    tag: bytes
    secret: bool

    def serialize(self) -> bytes:
        kind = "fhe-sk" if self.secret else "fhe-pk"
        # the marker travels inside the serialized key bytes
        return encode((kind, "INSECURE-STUB", self.tag))


@dataclass(frozen=True)
class FheCiphertext:
    tag: bytes
    payload: object  # bytes or int, carried in the clear

    def serialize(self) -> bytes:
        return encode(("fhe-ct", "INSECURE-STUB", self.tag, self.payload))


class StubFhe:
    """Transparent scheme: ciphertexts carry the plaintext with a key tag."""

    def __init__(self, counters: Counters):
        self._counters = counters

    def keygen(self, rng):
        self._counters.charge(ELL_S)
        tag = rng.bytes(8)
        return FheKey(tag, False), FheKey(tag, True)

    def enc(self, pk: FheKey, msg) -> FheCiphertext:
        if pk.secret:
            raise BackendFailure("encrypting under a secret key")
        size = len(msg) if isinstance(msg, bytes) else 1
        self._counters.charge(size)
        return FheCiphertext(pk.tag, msg)

    def eval(self, pk: FheKey, circuit, ct: FheCiphertext) -> FheCiphertext:
        if ct.tag != pk.tag:
            raise BackendFailure("ciphertext under a different key")
        self._counters.charge(circuit.cost_hint)
        return FheCiphertext(pk.tag, circuit(ct.payload))

    def dec(self, sk: FheKey, ct: FheCiphertext):
        if not sk.secret:
            raise BackendFailure("decrypting with a public key")
        if ct.tag != sk.tag:
            raise BackendFailure("ciphertext under a different key")
        self._counters.charge(1)
        return ct.payload


@dataclass(frozen=True)
class ReEncodingKey:
    security: int
    ell: int
    crs_digest: bytes

    def serialize(self) -> bytes:
        return encode(("re-ek", self.security, self.ell, self.crs_digest))


@dataclass(frozen=True)
class ReEncoding:
    program: tuple
    inp: bytes
    bound: int
    crs_digest: bytes

    def serialize(self) -> bytes:
        return encode(("re-enc", self.program, self.inp, self.bound,
                       self.crs_digest))


class StubRe:
    """Randomized encoding that ships the machine in the clear.

    Encoding cost stays poly(n, log T) by construction; decode runs the
    machine under the declared step budget and is the only place the
    inner time bound is ever paid.
    """

    def __init__(self, counters: Counters, prg: Callable):
        self._counters = counters
        self._prg = prg

    def setup(self, security: int, ell: int, crs: bytes) -> ReEncodingKey:
        if security < 1 or ell < 1:
            raise BackendFailure(f"security={security}, ell={ell}")
        self._counters.charge(security + ell.bit_length())
        return ReEncodingKey(security, ell,
                             hashlib.sha256(crs).digest()[:SECURITY])

    def enc(self, ek: ReEncodingKey, machine: tuple, inp: bytes,
            time_bound: int) -> ReEncoding:
        if time_bound < 1:
            raise BackendFailure(f"time_bound={time_bound}")
        self._counters.charge(len(machine) + len(inp) + time_bound.bit_length())
        return ReEncoding(machine, inp, time_bound, ek.crs_digest)

    def dec(self, crs: bytes, encoding: ReEncoding):
        if hashlib.sha256(crs).digest()[:SECURITY] != encoding.crs_digest:
            raise BackendFailure("encoding bound to a different crs")
        out, steps = run_machine(encoding.program, encoding.inp, self._prg,
                                 budget=encoding.bound)
        self._counters.charge(steps)
        return out


@dataclass(frozen=True)
class SnarkProof:
    binding: bytes
    witness_digest: bytes
    witness: bytes  # carried for extractability checks, never re-executed

    def serialize(self) -> bytes:
        return encode(("snark", self.binding, self.witness_digest,
                       self.witness))


class StubSnark:
    """Hash binding of the statement under the salted oracle.

    The verifier recomputes the binding and the witness digest; it never
    re-runs the relation, so its cost stays independent of the inner
    time bound.  Succinctness is simulated through the counters, not by
    actual compression.
    """

    def __init__(self, counters: Counters):
        self._counters = counters

    @staticmethod
    def _key(statement: bytes) -> bytes:
        return b"bind" + hashlib.sha256(statement).digest()

    def prove(self, oracle, statement: bytes, witness: bytes) -> SnarkProof:
        # charged in 16-byte words so the proof step stays a small
        # additive term next to the T-proportional work
        self._counters.charge((len(statement) + len(witness)) // 16 + 4)
        return SnarkProof(
            binding=oracle.query(self._key(statement)),
            witness_digest=hashlib.sha256(witness).digest(),
            witness=witness,
        )

    def verify(self, oracle, statement: bytes, proof: SnarkProof) -> bool:
        self._counters.charge(len(statement))
        if oracle.query(self._key(statement)) != proof.binding:
            return False
        return hashlib.sha256(proof.witness).digest() == proof.witness_digest


@dataclass
class BackendSuite:
    """Bundle of the pluggable primitives plus shared work counters."""

    prg: Callable
    fhe: StubFhe
    re: StubRe
    snark: StubSnark
    snark_oracle: OracleTable
    salt_oracle: OracleTable
    counters: Counters

    def begin_phase(self, party: str):
        if party not in ("verifier", "prover"):
            raise BackendFailure(f"party {party!r}")
        self.counters.active = party

    def charge(self, units: int):
        self.counters.charge(units)


def make_stub_suite(oracle_seed: int = 0) -> BackendSuite:
    counters = Counters()
    return BackendSuite(
        prg=_prg_bytes,
        fhe=StubFhe(counters),
        re=StubRe(counters, _prg_bytes),
        snark=StubSnark(counters),
        snark_oracle=OracleTable(oracle_seed ^ 0x5A17ED, 256),
        salt_oracle=OracleTable(oracle_seed ^ 0xC0FFEE, 256),
        counters=counters,
    )


# ---------------------------------------------------------------------------
# Inner protocol adapter
#
# The composition consumes a two-round protocol (P = P2, V = (V1, V_out))
# whose V1 randomness comes from an explicit byte stream, so the
# delegated machine and the verification circuit can re-derive the same
# keys from the same seed.


@dataclass(frozen=True)
class TwoRoundInner:
    name: str
    n: int
    m: int
    fs: TwoRoundFS
    key_length: int  # bytes; upper bound on the encoded key size

    def v1_from_stream(self, stream: bytes):
        return derive_keys(stream, self.n, self.m)

    def machine(self, time_bound: int) -> tuple:
        return key_machine(self.n, self.m, time_bound)

    def parse_key(self, flat: tuple):
        if len(flat) != 2 * self.m:
            raise InnerProtocolError(f"decoded {len(flat)} key words")
        return tuple((int(flat[2 * i]), int(flat[2 * i + 1]))
                     for i in range(self.m))

    def p2(self, x, k, rng):
        y, a = self.fs.prove(x, k, rng)
        return (y, a)

    def rejecting_response(self, x, k, rng):
        y, _ = self.fs.prove(x, k, rng)
        return (y, tuple(("had", 0, 0) for _ in range(self.m)))

    def v_out(self, x, k, td, e) -> bool:
        y, a = e
        return self.fs.verify(x, k, td, y, a)


def toy_inner(num_qubits: int, m: int, fs_seed: int = 7) -> TwoRoundInner:
    """Fiat-Shamir collapse of the m-fold repeated toy protocol."""
    if not 1 <= num_qubits <= 16:
        raise InnerProtocolError(f"num_qubits={num_qubits}")
    base = toy_protocol(num_qubits)
    rep = parallel_repeat(base, m)
    fs = fiat_shamir(rep, OracleTable(fs_seed, m))
    mask = (1 << num_qubits) - 1
    key_length = len(encode(((mask, mask),) * m))
    return TwoRoundInner(name=f"fs-toy[{num_qubits}]^{m}", n=num_qubits,
                         m=m, fs=fs, key_length=key_length)


# ---------------------------------------------------------------------------
# Verification circuit


@dataclass(frozen=True)
class VerificationCircuit:
    """C[x, e](s) = 1 iff the inner verifier accepts e under keys from s."""

    x: object
    e: object
    inner: TwoRoundInner
    prg: Callable
    time_bound: int

    @property
    def cost_hint(self) -> int:
        # evaluating C re-derives the keys, which costs the same T the
        # delegated machine pays; the stub charges it to whoever evals
        return self.time_bound

    def __call__(self, s: bytes) -> int:
        k, td = self.inner.v1_from_stream(self.prg(s))
        return 1 if self.inner.v_out(self.x, k, td, self.e) else 0


# ---------------------------------------------------------------------------
# Sessions


@dataclass
class EffSession:
    x: object
    time_bound: int
    s: bytes | None = None
    pk_fhe: FheKey | None = None
    sk_fhe: FheKey | None = None
    ct: FheCiphertext | None = None
    encoding: ReEncoding | None = None
    e: object = None
    ct_prime: FheCiphertext | None = None
    z: bytes | None = None
    proof: SnarkProof | None = None
    statement: bytes | None = None
    counters: dict = field(default_factory=dict)
    message_bytes: int = 0
    complete: bool = False

    def dump(self) -> dict:
        """JSON-ready view: every message hex-encoded, plus the costs."""
        report = cost_report(self)
        return {
            "x": repr(self.x),
            "time_bound": self.time_bound,
            "seed_s": self.s.hex(),
            "pk_fhe": self.pk_fhe.serialize().hex(),
            "ct": self.ct.serialize().hex(),
            "encoding": self.encoding.serialize().hex(),
            "ct_prime": self.ct_prime.serialize().hex(),
            "salt": self.z.hex(),
            "proof": self.proof.serialize().hex(),
            "statement": self.statement.hex(),
            "cost": {
                "verifier_ops": report.verifier_ops,
                "prover_ops": report.prover_ops,
                "message_bytes": report.message_bytes,
            },
        }


@dataclass(frozen=True)
class CostReport:
    verifier_ops: int
    prover_ops: int
    message_bytes: int


def cost_report(session: EffSession) -> CostReport:
    if not session.complete:
        raise IncompleteSession("session did not finish the message flow")
    return CostReport(
        verifier_ops=session.counters["verifier"],
        prover_ops=session.counters["prover"],
        message_bytes=session.message_bytes,
    )


def setup_eff(security: int, ell: int, rng, suite: BackendSuite | None = None):
    """Sample a uniform crs and derive the encoder key from it.

    Returns (crs_prover, crs_verifier): the prover's share is the raw
    crs used for decoding, the verifier's is the encoding key.
    """
    if security < 1:
        raise BackendFailure(f"security={security}")
    if suite is None:
        suite = make_stub_suite(0)
    crs = rng.bytes(security)
    ek = suite.re.setup(security, ell, crs)
    return crs, ek


_PROVER_MODES = ("honest", "mismatched-statement", "rejecting-e")


def _statement(x, pk: FheKey, ct: FheCiphertext,
               ct_prime: FheCiphertext) -> bytes:
    # the proved statement is exactly the session's public transcript
    return encode((x, pk.serialize(), ct.serialize(), ct_prime.serialize()))


def _run_session(suite: BackendSuite, inner: TwoRoundInner, x, prover,
                 seed: int, time_bound: int, derive_salt: bool):
    if prover not in _PROVER_MODES:
        raise InnerProtocolError(f"unknown prover mode {prover!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ses = EffSession(x=x, time_bound=time_bound)
    suite.counters.reset()

    # V_eff,1: seed, keys, encrypted seed, delegated key machine
    suite.begin_phase("verifier")
    ses.s = rng.bytes(ELL_S)
    crs_prover, ek = setup_eff(SECURITY, inner.key_length, rng, suite)
    ses.pk_fhe, ses.sk_fhe = suite.fhe.keygen(rng)
    ses.ct = suite.fhe.enc(ses.pk_fhe, ses.s)
    ses.encoding = suite.re.enc(ek, inner.machine(time_bound), ses.s,
                                time_bound)
    ses.message_bytes += (len(ses.encoding.serialize())
                          + len(ses.pk_fhe.serialize())
                          + len(ses.ct.serialize()))

    # P_eff,2: decode keys, answer the inner protocol, evaluate C[x, e]
    suite.begin_phase("prover")
    k = inner.parse_key(suite.re.dec(crs_prover, ses.encoding))
    if prover == "rejecting-e":
        ses.e = inner.rejecting_response(x, k, rng)
    else:
        ses.e = inner.p2(x, k, rng)
    circuit = VerificationCircuit(x=x, e=ses.e, inner=inner, prg=suite.prg,
                                  time_bound=time_bound)
    honest_ct_prime = suite.fhe.eval(ses.pk_fhe, circuit, ses.ct)
    if prover == "mismatched-statement":
        # proof will bind the honest statement, but something else ships
        ses.ct_prime = suite.fhe.enc(ses.pk_fhe, 0)
        proof_statement = _statement(x, ses.pk_fhe, ses.ct, honest_ct_prime)
    else:
        ses.ct_prime = honest_ct_prime
        proof_statement = _statement(x, ses.pk_fhe, ses.ct, ses.ct_prime)
    ses.message_bytes += len(ses.ct_prime.serialize())

    # V_eff,3: the salt, fresh or derived from the received ct'
    suite.begin_phase("verifier")
    if derive_salt:
        ses.z = suite.salt_oracle.query(ses.ct_prime.serialize())
    else:
        ses.z = rng.bytes(SALT_LEN)
    suite.charge(SALT_LEN)
    ses.message_bytes += SALT_LEN

    # P_eff,4: proof under the salted oracle
    suite.begin_phase("prover")
    ses.proof = suite.snark.prove(suite.snark_oracle.salted(ses.z),
                                  proof_statement, encode(ses.e))
    ses.message_bytes += len(ses.proof.serialize())

    # V_eff,out: proof check and one decryption
    suite.begin_phase("verifier")
    ses.statement = _statement(x, ses.pk_fhe, ses.ct, ses.ct_prime)
    ok_proof = suite.snark.verify(suite.snark_oracle.salted(ses.z),
                                  ses.statement, ses.proof)
    ok_dec = suite.fhe.dec(ses.sk_fhe, ses.ct_prime) == 1
    verdict = ok_proof and ok_dec

    ses.counters = {"verifier": suite.counters.verifier,
                    "prover": suite.counters.prover}
    ses.complete = True
    return verdict, ses


def run_four_round(suite: BackendSuite, inner: TwoRoundInner, x,
                   prover: str = "honest", seed: int = 0,
                   time_bound: int = DEFAULT_TIME_BOUND):
    """Interactive flow: the salt is a fresh verifier coin."""
    return _run_session(suite, inner, x, prover, seed, time_bound,
                        derive_salt=False)


def run_two_round_fs(suite: BackendSuite, inner: TwoRoundInner, x,
                     prover: str = "honest", seed: int = 0,
                     time_bound: int = DEFAULT_TIME_BOUND):
    """Collapsed flow: the salt is the oracle's view of ct'."""
    return _run_session(suite, inner, x, prover, seed, time_bound,
                        derive_salt=True)
