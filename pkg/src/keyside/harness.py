"""Timestamp-server collection pipeline: mock server, client, simulator.

A toy timestamp authority signs 32-byte digests over a length-framed
byte protocol, with response latency injected from the parametric
timing model of the path its key's encoding dispatches to. The client
measures wall-clock request latency the way a network attacker would
(late final request byte, response read to completion) and records
(r, s, h, latency) rows; the in-process simulator produces the same
dataset shape without sockets, plus the ground-truth nonces for
assertions. Datasets round-trip through CSV so externally published
collections can replay against the lattice pipeline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from . import der, ecgroup, keyfmt, pathmodel
from .sidechannel import TimedSignature

logger = logging.getLogger(__name__)

# abstract model time units per second of real sleep; the model's
# per-signature means sit near 800 units, so the default keeps a
# collection of a few hundred samples under a minute of wall clock
DEFAULT_UNIT_SECONDS = 2e-5

_FRAME_HEADER = 4
_DIGEST_LEN = 32


class HarnessError(ValueError):
    """Base class for collection-pipeline failures."""


class BindError(HarnessError):
    """The requested endpoint cannot be bound."""


class MalformedRequest(HarnessError):
    """A request frame violated the protocol; the connection is dropped."""


class ParseError(HarnessError):
    """A dataset file row failed to parse; carries the row number."""


def key_fingerprint(public: Tuple[int, int]) -> str:
    """Short stable identifier for a public point, format-independent."""
    digest = hashlib.sha256(f"{public[0]}:{public[1]}".encode()).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class DatasetMeta:
    """Collection provenance: curve, key identity, noise, mode, seed.

    Fields are optional where a mode cannot know them (a network client
    does not learn the server's public key from the wire protocol).
    """

    curve: Optional[str] = None
    public: Optional[Tuple[int, int]] = None
    sigma: Optional[float] = None
    mode: str = "simulate"
    seed: Optional[int] = None

    @property
    def fingerprint(self) -> Optional[str]:
        return None if self.public is None else key_fingerprint(self.public)


@dataclass(frozen=True)
class Dataset:
    """Ordered timing records plus their collection metadata."""

    records: Tuple[TimedSignature, ...]
    meta: DatasetMeta

    def __len__(self) -> int:
        return len(self.records)

    def verify_signatures(self, curve: Optional[ecgroup.Curve] = None) -> bool:
        """Every record verifies against the recorded public key."""
        if curve is None:
            if self.meta.curve is None:
                raise ValueError("dataset metadata lacks a curve name")
            curve = ecgroup.curve_by_name(self.meta.curve)
        if self.meta.public is None:
            raise ValueError("dataset metadata lacks a public key")
        point = ecgroup.CurvePoint(*self.meta.public)
        return all(
            ecgroup.ecdsa_verify(
                curve, ecgroup.EcdsaSignature(rec.r, rec.s, rec.h), point)
            for rec in self.records)


def _canonical_name(curve: ecgroup.Curve) -> str:
    """Registry name for the curve's parameters, even when they arrived
    as explicit domain values; the dataset records curve identity, the
    dispatch path records how the key spelled it."""
    match = ecgroup.match_explicit_params(
        curve.p, curve.a, curve.b, curve.gx, curve.gy, curve.n)
    return match.name if match is not None else curve.name


def _load_signing_key(key_bytes: bytes) -> Tuple[
        keyfmt.EcPrivateKey, ecgroup.Curve, pathmodel.DispatchPath,
        Tuple[int, int]]:
    key = keyfmt.ec_sec1_decode(key_bytes)
    if key.domain is None:
        raise ValueError("signing key carries no domain parameters")
    curve = keyfmt.domain_curve(key.domain)
    dispatch = pathmodel.classify_ec_dispatch(key)
    public = key.public or _public_tuple(curve, key.scalar)
    return key, curve, dispatch, (public[0], public[1])


# ---------------------------------------------------------------------------
# mock timestamp server
# ---------------------------------------------------------------------------


@dataclass
class ServerHandle:
    """Running server: address, key identity, dispatch, and stop switch."""

    host: str
    port: int
    curve: ecgroup.Curve
    public: Tuple[int, int]
    dispatch: pathmodel.DispatchPath
    _sock: socket.socket = field(repr=False)
    _thread: threading.Thread = field(repr=False)
    _stop: threading.Event = field(repr=False)

    @property
    def curve_name(self) -> str:
        return _canonical_name(self.curve)

    def stop(self) -> None:
        self._stop.set()
        self._sock.close()
        self._thread.join()


def _recv_exact(conn: socket.socket, count: int) -> bytes:
    chunks = []
    while count:
        piece = conn.recv(count)
        if not piece:
            raise ConnectionError("peer closed mid-frame")
        chunks.append(piece)
        count -= len(piece)
    return b"".join(chunks)


def _sign_with_model_time(curve: ecgroup.Curve, scalar: int, h: int,
                          dispatch: pathmodel.DispatchPath,
                          timing: ecgroup.TimingModel,
                          rng: random.Random) -> Tuple[ecgroup.EcdsaSignature, float]:
    """Sign per the dispatched path; returns the signature and model time.

    Both non-wNAF paths use the padded ladder: the dedicated
    implementation differs from the generic hardened ladder in constant
    factors a timing attacker cannot rank nonces by, which is the only
    property the model needs.
    """
    hardened = dispatch is not pathmodel.DispatchPath.VARIABLE_TIME_WNAF
    result = ecgroup.ecdsa_sign(curve, scalar, h, rng=rng, hardened=hardened,
                                timing=timing)
    return result.signature, result.elapsed


def serve_mock_tsa(key_bytes: bytes, endpoint: Tuple[str, int],
                   timing: ecgroup.TimingModel, rng: random.Random, *,
                   unit_seconds: float = DEFAULT_UNIT_SECONDS) -> ServerHandle:
    """Start a mock timestamp authority on ``endpoint``.

    The SEC1-encoded key is parsed once at load and its encoding decides
    the scalar-multiplication path for the server's lifetime, exactly
    the certified-side-channel trigger: explicit parameters without a
    cofactor serve signatures whose latency tracks the wNAF schedule of
    each nonce. Requests are 4-byte big-endian length frames carrying a
    32-byte digest; the response frame carries DER SEQUENCE{r, s}. Any
    other request shape drops the connection without a response. The
    server sleeps ``model elapsed * unit_seconds`` before responding and
    handles one connection at a time, since overlapping requests would
    corrupt the timing channel.
    """
    key, curve, dispatch, public = _load_signing_key(key_bytes)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind(endpoint)
    except OSError as exc:
        sock.close()
        raise BindError(f"cannot bind {endpoint[0]}:{endpoint[1]}: {exc}") from None
    sock.listen(1)
    sock.settimeout(0.1)
    host, port = sock.getsockname()
    stop = threading.Event()
    logger.info("mock TSA on %s:%d dispatch=%s", host, port, dispatch.value)

    def serve() -> None:
        while not stop.is_set():
            try:
                conn, _addr = sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                try:
                    header = _recv_exact(conn, _FRAME_HEADER)
                    length = int.from_bytes(header, "big")
                    if length != _DIGEST_LEN:
                        raise MalformedRequest(f"digest length {length}")
                    digest = _recv_exact(conn, length)
                except (ConnectionError, MalformedRequest) as exc:
                    logger.warning("dropped request: %s", exc)
                    continue
                h = int.from_bytes(digest, "big") % curve.n
                sig, elapsed = _sign_with_model_time(
                    curve, key.scalar, h, dispatch, timing, rng)
                time.sleep(elapsed * unit_seconds)
                body = der.der_encode(der.Sequence(
                    (der.Integer(sig.r), der.Integer(sig.s))))
                try:
                    conn.sendall(len(body).to_bytes(_FRAME_HEADER, "big") + body)
                except OSError as exc:
                    logger.warning("response failed: %s", exc)

    thread = threading.Thread(target=serve, name="mock-tsa", daemon=True)
    thread.start()
    return ServerHandle(host=host, port=port, curve=curve, public=public,
                        dispatch=dispatch, _sock=sock, _thread=thread,
                        _stop=stop)


def _public_tuple(curve: ecgroup.Curve, scalar: int) -> Tuple[int, int]:
    point = ecgroup.derive_public(curve, scalar)
    return (point.x, point.y)


# ---------------------------------------------------------------------------
# measuring client
# ---------------------------------------------------------------------------


def collect_timings(endpoint: Tuple[str, int], count: int,
                    digests: Iterable[bytes], *,
                    curve: Optional[str] = None,
                    public: Optional[Tuple[int, int]] = None,
                    seed: Optional[int] = None,
                    timeout: float = 10.0) -> Dataset:
    """Measure ``count`` request latencies against a running server.

    Per sample: connect, send every request byte except the last, start
    the clock, send the last byte, read the response frame to the final
    signature byte, stop the clock, parse DER SEQUENCE{r, s}, and record
    (r, s, digest-as-integer, nanoseconds). Holding the last byte back
    keeps request transmission out of the measured window; reading to
    completion keeps the whole signing delay inside it. Failed samples
    are logged and skipped, never silently dropped.
    """
    digest_iter = iter(digests)
    records: List[TimedSignature] = []
    for index in range(count):
        digest = next(digest_iter)
        if len(digest) != _DIGEST_LEN:
            raise ValueError(f"digest {index} must be {_DIGEST_LEN} bytes")
        frame = len(digest).to_bytes(_FRAME_HEADER, "big") + digest
        try:
            with socket.create_connection(endpoint, timeout=timeout) as conn:
                conn.sendall(frame[:-1])
                started = time.perf_counter_ns()
                conn.sendall(frame[-1:])
                header = _recv_exact(conn, _FRAME_HEADER)
                body = _recv_exact(conn, int.from_bytes(header, "big"))
                stopped = time.perf_counter_ns()
        except (ConnectionError, OSError) as exc:
            logger.warning("sample %d skipped: %s", index, exc)
            continue
        node = der.der_decode(body)
        if not isinstance(node, der.Sequence) or len(node.children) != 2:
            logger.warning("sample %d skipped: malformed signature", index)
            continue
        r_node, s_node = node.children
        records.append(TimedSignature(
            r=r_node.value, s=s_node.value,
            h=int.from_bytes(digest, "big"),
            latency=stopped - started))
    meta = DatasetMeta(curve=curve, public=public, sigma=None,
                       mode="network", seed=seed)
    return Dataset(tuple(records), meta)


# ---------------------------------------------------------------------------
# in-process simulation
# ---------------------------------------------------------------------------


def simulate_collection(key_bytes: bytes, count: int,
                        timing: ecgroup.TimingModel, rng: random.Random, *,
                        seed: Optional[int] = None,
                        ) -> Tuple[Dataset, Tuple[int, ...]]:
    """Socket-free collection: the same records a server run would yield.

    The key's encoding picks the dispatch path exactly as in
    ``serve_mock_tsa``; latency is the model time plus the model's
    Gaussian noise, stored in milli-units so sub-unit noise survives the
    integer latency field. Returns the dataset and the ground-truth
    nonce ledger, which exists for assertions and leak-model checks
    only: a real collection never sees it.
    """
    key, curve, dispatch, public = _load_signing_key(key_bytes)
    records: List[TimedSignature] = []
    nonces: List[int] = []
    for _ in range(count):
        h = rng.getrandbits(_DIGEST_LEN * 8) % curve.n
        sig, elapsed = _sign_with_model_time(
            curve, key.scalar, h, dispatch, timing, rng)
        records.append(TimedSignature(
            r=sig.r, s=sig.s, h=sig.h, latency=round(elapsed * 1000)))
        nonces.append(_last_nonce_of(curve, key.scalar, sig))
    meta = DatasetMeta(curve=_canonical_name(curve), public=public,
                       sigma=timing.sigma, mode="simulate", seed=seed)
    return Dataset(tuple(records), meta), tuple(nonces)


def _last_nonce_of(curve: ecgroup.Curve, scalar: int,
                   sig: ecgroup.EcdsaSignature) -> int:
    """Recover k = (h + alpha*r)/s mod n; the signing identity makes the
    ledger independent of signing internals."""
    return (sig.h + scalar * sig.r) * pow(sig.s, -1, curve.n) % curve.n


# ---------------------------------------------------------------------------
# dataset serialization
# ---------------------------------------------------------------------------

_COLUMNS = "r,s,h,latency"


def dataset_to_csv(dataset: Dataset) -> str:
    """CSV with hex signature fields and integer latency; metadata rides
    in a leading comment line so external consumers can ignore it."""
    meta = dataset.meta
    head = {
        "curve": meta.curve,
        "public": list(meta.public) if meta.public else None,
        "sigma": meta.sigma,
        "mode": meta.mode,
        "seed": meta.seed,
    }
    lines = ["# " + json.dumps(head, sort_keys=True), _COLUMNS]
    for rec in dataset.records:
        lines.append(f"{rec.r:x},{rec.s:x},{rec.h:x},{rec.latency}")
    return "\n".join(lines) + "\n"


def dataset_from_csv(text: str) -> Dataset:
    """Parse our CSV or any external dataset with the same column shape.

    Comment lines and a leading header row are skipped; rows must be
    r_hex, s_hex, h_hex, latency_integer. Raises ParseError naming the
    first offending row.
    """
    meta = DatasetMeta(mode="imported")
    records: List[TimedSignature] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            payload = line[1:].strip()
            try:
                head = json.loads(payload)
                meta = DatasetMeta(
                    curve=head.get("curve"),
                    public=tuple(head["public"]) if head.get("public") else None,
                    sigma=head.get("sigma"),
                    mode=head.get("mode", "imported"),
                    seed=head.get("seed"))
            except (json.JSONDecodeError, TypeError, KeyError):
                pass  # foreign comment, not our metadata
            continue
        if line.lower().replace(" ", "") == _COLUMNS:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"row {number}: expected 4 fields, got {len(parts)}")
        try:
            records.append(TimedSignature(
                r=int(parts[0], 16), s=int(parts[1], 16), h=int(parts[2], 16),
                latency=int(parts[3])))
        except ValueError:
            raise ParseError(f"row {number}: malformed field") from None
    return Dataset(tuple(records), meta)


def save_dataset(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write(dataset_to_csv(dataset))


def load_dataset(path: str) -> Dataset:
    with open(path, "r", encoding="ascii") as handle:
        return dataset_from_csv(handle.read())
