"""Command line binding parsers, models, collectors and attacks into
reproducible experiments.

Every command is deterministic under --seed. A config file of key=value
lines supplies defaults; explicit flags win. Machine-readable output via
--json validates against the schemas shipped in keyside/schemas/.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from . import bigmath, der, ecgroup, harness, hnp, keyfmt, pathmodel
from . import sidechannel

_EXIT_OK = 0
_EXIT_FAILURE = 1
_EXIT_USAGE = 2


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment parameters; every attack report embeds one."""

    seed: Optional[int] = None
    curve: Optional[str] = None
    mode: Optional[str] = None
    c_double: Optional[float] = None
    c_add: Optional[float] = None
    base: Optional[float] = None
    sigma: Optional[float] = None
    count: Optional[int] = None
    filter_t: Optional[int] = None
    big_w: Optional[int] = None
    lattice_dim: Optional[int] = None
    jobs: Optional[int] = None
    delta: Optional[float] = None
    max_reductions: Optional[int] = None
    error_rate: Optional[float] = None

    def to_json(self) -> Dict[str, object]:
        return asdict(self)


# ---------------------------------------------------------------------------
# config file and option resolution
# ---------------------------------------------------------------------------


def read_config_file(path: str) -> Dict[str, str]:
    """key = value lines; # starts a comment; keys use flag spelling
    with - or _ interchangeably."""
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{number}: expected key = value")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args: argparse.Namespace, config: Dict[str, str],
             name: str, default, cast):
    """Flag beats config file beats built-in default."""
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    if name in config:
        return cast(config[name])
    return default


# ---------------------------------------------------------------------------
# toy key generation
# ---------------------------------------------------------------------------


def random_prime(bits: int, rng: random.Random) -> int:
    """Random probable prime with the top bit set."""
    if bits < 3:
        raise ValueError("need at least 3 bits")
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        ok, _events = bigmath.miller_rabin(candidate, rounds=24, rng=rng,
                                           consttime=True)
        if ok:
            return candidate


def toy_rsa_material(bits: int, rng: random.Random) -> keyfmt.RsaKeyMaterial:
    """Fully populated toy RSA key. The CRT residues follow the package
    convention dp = d mod p, dq = d mod q."""
    e = 65537
    while True:
        p = random_prime(bits // 2, rng)
        q = random_prime(bits - bits // 2, rng)
        if p == q:
            continue
        lam = math.lcm(p - 1, q - 1)
        if math.gcd(e, lam) != 1:
            continue
        d = pow(e, -1, lam)
        if p < q:
            p, q = q, p
        return keyfmt.RsaKeyMaterial(n=p * q, e=e, p=p, q=q, d=d,
                                     dp=d % p, dq=d % q,
                                     iq=pow(q, -1, p))


def toy_dsa_material(p_bits: int, rng: random.Random, *,
                     q_bits: int = 160,
                     with_x: bool = True) -> keyfmt.DsaKeyMaterial:
    """Toy DSA domain with a generator of order q and a private x.

    The 160-bit q matches the fixed-width private blob layout.
    """
    if p_bits <= q_bits + 8:
        raise ValueError("p must be substantially larger than q")
    while True:
        q = random_prime(q_bits, rng)
        for _ in range(4 * p_bits):
            m = rng.getrandbits(p_bits - q_bits) | (1 << (p_bits - q_bits - 1))
            p = q * (m & ~1) + 1
            if p.bit_length() != p_bits:
                continue
            ok, _events = bigmath.miller_rabin(p, rounds=24, rng=rng,
                                               consttime=True)
            if not ok:
                continue
            while True:
                h = rng.randrange(2, p - 1)
                g = pow(h, (p - 1) // q, p)
                if g > 1:
                    break
            x = rng.randrange(1, q) if with_x else None
            return keyfmt.DsaKeyMaterial(p=p, q=q, g=g, x=x)


# ---------------------------------------------------------------------------
# key file loading (format sniffing)
# ---------------------------------------------------------------------------


def load_key_file(data: bytes, password: Optional[str] = None):
    """Parse any supported key file; returns (kind, parsed, notes).

    kind is one of "ec", "rsa", "dsa"; notes accumulate container facts
    (PEM label, PVK header, blob type) for reporting.
    """
    notes: List[str] = []
    if data.lstrip().startswith(b"-----BEGIN"):
        block = der.pem_unwrap(data.decode("ascii"))
        notes.append(f"PEM label {block.label!r}")
        data = block.der
        if block.label == keyfmt.RSA_PEM_LABEL:
            return "rsa", keyfmt.rsa_pkcs1_decode(data), notes
        if block.label == keyfmt.EC_PEM_LABEL:
            return "ec", keyfmt.ec_sec1_decode(data), notes
        raise keyfmt.UnsupportedAlgorithm(f"PEM label {block.label!r}")
    if data[:1] == b"\x30":
        try:
            return "ec", keyfmt.ec_sec1_decode(data), notes
        except keyfmt.KeyFormatError:
            return "rsa", keyfmt.rsa_pkcs1_decode(data), notes
    if len(data) >= 4 and int.from_bytes(data[:4], "little") == keyfmt.PVK_MAGIC:
        info = keyfmt.pvk_file_info(data)
        notes.append(f"PVK key_type={info.key_type} "
                     f"encrypted={info.encrypted}")
        data = keyfmt.pvk_decode(data, password)
    material = keyfmt.msblob_decode(data)
    header = keyfmt.msblob_header(data)
    private = "private" if header.blob_type == 0x07 else "public"
    notes.append(f"MSBLOB {header.magic.decode('ascii')} {private} "
                 f"bitlen={header.bitlen}")
    kind = "rsa" if isinstance(material, keyfmt.RsaKeyMaterial) else "dsa"
    return kind, material, notes


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _write_output(payload: bytes, path: Optional[str], text: bool) -> None:
    if path is None or path == "-":
        if text:
            sys.stdout.write(payload.decode("ascii"))
        else:
            sys.stdout.buffer.write(payload)
        return
    with open(path, "wb") as handle:
        handle.write(payload)


def cmd_keygen(args: argparse.Namespace, config: Dict[str, str]) -> int:
    seed = _resolve(args, config, "seed", 0, int)
    rng = random.Random(seed)
    kind = args.kind
    out = _resolve(args, config, "out", None, str)
    emit_pem = bool(args.pem)

    if kind == "ec":
        fmt = args.format or "sec1"
        if fmt != "sec1":
            raise ValueError("EC keys encode as sec1")
        curve = ecgroup.curve_by_name(
            _resolve(args, config, "curve", "P-256", str))
        mode = keyfmt.Sec1Mode(_resolve(args, config, "mode", "named", str))
        scalar = rng.randrange(1, curve.n)
        point = ecgroup.derive_public(curve, scalar)
        key = keyfmt.EcPrivateKey(
            scalar, keyfmt.domain_for_curve(curve, mode), (point.x, point.y))
        blob = keyfmt.ec_sec1_encode(key, mode)
        if emit_pem:
            payload: bytes = der.pem_wrap(blob, keyfmt.EC_PEM_LABEL).encode()
        else:
            payload = blob
        _write_output(payload, out, emit_pem)
        if out and out != "-":
            print(f"wrote {kind} key ({curve.name}, {mode.value}) to {out}; "
                  f"public fingerprint {harness.key_fingerprint((point.x, point.y))}")
        return _EXIT_OK

    bits = _resolve(args, config, "bits", 128 if kind == "rsa" else 512, int)
    fmt = args.format or ("pkcs1" if kind == "rsa" else "msblob")
    if kind == "rsa":
        material = toy_rsa_material(bits, rng)
        if fmt == "pkcs1":
            blob = keyfmt.rsa_pkcs1_encode(material)
            if emit_pem:
                payload = der.pem_wrap(blob, keyfmt.RSA_PEM_LABEL).encode()
            else:
                payload = blob
        elif fmt in ("msblob", "pvk"):
            payload = keyfmt.msblob_encode(material, private=True)
        else:
            raise ValueError(f"unsupported rsa format {fmt!r}")
    else:
        material = toy_dsa_material(bits, rng)
        if fmt not in ("msblob", "pvk"):
            raise ValueError("DSA keys encode as msblob or pvk")
        payload = keyfmt.msblob_encode(material, private=True)
    if fmt == "pvk":
        payload = keyfmt.pvk_encode(payload, args.password, rng=rng)
        emit_pem = False
    _write_output(payload, out, emit_pem)
    if out and out != "-":
        print(f"wrote {kind} key ({bits} bits, {fmt}) to {out}")
    return _EXIT_OK


def _inspect_ec(key: keyfmt.EcPrivateKey) -> Dict[str, object]:
    doc: Dict[str, object] = {"kind": "ec"}
    if isinstance(key.domain, keyfmt.NamedDomain):
        doc["encoding"] = "named"
        curve = ecgroup.curve_by_oid(key.domain.oid)
        doc["curve"] = curve.name if curve else "unregistered OID"
    elif isinstance(key.domain, keyfmt.ExplicitDomain):
        doc["encoding"] = ("explicit" if key.domain.cofactor
                          else "explicit-no-cofactor")
        match = ecgroup.match_explicit_params(
            key.domain.p, key.domain.a, key.domain.b,
            key.domain.gx, key.domain.gy, key.domain.n)
        doc["curve"] = match.name if match else "unknown parameters"
    else:
        doc["encoding"] = "absent"
    if key.domain is not None:
        dispatch = pathmodel.classify_ec_dispatch(key)
        doc["dispatch"] = dispatch.value
        doc["vulnerable"] = dispatch is pathmodel.DispatchPath.VARIABLE_TIME_WNAF
        doc["dispatch_mitigated"] = pathmodel.classify_ec_dispatch(
            key, mitigated=True).value
    return doc


def _inspect_rsa(material: keyfmt.RsaKeyMaterial) -> Dict[str, object]:
    mask = material.present_mask()
    group = pathmodel.classify_rsa_mask(mask)
    doc: Dict[str, object] = {
        "kind": "rsa",
        "fields": list(material.present_fields()),
        "mask": mask,
        "load_group": group.value,
    }
    if group in (pathmodel.LoadGroup.POI_HIT_CRT,
                 pathmodel.LoadGroup.POI_HIT_CRT_AND_D):
        report = pathmodel.mbedtls_load_model(material)
        doc["poi_events"] = [event.to_json() for event in report.events]
    return doc


def _inspect_dsa(material: keyfmt.DsaKeyMaterial) -> Dict[str, object]:
    doc: Dict[str, object] = {
        "kind": "dsa",
        "p_bits": material.p.bit_length(),
        "q_bits": material.q.bit_length(),
        "has_x": material.x is not None,
        "has_y": material.y is not None,
    }
    if material.x is not None and material.y is None:
        _completed, events, trace = pathmodel.dsa_blob_load_model(material)
        doc["poi_events"] = [event.to_json() for event in events]
        if trace is not None:
            doc["window_trace_ops"] = {"squares": trace.squares,
                                       "multiplies": trace.multiplies}
    return doc


def cmd_inspect(args: argparse.Namespace, config: Dict[str, str]) -> int:
    with open(args.keyfile, "rb") as handle:
        data = handle.read()
    kind, parsed, notes = load_key_file(data, args.password)
    if kind == "ec":
        doc = _inspect_ec(parsed)
    elif kind == "rsa":
        doc = _inspect_rsa(parsed)
    else:
        doc = _inspect_dsa(parsed)
    doc["container"] = notes
    if args.json:
        print(json.dumps(doc, sort_keys=True))
        return _EXIT_OK
    print(f"kind: {doc['kind']}")
    for note in notes:
        print(f"container: {note}")
    if kind == "ec":
        print(f"curve: {doc.get('curve')} ({doc.get('encoding')})")
        if "dispatch" in doc:
            tag = " (VULNERABLE)" if doc["vulnerable"] else ""
            print(f"dispatch: {doc['dispatch']}{tag}")
            print(f"dispatch with mitigation: {doc['dispatch_mitigated']}")
    elif kind == "rsa":
        print(f"fields: {' '.join(doc['fields'])} (mask 0x{doc['mask']:02x})")
        print(f"load group: {doc['load_group']}")
    else:
        print(f"p: {doc['p_bits']} bits, q: {doc['q_bits']} bits, "
              f"x {'present' if doc['has_x'] else 'absent'}, "
              f"y {'present' if doc['has_y'] else 'absent'}")
    for event in doc.get("poi_events", ()):
        role = f" ({event['role']})" if event["role"] else ""
        print(f"POI: {event['kind']} in {event['context']}{role}")
    if "window_trace_ops" in doc:
        ops = doc["window_trace_ops"]
        print(f"leaked window trace: {ops['squares']} squares, "
              f"{ops['multiplies']} multiplies")
    return _EXIT_OK


_GROUP_LABELS = {
    pathmodel.LoadGroup.INVALID: "Invalid",
    pathmodel.LoadGroup.PUBLIC: "Public",
    pathmodel.LoadGroup.POI_HIT_CRT: "CRT",
    pathmodel.LoadGroup.POI_HIT_CRT_AND_D: "CRT+d",
}


def cmd_fuzz_rsa(args: argparse.Namespace, config: Dict[str, str]) -> int:
    seed = _resolve(args, config, "seed", 0, int)
    bits = _resolve(args, config, "bits", 128, int)
    key = toy_rsa_material(bits, random.Random(seed))
    histogram, outcomes = pathmodel.fuzz_all_rsa_masks(key)
    poi_rows = [o for o in outcomes
                if o.group in (pathmodel.LoadGroup.POI_HIT_CRT,
                               pathmodel.LoadGroup.POI_HIT_CRT_AND_D)]
    if args.json:
        doc = {
            "histogram": {g.value: histogram[g] for g in pathmodel.LoadGroup},
            "poi_masks": [{"mask": o.mask, "group": o.group.value,
                           "contexts": list(o.contexts)} for o in poi_rows],
        }
        print(json.dumps(doc, sort_keys=True))
        return _EXIT_OK
    print(" ".join(f"{_GROUP_LABELS[g]}:{histogram[g]}"
                   for g in pathmodel.LoadGroup))
    for row in poi_rows:
        fields = keyfmt.RsaKeyMaterial(
            **{name: 1 for name in keyfmt.RSA_FIELDS}).project(row.mask)
        present = " ".join(fields.present_fields())
        print(f"mask 0x{row.mask:02x} [{present}] {_GROUP_LABELS[row.group]}: "
              f"{' -> '.join(row.contexts)}")
    return _EXIT_OK


def _timing_model(args: argparse.Namespace,
                  config: Dict[str, str]) -> ecgroup.TimingModel:
    return ecgroup.TimingModel(
        c_double=_resolve(args, config, "c_double", 1.0, float),
        c_add=_resolve(args, config, "c_add", 0.65, float),
        base=_resolve(args, config, "base", 50.0, float),
        sigma=_resolve(args, config, "sigma", 0.0, float))


def cmd_serve(args: argparse.Namespace, config: Dict[str, str]) -> int:
    with open(args.key, "rb") as handle:
        data = handle.read()
    if data.lstrip().startswith(b"-----BEGIN"):
        data = der.pem_unwrap(data.decode("ascii"), keyfmt.EC_PEM_LABEL).der
    seed = _resolve(args, config, "seed", 0, int)
    timing = _timing_model(args, config)
    handle_ = harness.serve_mock_tsa(
        data, (args.host, args.port), timing, random.Random(seed),
        unit_seconds=_resolve(args, config, "unit_seconds",
                              harness.DEFAULT_UNIT_SECONDS, float))
    print(f"serving on {handle_.host}:{handle_.port} "
          f"curve={handle_.curve_name} dispatch={handle_.dispatch.value}",
          flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        handle_.stop()
    return _EXIT_OK


def cmd_collect(args: argparse.Namespace, config: Dict[str, str]) -> int:
    seed = _resolve(args, config, "seed", 0, int)
    count = _resolve(args, config, "count", 1000, int)
    rng = random.Random(seed)
    digests = [rng.randbytes(32) for _ in range(count)]
    dataset = harness.collect_timings((args.host, args.port), count, digests,
                                      seed=seed)
    harness.save_dataset(dataset, args.out)
    print(f"collected {len(dataset)} of {count} samples into {args.out}")
    return _EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: Dict[str, str]) -> int:
    with open(args.key, "rb") as handle:
        data = handle.read()
    if data.lstrip().startswith(b"-----BEGIN"):
        data = der.pem_unwrap(data.decode("ascii"), keyfmt.EC_PEM_LABEL).der
    seed = _resolve(args, config, "seed", 0, int)
    count = _resolve(args, config, "count", 20000, int)
    rng = random.Random(seed)
    timing = _timing_model(args, config)

    if args.emit == "timings":
        dataset, nonces = harness.simulate_collection(
            data, count, timing, rng, seed=seed)
        harness.save_dataset(dataset, args.out)
        if args.truth_out:
            with open(args.truth_out, "w", encoding="ascii") as handle:
                handle.writelines(f"{k:x}\n" for k in nonces)
        print(f"simulated {count} timings into {args.out}")
        return _EXIT_OK

    key = keyfmt.ec_sec1_decode(data)
    curve = keyfmt.domain_curve(key.domain)
    dispatch = pathmodel.classify_ec_dispatch(key)
    if dispatch is not pathmodel.DispatchPath.VARIABLE_TIME_WNAF:
        print(f"key dispatches to {dispatch.value}: no per-operation trace "
              "leaks to extract", file=sys.stderr)
        return _EXIT_FAILURE
    error_rate = _resolve(args, config, "error_rate", 0.0, float)
    samples: List[sidechannel.LeakSample] = []
    nonce_by_sig: Dict[Tuple[int, int], int] = {}
    for _ in range(count):
        h = rng.getrandbits(256) % curve.n
        result = ecgroup.ecdsa_sign(curve, key.scalar, h, rng=rng)
        leak = sidechannel.extract_lsb_leak(result.trace, result.signature)
        if isinstance(leak, sidechannel.NotUseful):
            continue
        samples.append(leak)
        nonce_by_sig[(leak.r, leak.s)] = result.nonce
    if error_rate:
        samples = sidechannel.inject_errors(samples, error_rate, rng)
    with open(args.out, "w", encoding="ascii") as handle:
        handle.write(sidechannel.leaks_to_csv(samples))
    if args.truth_out:
        with open(args.truth_out, "w", encoding="ascii") as handle:
            handle.writelines(f"{nonce_by_sig[(s.r, s.s)]:x}\n"
                              for s in samples)
    print(f"simulated {count} signatures, {len(samples)} usable leaks "
          f"into {args.out}")
    return _EXIT_OK


def _acceptor_from_args(args: argparse.Namespace,
                        dataset_meta: Optional[harness.DatasetMeta],
                        ) -> Tuple[ecgroup.Curve, hnp.PubkeyAcceptor]:
    """Resolve the curve and victim public key from --key, flags, or
    dataset metadata, in that order."""
    if args.key:
        with open(args.key, "rb") as handle:
            data = handle.read()
        if data.lstrip().startswith(b"-----BEGIN"):
            data = der.pem_unwrap(data.decode("ascii"),
                                  keyfmt.EC_PEM_LABEL).der
        key = keyfmt.ec_sec1_decode(data)
        curve = keyfmt.domain_curve(key.domain)
        if key.public is not None:
            public = key.public
        else:
            point = ecgroup.derive_public(curve, key.scalar)
            public = (point.x, point.y)
        return curve, hnp.PubkeyAcceptor(curve, public)
    if args.pub_x is not None and args.pub_y is not None:
        curve = ecgroup.curve_by_name(args.curve or "P-256")
        return curve, hnp.PubkeyAcceptor(
            curve, (int(args.pub_x, 16), int(args.pub_y, 16)))
    if dataset_meta and dataset_meta.curve and dataset_meta.public:
        curve = ecgroup.curve_by_name(dataset_meta.curve)
        return curve, hnp.PubkeyAcceptor(curve, dataset_meta.public)
    raise ValueError("no public key: pass --key, or --pub-x/--pub-y, "
                     "or a dataset with embedded metadata")


def cmd_attack(args: argparse.Namespace, config: Dict[str, str]) -> int:
    seed = _resolve(args, config, "seed", 0, int)
    dim = _resolve(args, config, "dim", 60 if args.variant == "msb" else 120,
                   int)
    jobs = _resolve(args, config, "jobs", 2000 if args.variant == "msb"
                    else 48, int)
    max_red = _resolve(args, config, "max_reductions", 100, int)
    delta = _resolve(args, config, "delta", 0.99, float)
    filter_t = _resolve(args, config, "filter_t",
                        128 if args.variant == "msb" else 172, int)
    error_rate = _resolve(args, config, "error_rate", None,
                          float) if args.variant == "lsb" else None

    if args.variant == "msb":
        big_w = _resolve(args, config, "big_w", 128, int)
        dataset = harness.load_dataset(args.data)
        curve, accept = _acceptor_from_args(args, dataset.meta)
        fastest = sidechannel.timing_filter(dataset.records, filter_t)
        pool = hnp.SamplePool(n=curve.n, dim=dim, msb_sigs=tuple(fastest),
                              msb_w=big_w)
        attack_config = hnp.AttackConfig(
            t=filter_t, lattice_dim=dim, jobs=jobs, big_w=big_w,
            max_reductions=max_red, delta=delta)
    else:
        big_w = None
        with open(args.data, "r", encoding="ascii") as handle:
            samples = sidechannel.leaks_from_csv(handle.read())
        curve, accept = _acceptor_from_args(args, None)
        if error_rate:
            samples = sidechannel.inject_errors(
                samples, error_rate, random.Random(seed ^ 0x5EED))
        samples.sort(key=lambda s: s.bits, reverse=True)
        usable = tuple(samples[:filter_t])
        if len(usable) < filter_t:
            print(f"only {len(usable)} usable samples, need {filter_t}",
                  file=sys.stderr)
            return _EXIT_FAILURE
        bias = _resolve(args, config, "bias", 2.0, float)
        block = _resolve(args, config, "block_size", 28, int)
        pool = hnp.SamplePool(n=curve.n, dim=dim, lsb_samples=usable,
                              bias=bias)
        attack_config = hnp.AttackConfig(
            t=filter_t, lattice_dim=dim, jobs=jobs,
            max_reductions=max_red, delta=delta, block_size=block)

    experiment = ExperimentConfig(
        seed=seed, curve=curve.name, sigma=None, count=None,
        filter_t=filter_t, big_w=big_w, lattice_dim=dim, jobs=jobs,
        delta=delta, max_reductions=max_red, error_rate=error_rate)
    report = hnp.run_attack(pool, attack_config, accept,
                            parallelism=args.parallel, seed=seed)
    doc = json.loads(hnp.report_to_json(report))
    doc["experiment"] = experiment.to_json()
    payload = json.dumps(doc, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="ascii") as handle:
            handle.write(payload + "\n")
    if args.json:
        print(payload)
    elif report.recovered is not None:
        print(f"recovered key 0x{report.recovered:x} after "
              f"{report.jobs_used} jobs in {report.wall_time:.1f}s")
    else:
        print(f"failed after {report.jobs_used} jobs "
              f"in {report.wall_time:.1f}s")
    return _EXIT_OK if report.recovered is not None else _EXIT_FAILURE


def cmd_prob(args: argparse.Namespace, config: Dict[str, str]) -> int:
    t = _resolve(args, config, "filter_t", 128, int)
    errors = args.errors
    dim = _resolve(args, config, "dim", 60, int)
    p_hat, expected_jobs = hnp.subset_success_prob(t, errors, dim)
    if args.json:
        print(json.dumps({
            "t": t, "errors": errors, "dim": dim,
            "p_hat": f"{p_hat.numerator}/{p_hat.denominator}",
            "p_float": float(p_hat),
            "expected_jobs": expected_jobs,
        }, sort_keys=True))
        return _EXIT_OK
    print(f"p = {p_hat.numerator}/{p_hat.denominator} = {float(p_hat):.6g}; "
          f"expected jobs to first success: {expected_jobs:.1f}")
    return _EXIT_OK


def cmd_plot(args: argparse.Namespace, config: Dict[str, str]) -> int:
    dataset = harness.load_dataset(args.data)
    with open(args.truth, "r", encoding="ascii") as handle:
        nonces = [int(line, 16) for line in handle if line.strip()]
    if len(nonces) != len(dataset.records):
        print(f"truth ledger has {len(nonces)} rows, dataset "
              f"{len(dataset.records)}", file=sys.stderr)
        return _EXIT_FAILURE
    sums: Dict[int, Tuple[int, int]] = {}
    for record, nonce in zip(dataset.records, nonces):
        bits = nonce.bit_length()
        count, total = sums.get(bits, (0, 0))
        sums[bits] = (count + 1, total + record.latency)
    lines = ["bitlength,count,mean_latency"]
    for bits in sorted(sums):
        count, total = sums[bits]
        lines.append(f"{bits},{count},{total / count:.3f}")
    payload = "\n".join(lines) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="ascii") as handle:
            handle.write(payload)
        print(f"wrote {len(sums)} aggregate rows to {args.out}")
    else:
        sys.stdout.write(payload)
    return _EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keyside",
        description="key-format side-channel laboratory")
    parser.add_argument("--config", help="key=value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int)
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("keygen", help="generate a toy or P-256 key")
    common(p)
    p.add_argument("kind", choices=("ec", "rsa", "dsa"))
    p.add_argument("--curve")
    p.add_argument("--mode",
                   choices=("named", "explicit", "explicit-no-cofactor"))
    p.add_argument("--format", choices=("sec1", "pkcs1", "msblob", "pvk"))
    p.add_argument("--bits", type=int)
    p.add_argument("--pem", action="store_true")
    p.add_argument("--password")
    p.add_argument("--out")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("inspect", help="parse a key file and classify it")
    common(p)
    p.add_argument("keyfile")
    p.add_argument("--password")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("fuzz-rsa",
                       help="load all 256 field projections of a toy key")
    common(p)
    p.add_argument("--bits", type=int)
    p.set_defaults(func=cmd_fuzz_rsa)

    p = sub.add_parser("serve", help="run the mock timestamp server")
    common(p)
    p.add_argument("--key", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--sigma", type=float)
    p.add_argument("--c-double", type=float, dest="c_double")
    p.add_argument("--c-add", type=float, dest="c_add")
    p.add_argument("--base", type=float)
    p.add_argument("--unit-seconds", type=float, dest="unit_seconds")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("collect", help="measure request latencies")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("simulate", help="in-process dataset generation")
    common(p)
    p.add_argument("--key", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--c-double", type=float, dest="c_double")
    p.add_argument("--c-add", type=float, dest="c_add")
    p.add_argument("--base", type=float)
    p.add_argument("--emit", choices=("timings", "leaks"), default="timings")
    p.add_argument("--error-rate", type=float, dest="error_rate")
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", dest="truth_out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="lattice key recovery from a dataset")
    common(p)
    p.add_argument("variant", choices=("msb", "lsb"))
    p.add_argument("--data", required=True)
    p.add_argument("--key", help="victim key file (acceptor source)")
    p.add_argument("--curve")
    p.add_argument("--pub-x", dest="pub_x")
    p.add_argument("--pub-y", dest="pub_y")
    p.add_argument("--filter-t", type=int, dest="filter_t")
    p.add_argument("--W", type=int, dest="big_w")
    p.add_argument("--dim", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--max-reductions", type=int, dest="max_reductions")
    p.add_argument("--delta", type=float)
    p.add_argument("--bias", type=float)
    p.add_argument("--block-size", type=int, dest="block_size")
    p.add_argument("--error-rate", type=float, dest="error_rate")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("prob", help="subset success probability")
    common(p)
    p.add_argument("--filter-t", type=int, dest="filter_t")
    p.add_argument("--errors", type=int, required=True)
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("plot",
                       help="per-bitlength latency aggregates as CSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config: Dict[str, str] = {}
    if args.config:
        try:
            config = read_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return _EXIT_USAGE
    try:
        return args.func(args, config)
    except (OSError, ValueError, ConnectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
