"""Independent reference implementations the tests check against.

Everything here is written from the underlying definitions (RFC 8017/5915,
X.690, textbook EC arithmetic) without importing the package, so a test
comparing the two routes actually compares two derivations.
"""

from fractions import Fraction
from typing import List, Sequence, Tuple


# --- X.690 DER, built directly from tag-length-value rules ---------------

def tlv(tag: int, payload: bytes) -> bytes:
    if len(payload) < 0x80:
        return bytes([tag, len(payload)]) + payload
    length = len(payload).to_bytes((len(payload).bit_length() + 7) // 8, "big")
    return bytes([tag, 0x80 | len(length)]) + length + payload


def der_int(value: int) -> bytes:
    if value == 0:
        return tlv(0x02, b"\x00")
    width = (value.bit_length() // 8) + 1 if value > 0 else \
        ((-value - 1).bit_length() // 8) + 1
    return tlv(0x02, value.to_bytes(width, "big", signed=True))


def der_seq(*parts: bytes) -> bytes:
    return tlv(0x30, b"".join(parts))


def der_octets(payload: bytes) -> bytes:
    return tlv(0x04, payload)


def der_oid(arcs: Sequence[int]) -> bytes:
    body = bytearray()
    for arc in (arcs[0] * 40 + arcs[1],) + tuple(arcs[2:]):
        chunk = bytearray([arc & 0x7F])
        arc >>= 7
        while arc:
            chunk.append(0x80 | (arc & 0x7F))
            arc >>= 7
        body.extend(reversed(chunk))
    return tlv(0x06, bytes(body))


def der_bits(payload: bytes, unused: int = 0) -> bytes:
    return tlv(0x03, bytes([unused]) + payload)


def ctx(tag: int, inner: bytes) -> bytes:
    return tlv(0xA0 | tag, inner)


# --- RC4 straight from the KSA/PRGA description ---------------------------

def rc4(key: bytes, data: bytes) -> bytes:
    s = list(range(256))
    j = 0
    for i in range(256):
        j = (j + s[i] + key[i % len(key)]) % 256
        s[i], s[j] = s[j], s[i]
    out = bytearray()
    i = j = 0
    for byte in data:
        i = (i + 1) % 256
        j = (j + s[i]) % 256
        s[i], s[j] = s[j], s[i]
        out.append(byte ^ s[(s[i] + s[j]) % 256])
    return bytes(out)


# --- affine short-Weierstrass arithmetic, double-and-add only -------------

def ec_add(p, a, pt1, pt2):
    if pt1 is None:
        return pt2
    if pt2 is None:
        return pt1
    x1, y1 = pt1
    x2, y2 = pt2
    if x1 == x2 and (y1 + y2) % p == 0:
        return None
    if pt1 == pt2:
        lam = (3 * x1 * x1 + a) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    return x3, (lam * (x1 - x3) - y1) % p


def ec_mul(p, a, k, pt):
    acc = None
    addend = pt
    while k:
        if k & 1:
            acc = ec_add(p, a, acc, addend)
        addend = ec_add(p, a, addend, addend)
        k >>= 1
    return acc


def ecdsa_verify_ref(p, a, n, gen, pub, h, r, s) -> bool:
    if not (1 <= r < n and 1 <= s < n):
        return False
    w = pow(s, -1, n)
    pt = ec_add(p, a,
                ec_mul(p, a, h * w % n, gen),
                ec_mul(p, a, r * w % n, pub))
    return pt is not None and pt[0] % n == r


# --- exact Gram-Schmidt over rationals for reduction conditions -----------

def exact_gso(rows: Sequence[Sequence[int]]
              ) -> Tuple[List[List[Fraction]], List[Fraction]]:
    m = len(rows)
    mu: List[List[Fraction]] = [[Fraction(0)] * m for _ in range(m)]
    star: List[List[Fraction]] = []
    norms: List[Fraction] = []
    for k in range(m):
        vec = [Fraction(x) for x in rows[k]]
        for j in range(k):
            proj = sum(Fraction(rows[k][i]) * star[j][i]
                       for i in range(len(vec))) / norms[j]
            mu[k][j] = proj
            vec = [v - proj * s for v, s in zip(vec, star[j])]
        star.append(vec)
        norms.append(sum(v * v for v in vec))
        mu[k][k] = Fraction(1)
    return mu, norms


def is_size_reduced(rows, eta=Fraction(1, 2)) -> bool:
    mu, _ = exact_gso(rows)
    return all(abs(mu[k][j]) <= eta
               for k in range(len(rows)) for j in range(k))


def lovasz_holds(rows, delta: Fraction) -> bool:
    mu, norms = exact_gso(rows)
    return all(norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]
               for k in range(1, len(rows)))


# --- misc small oracles ----------------------------------------------------

def v2(value: int) -> int:
    return (value & -value).bit_length() - 1


def wnaf_ref(k: int, w: int) -> List[int]:
    digits = []
    while k:
        if k & 1:
            d = k % (1 << (w + 1))
            if d >= 1 << w:
                d -= 1 << (w + 1)
            k -= d
        else:
            d = 0
        digits.append(d)
        k >>= 1
    return digits


def is_probable_prime(candidate: int) -> bool:
    if candidate < 2:
        return False
    for small in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if candidate % small == 0:
            return candidate == small
    d = candidate - 1
    r = v2(d)
    d >>= r
    for wit in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(wit, d, candidate)
        if x in (1, candidate - 1):
            continue
        for _ in range(r - 1):
            x = x * x % candidate
            if x == candidate - 1:
                break
        else:
            return False
    return True
