"""Mint the `toy-30` curve: a ~2^30 prime-order group for fast attack demos.

Searches y^2 = x^3 - 3x + b over GF(p) for a prime group order, using
baby-step/giant-step point-order finding inside the Hasse interval. Output is
pasted into keyside.ecgroup; the test suite re-certifies the constants from
scratch (primality, Hasse uniqueness, generator order), so this script is
documentation of provenance, not a trusted computation.

Run: python tools/mint_toy_curve.py [seed]
"""

import math
import sys

sys.path.insert(0, "src")

from keyside.ecgroup import Curve, CurvePoint, INFINITY, _mul, _add, point_neg, _sqrt_mod


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def first_point(curve: Curve) -> CurvePoint:
    for x in range(1, curve.p):
        rhs = (x * x * x + curve.a * x + curve.b) % curve.p
        y = _sqrt_mod(rhs, curve.p)
        if y is not None:
            return CurvePoint(x, y)
    raise RuntimeError("no point found")


def bsgs_order(curve: Curve, point: CurvePoint) -> int:
    """Unique m in the Hasse interval with [m]P = infinity (if ord(P) > 4*sqrt(p))."""
    p = curve.p
    width = 2 * math.isqrt(p) + 2
    lo = p + 1 - width
    step = math.isqrt(2 * width) + 1
    baby = {}
    q = INFINITY
    for d in range(step):
        baby[(q.x, q.y)] = d
        q = _add(curve, q, point)
    giant = _mul(curve, lo, point)
    stride = _mul(curve, step, point)
    hits = []
    c = 0
    while lo + c * step <= p + 1 + width + step:
        neg = point_neg(curve, giant)
        d = baby.get((neg.x, neg.y))
        if d is not None:
            m = lo + c * step + d
            if p + 1 - width <= m <= p + 1 + width:
                hits.append(m)
        giant = _add(curve, giant, stride)
        c += 1
    if len(hits) != 1:
        raise RuntimeError(f"ambiguous point order: {hits}")
    return hits[0]


def main() -> None:
    p = 1 << 30
    while not is_prime(p):
        p += 1
    print(f"p = {p} (0x{p:x})")
    a = p - 3
    b = 2
    while True:
        if (4 * a * a * a + 27 * b * b) % p != 0:
            curve = Curve("cand", p, a, b, 0, 0, p, 1)
            pt = first_point(curve)
            try:
                order = bsgs_order(curve, pt)
            except RuntimeError:
                b += 1
                continue
            # reduce to the exact order of pt, then demand a prime full order
            if is_prime(order) and order > 4 * math.isqrt(p) + 4:
                if _mul(curve, order, pt).is_infinity:
                    g = pt
                    print(f"a = p - 3, b = {b}")
                    print(f"n = {order} (0x{order:x})")
                    print(f"G = ({g.x}, {g.y})")
                    print(f"cofactor = 1 (unique Hasse multiple, n prime)")
                    assert _mul(curve, order, g).is_infinity
                    return
        b += 1


if __name__ == "__main__":
    main()
