"""keyside: a key-format side-channel laboratory.

The package models, at desk scale, how cryptographic key *encodings* steer
libraries into variable-time code paths:

- ``der`` / ``keyfmt``: strict DER/PEM codec and the PKCS#1, SEC1, MSBLOB and
  PVK key formats, including the presence/absence degrees of freedom that
  drive dispatch decisions downstream.
- ``bigmath``: variable-time bignum arithmetic (sliding-window modexp, binary
  GCD, BEEA modular inversion) instrumented to emit operation traces, plus
  constant-time counterparts.
- ``ecgroup``: short Weierstrass curve arithmetic, wNAF and Montgomery-ladder
  scalar multiplication, ECDSA, and a parametric timing model.
- ``pathmodel``: library dispatch models (which loader code runs for which
  encoding) and points-of-interest event reports.
- ``sidechannel``: turning traces and timings into per-signature nonce leaks.
- ``hnp``: hidden-number-problem lattice construction, in-house LLL, and the
  parallel randomized-subset attack driver.
- ``harness``: a mock timestamping server, a remote timing collector, and an
  in-process simulator with sealed ground truth.
- ``cli``: the ``keyside`` command line.
"""

__version__ = "0.1.0"
