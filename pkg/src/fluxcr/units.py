"""Unit conventions.

All energies and frequencies inside the package are angular frequencies in
rad/ns (hbar = 1), so a quantity quoted as E/2pi = 1 GHz is stored as 2*pi.
Times are in ns, rates in 1/ns.  The CLI and serialization layers convert to
and from ordinary frequencies in GHz.
"""

import math

TWO_PI = 2.0 * math.pi

GHZ = TWO_PI          # angular rad/ns per GHz
MHZ = TWO_PI * 1e-3
KHZ = TWO_PI * 1e-6


def ghz(value):
    """Ordinary frequency in GHz -> angular frequency in rad/ns."""
    return value * GHZ


def to_ghz(omega):
    """Angular frequency in rad/ns -> ordinary frequency in GHz."""
    return omega / GHZ
