"""Noiseless B-bit-per-round channel: alphabet enforcement and bit accounting.

The uplink (agent to server) is metered; the downlink carrying the chosen
action is lossless and free, so it never appears here.
"""

from __future__ import annotations


class CapacityViolation(RuntimeError):
    """A symbol too large for the alphabet reached the channel (codec bug)."""


class Channel:
    def __init__(self, B: int):
        if B < 1:
            raise ValueError(f"channel capacity must be >= 1 bit, got {B}")
        self.B = int(B)
        self.alphabet = 2**self.B
        self.bits_sent = 0
        self.transmissions = 0
        self.rounds_used = 0

    def transmit(self, sym: int) -> int:
        """Deliver one symbol; the channel is noiseless so it comes back unchanged."""
        if not 0 <= sym < self.alphabet:
            raise CapacityViolation(
                f"symbol {sym} does not fit alphabet of size {self.alphabet} (B={self.B})"
            )
        self.bits_sent += self.B
        self.transmissions += 1
        self.rounds_used += 1
        return sym

    def no_transmission(self) -> None:
        """Account for a round in which the agent stays silent."""
        self.rounds_used += 1
