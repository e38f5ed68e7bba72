"""Errors shared by the protocol codecs."""

from __future__ import annotations


class IncompleteFrame(Exception):
    """The buffer holds a valid prefix; at least ``needed`` more bytes are required."""

    def __init__(self, needed: int):
        super().__init__(f"incomplete frame: need {needed} more byte(s)")
        self.needed = needed


class MalformedPacket(ValueError):
    """The bytes can never become a valid frame."""
