"""Asynchronous BFT atomic broadcast: FIN-NG, JUMBO and a deterministic
adversarial simulator to exercise them."""

__version__ = "0.1.0"
