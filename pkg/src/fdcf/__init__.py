"""Full-duplex cell-free massive MIMO: channels, precoders, joint SE/EE optimization
and heap-based pilot assignment."""

__version__ = "0.1.0"
