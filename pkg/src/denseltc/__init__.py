"""Dense locally testable codes: testers as constraint hypergraphs, coordinate-fixing
algorithms that certify rate bounds, and the duplication/padding transforms."""

__version__ = "0.1.0"
