"""Oracle-in-the-loop validation of ontology alignments."""

__version__ = "0.1.0"
