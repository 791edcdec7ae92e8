"""bioace: automated evaluation of biomedical answers and their citations."""

__version__ = "0.1.0"
