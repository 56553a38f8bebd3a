"""Transformer adapter: fine-tunes a pretrained masked-LM checkpoint with a
multi-label head and emits predictions in the survey coding toolkit's
interchange format.  All evaluation happens in the toolkit; the adapter
only reads the dataset/split files and writes prediction files."""

__version__ = "0.1.0"
