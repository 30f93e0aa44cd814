"""Benchmark harness for bidirectional biomedical term/identifier normalization.

The pipeline builds frequency-balanced train/validation splits from three
terminologies (HPO, GO cellular component, protein/gene-symbol mappings),
drives completion endpoints over bidirectional prompt sets, classifies
baseline-vs-finetuned transitions into four outcome categories, and runs the
embedding-alignment and popularity statistics that explain when fine-tuning
memorizes versus generalizes.
"""

__version__ = "0.1.0"

GENERATOR_NAME = "splitmix64"
