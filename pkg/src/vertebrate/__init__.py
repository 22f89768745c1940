"""Topic modeling, clade-assisted sentiment labeling and brand reputation scoring
for comment corpora."""

__version__ = "0.1.0"

POSITIVE = "positive"
NEGATIVE = "negative"
LABELS = (NEGATIVE, POSITIVE)
