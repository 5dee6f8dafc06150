"""tagscope: probe what NER taggers learn from word identity vs. context."""

__version__ = "0.1.0"
