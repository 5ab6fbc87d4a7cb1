"""Evidence generation for "stop using my data" requests against
collaborative-filtering recommenders."""

__version__ = "0.1.0"
