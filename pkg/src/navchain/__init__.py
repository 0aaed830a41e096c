"""Variable-length Markov chain modelling of web navigation sessions.

The package covers the full pipeline: log parsing and sessionization
(:mod:`navchain.ingest`), n-gram counting and ranking (:mod:`navchain.ngram`),
model construction by state cloning (:mod:`navchain.model`), probable-trail
extraction (:mod:`navchain.trails`), ranking and prediction evaluation
(:mod:`navchain.eval`) and a reproducible command line front end
(:mod:`navchain.cli`).
"""

from navchain.ingest import FINISH, START, LogRecord, PageTable, Session, sessionize
from navchain.model import BuildParams, ModelGraph, build_first_order, build_vlmc, trail_probability
from navchain.trails import Trail, TrailQuery, extract_trails, top_m_trails

__version__ = "0.1.0"

__all__ = [
    "START",
    "FINISH",
    "LogRecord",
    "PageTable",
    "Session",
    "sessionize",
    "BuildParams",
    "ModelGraph",
    "build_first_order",
    "build_vlmc",
    "trail_probability",
    "Trail",
    "TrailQuery",
    "extract_trails",
    "top_m_trails",
    "__version__",
]
