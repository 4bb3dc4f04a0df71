"""Byzantine-resilient distributed SGD with fastest-k filtered aggregation.

Library layout:
  numerics     seeded streams, order statistics, distribution functions
  data         synthetic blob datasets and IDX file ingestion
  models       logistic / one-hidden-layer classifiers with hand-written gradients
  aggregation  the filtered fastest-k rule and five baseline aggregators
  attacks      Byzantine gradient fabrication
  simulation   the logical-clock training loop
  config       declarative run configuration
  reporting    metrics CSV and manifest writers
  cli          run / sweep / probe entry points
"""

__version__ = "0.1.0"
