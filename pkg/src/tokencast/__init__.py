"""Multi-modal token return forecasting.

Market OHLCV parsing, chat-corpus ingestion, confidence-weighted daily
sentiment, windowed feature construction, a from-scratch LSTM regressor
with exact backpropagation through time, and a seeded comparison harness
for price-only versus multi-modal forecasting.
"""

from .corpus import Corpus, FilterConfig, RawMessage, filter_corpus, parse_chat_export
from .evaluate import (
    ComparisonReport,
    ExperimentConfig,
    ExperimentData,
    Metrics,
    RunReport,
    compare_runs,
    metrics,
    run_experiment,
)
from .features import FeatureRow, Sample, Scaler, align, chronological_split, fit_scaler, make_samples
from .lstm import LstmModel, TrainConfig, backward, forward, gradient_check, init, predict, train
from .market import OhlcvBar, PriceSeries, ReturnPoint, log_returns, parse_ohlcv_csv, typical_price
from .sentiment import (
    DailySentiment,
    LexiconProvider,
    MessageSentiment,
    aggregate_daily,
    discretize,
    distribution,
    lexicon_classify,
    load_interchange_scores,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"
