"""Spatiotemporal PM2.5 reanalysis over monitoring-station networks."""

from .stations import (POLLUTANTS, DataError, NormalizationSpec, StationMeta,
                       StationSeries, filter_complete, load_stations, save_stations)
from .temporal import cyclic_encode, time_features
from .windows import WindowBatch, make_windows, split_chronological
from .synthetic import SynthConfig, synth_dataset
from .geo import haversine_km, knn_query
from .interpolation import knn_interpolate
from .network import ModelConfig, ReanalysisModel
from .estimator import ReanalysisRegressor, validate_series
from .training import TrainConfig, TrainLog, train, resume
from .evaluation import (MetricReport, attention_report, eval_long_term,
                         eval_short_term, hidden_station_errors, metrics,
                         run_baseline)
from .grid import ReanalysisGrid, reanalyze_grid

__version__ = "0.1.0"
