"""Event-based electricity disaggregation and inference of occupancy and
household characteristics from smart-meter data.

The library is organized around plain numpy data types:

* series    -- PowerSeries / OccupancySeries, CSV ingestion, resampling,
               clock-window arithmetic, dataset manifests
* events    -- steady-state event detection, edge pairing, background removal
* occupancy -- three occupancy predictors plus the windowed evaluation
* disagg    -- supervised factorial-HMM and unsupervised event-cluster
               disaggregation, NILM metrics
* features  -- consumption/appliance feature catalogs, chi-squared selection
* classify  -- from-scratch kNN / random forest and the characteristics
               cross-validation experiment
* synth     -- seeded synthetic-home generator with full ground truth
* cli       -- experiment harness (`nilminfer <subcommand>`)
"""

__version__ = "0.1.0"

from .series import (PowerSeries, OccupancySeries, DatasetManifest, HomeEntry,
                     load_power_csv, write_power_csv, load_occupancy_csv,
                     window_occupancy, resample, clock_window_mean,
                     load_manifest, save_manifest)
from .events import (Event, EventPair, BackgroundProfile, DetectorConfig,
                     detect_events, pair_events, learn_background,
                     remove_background, cluster_magnitudes)
from .occupancy import (OccupancyConfig, OccupancyMetrics,
                        predict_occupancy_events,
                        predict_occupancy_night_threshold,
                        window_power_features, evaluate_occupancy,
                        occupancy_experiment)
from .disagg import (ApplianceHMM, DisaggResult, NilmMetrics, train_hmm,
                     fhmm_disaggregate, hart_disaggregate, nilm_metrics)
from .features import (FeatureVector, extract_consumption_features,
                       extract_appliance_features, chi2_select, pearson,
                       build_feature_table, write_feature_csv)
from .classify import (HouseholdRecord, RandomForestConfig,
                       label_characteristics, knn_classify, rf_classify,
                       majority_baseline, characteristics_experiment,
                       stratified_folds)
from .synth import (HomeSpec, CyclicLoadSpec, HvacSpec, OccupantLoadSpec,
                    GeneratedHome, Corpus, gen_home, gen_corpus)
