from src.evaluation.metrics import DEFAULT_ALPHA, Metrics, compute_metrics, curve_summary, impact_score
from src.evaluation.records import RECORD_COLUMNS, EpisodeRecord
from src.evaluation.report import METRIC_COLUMNS, emit_report, load_metrics, load_records, merge_reports, metrics_row

# src.evaluation.session imports the learning package, which itself needs the
# records module, so it is imported directly where used.
