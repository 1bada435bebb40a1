from dal_dialogue.evaluation.bench import BenchReport, benchmark_latency, run_benchmark
from dal_dialogue.evaluation.metrics import distinct_n, specific_win_rate
from dal_dialogue.evaluation.report import EvalReport, SystemReport, evaluate_systems

__all__ = [
    "BenchReport",
    "EvalReport",
    "SystemReport",
    "benchmark_latency",
    "distinct_n",
    "evaluate_systems",
    "run_benchmark",
    "specific_win_rate",
]
