from .composite import compose_idgg, compose_tdgg, mean_ranks, minmax_normalize
from .macro import (MacroReport, PowerLawFit, StatSample, echo_chambers, edge_overlap, evaluate_macro,
                    fit_power_law, graph_stats, hist_divergences, mmd2_rbf, p_at_100_kol, pagerank)
from .micro import (MicroReport, SelectionSample, category_accuracy, evaluate_micro, hit_at_k,
                    recall_at_k, rouge_l, split_easy_hard, token_f1)

__all__ = [
    "MacroReport", "MicroReport", "PowerLawFit", "SelectionSample", "StatSample", "category_accuracy",
    "compose_idgg", "compose_tdgg", "echo_chambers", "edge_overlap", "evaluate_macro", "evaluate_micro",
    "fit_power_law", "graph_stats", "hist_divergences", "hit_at_k", "mean_ranks", "minmax_normalize",
    "mmd2_rbf", "p_at_100_kol", "pagerank", "recall_at_k", "rouge_l", "split_easy_hard", "token_f1",
]
