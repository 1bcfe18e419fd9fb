from .fidelity import (CorrelationMatrices, column_wd, conditional_entropy, corr_l2_diff,
                       correlation_matrices, correlation_ratio, correlation_ratio_matrix, entropy,
                       js_divergence, marginal_scores, pearson_matrix, theils_u,
                       theils_u_matrix, wasserstein_1d)
from .privacy import dcr, dcr_encode, dcr_matrix, mean_dcr
from .report import (EvaluationReport, MissingScoresError, evaluate_tables, heatmap_export,
                     heatmap_frames, load_report, rank_aggregate, read_heatmap)
from .utility import (TstrConfig, TstrResult, builtin_model, decision_tree, knn, split_real,
                      linear_regression, logistic_regression, tree_regressor, tstr_evaluate)
