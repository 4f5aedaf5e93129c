"""Half-thresholding variable selection under global-local shrinkage priors."""
from .baselines import (LassoPath, adaptive_lasso, cv_select_lambda, kkt_violation, lasso_cd,
                        lasso_intercept, lasso_path)
from .data import (EXAMPLE_BETAS, GaussianDesignSpec, OlsFit, RegressionDataset, generate_dataset,
                   ols_fit, orthogonalize, read_csv, write_csv)
from .errors import (DomainError, HTShrinkError, InvalidArgumentError, NumericalFailure,
                     SingularityError, UnsupportedOperationError)
from .gibbs import (GibbsConfig, PosteriorDraws, PosteriorSummary, effective_sample_size,
                    gibbs_fit, sample_gig, summarize)
from .harness import (ExperimentConfig, MetricsRow, ScheduleSpec, TauPolicy, oracle_check,
                      poly_a_diagnostic, run_consistency_study, run_rate_study,
                      run_simulation_study)
from .priors import (PRESETS, PriorSpec, TailClass, log_density_unnormalized, parse_prior,
                     sample_gamma, slowly_varying_L, tail_class)
from .quadrature import (ShrinkageQuery, ShrinkageResult, de_shrinkage_closed_form,
                         expected_shrinkage, ig_cdf, mc_shrinkage_oracle,
                         posterior_mean_orthogonal, shrinkage_exceedance)
from .selection import SelectionResult, ht_select, misclassification, model_size, rpe

__version__ = "0.1.0"
