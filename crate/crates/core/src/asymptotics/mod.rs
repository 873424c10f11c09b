//! Growth-rate estimators, quadratures, the three-way comparison and the
//! check battery.

mod battery;
mod checks;
mod compare;
mod rates;

pub use battery::{run_checks, CheckConfig, CheckReport};
pub use checks::{
    check_cover_gap, check_leq1, check_martingale_clt_premise, check_supermartingale, ratio_lipschitz_constant,
    CheckRecord,
};
pub use compare::{
    compare_three, numeraire_generator, CompareConfig, GapRecord, GrowthRateReport, LadderPoint, QuadratureRecord,
    RateRecord, Rates, Setting,
};
pub use rates::{
    growth_time_average, l_num_quadrature, l_pi_diffusion, l_pi_discrete, paired_gap, rate_increments,
    time_average_estimate, DiffusionRates,
};
