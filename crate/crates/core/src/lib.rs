//! Diversification-return portfolio analytics.
//!
//! The diversification return of a budget-feasible portfolio `w` is
//! `q(w) = 1/2 (eta'w - w'Vw)` with `eta = diag(V)`. On the budget hyperplane
//! it equals `1/2 w'Dw` for the Euclidean distance matrix
//! `D = 1/2 (eta 1' + 1 eta') - V`, which gives assets a point embedding on a
//! sphere and the identity `c(w)^2 + q(w) = q_max`.

pub mod edm;
pub mod error;
pub mod format;
pub mod frontiers;
pub mod ingest;
mod linalg;
pub mod mdp;
pub mod portfolios;
pub mod universe;

pub use edm::{
    assert_edm, build_distance_matrix, centrality, distance_matrix, embed, norm_dr_bound,
    EdmCertificate, EdmEmbedding, EmbeddingSummary, InverseRoute,
};
pub use error::{Error, Result};
pub use frontiers::{
    cml_params, default_grid, efficient_dr_portfolio, frontier_params, q_cml_at, q_dr_at,
    q_dr_tilde_at, q_ef_at, sigma_grid, sweep, CurveKind, CurveRow, FrontierCurve, FrontierParams,
    KktSolution, LinearEllipsoidPath, RowStatus,
};
pub use ingest::{annualize, load_panel, read_panel, PanelFormat, Provenance, ReturnPanel};
pub use linalg::is_proportional_to_ones;
pub use mdp::{
    build_d_eta, d_max_bounds, diversification_ratio, mdp_analysis, mdp_at_sigma, mdp_global,
    sandwich_check, stqp_lower_bound, MdpAnalysis,
};
pub use portfolios::{
    max_dr_portfolio, min_variance_portfolio, q_portfolio, special_portfolios, tangent_portfolio,
    SpecialPortfolios,
};
pub use universe::{
    check_budget, diversification_return, portfolio_stats, validate_universe, AssetUniverse,
    Definiteness, Portfolio,
};
