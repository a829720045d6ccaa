//! Bundled example models.

/// The two-chart model used throughout the transformation examples.
pub const FIG2: &str = include_str!("../fixtures/fig2.scn");

/// Cardiac arrest treatment model. A reconstruction from the case-study
/// prose, not a copy of an unpublished model.
pub const CARDIAC: &str = include_str!("../fixtures/cardiac.scn");

/// `CARDIAC` with the urine-flow threshold on `InjectEPIPre -> InjectEPI`
/// lowered from 12 to 10.
pub const CARDIAC_MUTATED: &str = include_str!("../fixtures/cardiac_mutated.scn");

/// P1 and P2 for the cardiac model.
pub const CARDIAC_PROPS: &str = include_str!("../fixtures/cardiac.props");
