use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bands overlap or are out of order near {at}")]
    OverlappingBands { at: f64 },
    #[error("band [{lower}, {upper}] is empty or reversed")]
    EmptyBand { lower: f64, upper: f64 },
    #[error("point mass at {location} lies inside the hull [{lo}, {hi}]")]
    MassInsideHull { location: f64, lo: f64, hi: f64 },
    #[error("weight is not positive at x = {at} (value {value})")]
    NonpositiveWeight { at: f64, value: f64 },
    #[error("point mass at {location} has nonpositive weight {weight}")]
    NonpositiveMass { location: f64, weight: f64 },
    #[error("at least one band is required")]
    NoBands,
    #[error("evaluation point {re}{im:+}i is within the guard distance of the support")]
    EvaluationTooCloseToSupport { re: f64, im: f64 },
    #[error("w evaluated at the branch point {0}")]
    BranchPointEvaluation(f64),
    #[error("requested {requested} coefficients but only {available} discrete nodes")]
    InsufficientNodes { requested: usize, available: usize },
    #[error("Hankel pivot {pivot} at step {step} is not positive")]
    HankelBreakdown { step: usize, pivot: f64 },
    #[error("point mass system is singular")]
    SingularMassSystem,
    #[error("period system is singular")]
    SingularPeriodSystem,
    #[error("evaluation point {0} is not on the ray right of the support")]
    EvaluationOffSupportedRay(f64),
    #[error("no zero of q_{n} near the mass at {location}")]
    NoZeroNearMass { location: f64, n: usize },
    #[error("spurious pole for the mass at {location} is unavailable at n = {n}")]
    MissingSpuriousPole { location: f64, n: usize },
    #[error("Newton iteration failed to converge (residual {residual:e})")]
    NewtonDivergence { residual: f64 },
    #[error("step size collapsed at t = {t}")]
    StepCollapse { t: f64 },
    #[error("requested degree {requested} exceeds available {available}")]
    DegreeOutOfRange { requested: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
