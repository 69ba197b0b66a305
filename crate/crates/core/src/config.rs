//! Numerical tolerances shared by every module.

/// Default tolerances. Every predicate and solver in the crate reads from here
/// unless a caller passes an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Hermiticity check on complex matrices.
    pub hermitian: f64,
    /// `U†U = I` check.
    pub unitary: f64,
    /// Minimum eigenvalue allowed for density matrices.
    pub density_psd: f64,
    /// `|tr ρ − 1|` for density matrices.
    pub density_trace: f64,
    /// Allowed excess of `Σ K†K` over the identity.
    pub kraus_excess: f64,
    /// Eigenvalue cutoff used by [`crate::channel::channel_rank`].
    pub rank_cutoff: f64,
    /// Minimum eigenvalue accepted as completely positive.
    pub cp: f64,
    /// Marginal deviation accepted as trace preserving.
    pub tp: f64,
    /// Interior-point stopping threshold (residuals and gap).
    pub solver: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-10,
        unitary: 1e-9,
        density_psd: 1e-9,
        density_trace: 1e-9,
        kraus_excess: 1e-9,
        rank_cutoff: 1e-8,
        cp: 1e-9,
        tp: 1e-9,
        solver: 1e-8,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub const TOL: Tolerances = Tolerances::DEFAULT;
