//! Genus-two Riemann surface data from self-sewing a torus, and partition /
//! n-point functions of free bosonic and lattice vertex operator algebras in
//! that sewing parameterization.
//!
//! The crate is organized around the sewing parameter triple
//! `(tau, w, rho)`: a torus with modular parameter `tau`, punctures at `0`
//! and `w`, and annuli identified via `z1 z2 = rho`. The central objects are
//! the doubly-indexed moment matrix `R`, the period matrix `Omega`, the
//! bilinear form `omega^(2)`, holomorphic 1-forms `nu_1, nu_2`, and the
//! partition functions built on `det(I - R)`.
//!
//! Every analytic formula has at least one independent cross-check at desk
//! scale: exact rational series identities, Fock-space enumeration oracles,
//! graphical (necklace/cycle) expansions, quadrature of cycle integrals, and
//! modular equivariance. The `verify` module bundles these checks.

use num::complex::Complex64;

pub mod elliptic;
pub mod fock;
pub mod lattice;
pub mod modular;
pub mod necklace;
pub mod partition;
pub mod series;
pub mod sewing;
pub mod verify;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("lattice point singularity at z = {z} (distance {dist:.3e})")]
    LatticeSingularity { z: Complex64, dist: f64 },
    #[error("outside domain: {0}")]
    OutsideDomain(String),
    #[error("non-contractive truncation: spectral radius estimate {0:.4} >= 1")]
    NonContractive(f64),
    #[error("period matrix not in the Siegel upper half space: {0}")]
    NotInSiegelSpace(String),
    #[error("branch ambiguity: {0}")]
    BranchAmbiguity(String),
    #[error("oracle too large: {0}")]
    OracleTooLarge(String),
    #[error("root-of-unity snap failed (distance {0:.3e})")]
    SnapFailed(f64),
    #[error("series unreliable: {0}")]
    SeriesUnreliable(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Serde helpers shared by the JSON-emitting interfaces: complex numbers as
/// `{"re": .., "im": ..}`.
pub mod json {
    use num::complex::Complex64;
    use serde::ser::SerializeStruct;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("complex", 2)?;
        st.serialize_field("re", &c.re)?;
        st.serialize_field("im", &c.im)?;
        st.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let v = ReIm::deserialize(d)?;
        Ok(Complex64::new(v.re, v.im))
    }

    /// For fields of type `Vec<Complex64>` / nested arrays, serialize by value.
    pub fn complex_json(c: &Complex64) -> serde_json::Value {
        serde_json::json!({"re": c.re, "im": c.im})
    }
}
