pub mod contfrac;
pub mod factorization;
pub mod models;
pub mod scalar;
pub mod spectral;
pub mod tridiag;
pub mod urn;
