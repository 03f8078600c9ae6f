//! Computational additive combinatorics on Z/pZ.

pub mod bohr;
pub mod config;
pub mod error;
pub mod gowers;
pub mod group;
pub mod inverse;
pub mod khintchine;
pub mod pmf;
pub mod rational;
pub mod report;
pub mod spectral;
pub mod torus;
pub mod verify;

pub use bohr::{bohr_members, dual_norm, word_norm, BohrSet, FrequencySet, WordNorms};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use gowers::{cauchy_form, lambda4, u2_local, u3_local, Estimate, JointSampler, Mode};
pub use group::{find_prime_in, is_prime, PrimeGroup};
pub use inverse::{derivative_frequency_map, inverse_u2_local, quadruple_audit, U2Witness};
pub use khintchine::{
    iteration_driver, r4_harness, IterationTrace, KhintchineCertificate, ToyParams,
};
pub use pmf::{regular_pmf, sample_regular, tv_distance, ExactPmf, FloatPmf, RegularPmf};
pub use rational::{parse_rational, Phase, Rational};
pub use spectral::{dft, fde_report, idft, GroupFunction, Spectrum};
pub use torus::{
    bohr_basis, complement_torus, validate_phase, DilatedTorus, DualFrequency, LocalPhase,
};
pub use verify::{run_suite, SuiteOptions, SuiteReport};
