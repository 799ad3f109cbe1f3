//! Dispersive readout of a gradiometric flux qubit through a SQUID-terminated
//! quarter-wave resonator: circuit parameters, qubit spectra, cavity
//! trajectories, measurement fidelity and full Lindblad dynamics, plus the
//! experiment runner behind the `fluxread` binary.

pub mod consts;
pub mod experiment;
pub mod fluxqubit;
pub mod ode;
pub mod protocol;
pub mod quantum;
pub mod readout;
pub mod resonator;
pub mod roots;
