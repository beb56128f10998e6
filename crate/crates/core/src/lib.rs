//! Flow-sensitive security models for federated cloud systems.
//!
//! Clouds, places and task transitions form a coloured-Petri-net-style model
//! whose data tokens carry levels of a finite security lattice. Firing joins
//! input levels into outputs, so the explored state space tracks where
//! classified data can flow. On top of it sit Bell-LaPadula and invariant
//! checking, strong nondeterministic non-interference, opacity of secrets and
//! clearance-aware workflow allocation.

#![allow(clippy::result_large_err)]

pub mod lattice;
pub mod model;
pub mod par;
pub mod statespace;
pub mod noninterference;
pub mod observe;
pub mod opacity;
pub mod policy;
pub mod allocation;
pub mod io;
pub mod report;
pub mod cli;
