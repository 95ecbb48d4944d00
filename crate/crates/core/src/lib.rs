// SPDX-License-Identifier: Apache-2.0

//! Numerical tools for Anosov diffeomorphisms of the two-torus.

pub mod bundles;
pub mod cone;
pub mod corpus;
pub mod horocycle;
pub mod error;
pub mod lattice;
pub mod maps;
pub mod mme;
pub mod observable;
pub mod ode;
pub mod orbits;
pub mod series;
pub mod spectral;

pub use bundles::{BundleSettings, Bundles, DirectionSample, StretchPair};
pub use cone::{verify_cone_condition, ConeReport};
pub use error::{Error, Result};
pub use maps::{IntegerMatrix2, LiftPoint, LinearModel, MapSpec, PerturbationTerm, TorusPoint};
pub use observable::Observable;
pub use orbits::{OrbitDatabase, OrbitRecord};
