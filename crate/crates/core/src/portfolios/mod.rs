//! Portfolio maps: constants, Lipschitz grids, functionally generated maps,
//! tabulated maps, and finite mixtures over them.

mod generator;
mod lipschitz;
mod map;
mod mixture;
mod table;

pub use generator::{
    certify_generator, fg_weights, fg_weights_into, Family, GeneratorCertificate, GeneratorFunction,
};
pub use lipschitz::{certify_lipschitz, lattice_lipschitz, project_into_class, LipschitzGridMap};
pub use map::{evaluate, ConstantMap, PortfolioMapSpec};
pub use mixture::{
    ladder_counts, sample_mixture, sample_mixture_ladder, Atom, MixtureClass, MixtureMeasure,
    Provenance, CERTIFY_GRID,
};
pub use table::TableMap;
