//! Monte Carlo layer: the exact gap diffusion, a time-change oracle,
//! local times and excursions.

pub mod excursions;
pub mod export;
pub mod gap;
pub mod oracle;

pub use excursions::{
    extract_excursions, inverse_local_time_samples, Excursion, ExcursionHarvester, ExcursionSet, InverseLocalTime,
};
pub use export::{write_excursions_csv, write_path_csv};
pub use gap::{simulate_gap_diffusion, Event, ExitSampler, GapChain, PathRecord};
pub use oracle::{simulate_time_change_oracle, TimeChangeWalk};
