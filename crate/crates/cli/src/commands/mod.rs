//! One function per subcommand. Each writes its tables into the output
//! directory and finishes with the manifest.

mod bnn;
mod energy;
mod mac_sweep;
mod variation;
mod write_sim;

pub use bnn::bnn;
pub use energy::energy_compare;
pub use mac_sweep::mac_sweep;
pub use variation::variation;
pub use write_sim::write_sim;
