//! Configuration files, spectrum ingestion and results serialization.

mod config;
mod spectrum;
mod table;

pub use config::{load_config, parse_config, write_config, ConfigDocument};
pub use spectrum::{ingest_spectrum_csv, parse_spectrum_csv, write_spectrum_csv};
pub use table::{config_hash, parse_table, session_table, simulation_rows, sweep_table, ResultsTable, SWEEP_COLUMNS};
