pub mod campaign;
pub mod error;
pub mod exterior;
pub mod field;
pub mod format;
pub mod g2;
pub mod instanton;
pub mod sampling;
pub mod suite;
pub mod twistor;
