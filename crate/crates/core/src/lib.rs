pub mod adaptor;
pub mod align;
pub mod audio;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mixer;
pub mod signal;
