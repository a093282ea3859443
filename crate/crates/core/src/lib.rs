pub mod annotator;
pub mod bundled;
pub mod channel;
pub mod circumplex;
pub mod emodb;
pub mod error;
pub mod exec;
pub mod labelmap;
pub mod model;
pub mod pipeline;
pub mod rankstats;
pub mod timeseries;
