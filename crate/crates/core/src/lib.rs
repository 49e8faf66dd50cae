pub mod agent;
pub mod analytics;
pub mod clock;
pub mod console;
pub mod domain;
pub mod http;
pub mod sim;
pub mod ingest;
pub mod store;
pub mod sumve;
