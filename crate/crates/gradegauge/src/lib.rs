pub mod auth;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod model_doc;
pub mod pipeline;
pub mod service;
pub mod store;
