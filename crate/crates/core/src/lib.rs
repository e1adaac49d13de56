pub mod analytics;
pub mod cli;
pub mod coaching;
pub mod domain;
pub mod engine;
pub mod gateway;
pub mod persist;
pub mod profile;
pub mod prompts;
pub mod service;
pub mod time;
