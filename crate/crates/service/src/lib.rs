//! HTTP service and command-line front end for the persuasive dialogue system.

pub mod backend;
pub mod cli;
pub mod components;
pub mod config;
pub mod http;
pub mod records;
