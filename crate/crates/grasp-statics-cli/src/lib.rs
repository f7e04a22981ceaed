//! Library surface of the batch front-end, shared between the binary and
//! the test suites.

pub mod commands;
pub mod doc;
pub mod error;
pub mod outputs;
pub mod reference;
