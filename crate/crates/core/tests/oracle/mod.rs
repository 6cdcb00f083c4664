//! Independent reference implementations shared by integration tests.

pub mod hankel;
