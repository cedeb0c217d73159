//! Holds the `acceptance` test target. Packages run in name order under
//! `cargo test --workspace`, so this one runs after the core and FFI tests.
