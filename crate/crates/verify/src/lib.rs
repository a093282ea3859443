//! Holds the acceptance target in `tests/acceptance.rs`; there is no library code.
