//! Acceptance checks for the shadowseg workspace; see `tests/acceptance.rs`.
