//! Acceptance gates live in `tests/acceptance.rs`; run them with
//! `cargo test -p skewsplat-acceptance --test acceptance`.
