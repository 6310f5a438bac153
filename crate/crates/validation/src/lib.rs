//! Holds the acceptance report (`cargo test -p aelt-validation --test acceptance`).
