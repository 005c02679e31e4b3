//! Hosts the `acceptance` test target. Run it with `cargo test -p lindscat-suite --test acceptance`.
