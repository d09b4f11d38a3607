//! Holds the workspace acceptance run in `tests/acceptance.rs`. It lives in
//! its own package so it runs after every unit and integration suite.
