//! Shared fixtures for the acceptance suite (filled in as criteria land).
