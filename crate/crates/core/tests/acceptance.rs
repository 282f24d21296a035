//! End-to-end acceptance suite: one test per criterion, each printing a
//! single PASS line with the measured quantities and the bound it was held
//! to. Criteria that share expensive artifacts (trained models, generated
//! datasets) build them once through shared fixtures.

mod acceptance_support;
