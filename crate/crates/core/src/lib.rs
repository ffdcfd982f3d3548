// SPDX-License-Identifier: Apache-2.0

//! Timing-window ageing monitor.
//!
//! A physics-backed microcontroller model, a set of self-test payloads, a
//! controller that searches for each payload's maximum error-free frequency
//! (MEF), and analytics that turn MEF series into degradation metrics and
//! payload scores.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod campaign;
pub mod config;
pub mod controller;
pub mod device;
pub mod payloads;
pub mod physics;
