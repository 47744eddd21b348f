// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

pub mod error;
pub mod harness;
pub mod neural;
pub mod policy;
pub mod quantum;
pub mod schedule;
pub mod spin;
pub mod thermo;

pub use error::{Error, Result};
pub use schedule::ControlSchedule;
