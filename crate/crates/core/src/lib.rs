// SPDX-License-Identifier: Apache-2.0

//! Exact arithmetic middle convolution on tame local data over finite fields.

pub mod cyclo;
pub mod field;
pub mod grids;
pub mod charsum;
pub mod checks;
pub mod enumerate;
pub mod epsilon;
pub mod error;
pub mod localdata;
pub mod mc;
pub mod oracle;
pub mod pipeline;
