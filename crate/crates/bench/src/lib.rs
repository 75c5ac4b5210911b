// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks live under `benches/`.
