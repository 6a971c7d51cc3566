// SPDX-License-Identifier: Apache-2.0

//! Field-enumeration backends.
//!
//! Every exponential sum in the crate is an integer histogram over roots of
//! unity accumulated while walking a field. A backend decides how that walk is
//! partitioned. Integer addition is exact and commutative, so every backend
//! returns bit-identical histograms.

use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;

/// A strategy for summing per-element contributions over `0..n`.
pub trait Enumerator: Send + Sync {
    /// Registry name.
    fn name(&self) -> String;

    /// Sum `f(x, acc)` over `x in 0..n` into a zeroed accumulator of length `len`.
    fn accumulate(&self, n: u32, len: usize, f: &(dyn Fn(u32, &mut [i64]) + Sync)) -> Vec<i64>;

    /// Evaluate `f` on every `x in 0..n`, preserving order.
    fn map_collect(&self, n: u32, f: &(dyn Fn(u32) -> Vec<i64> + Sync)) -> Vec<Vec<i64>>;
}

/// Single-threaded walk in increasing element order.
#[derive(Debug, Default, Clone, Copy)]
pub struct Serial;

impl Enumerator for Serial {
    fn name(&self) -> String {
        "serial".into()
    }

    fn accumulate(&self, n: u32, len: usize, f: &(dyn Fn(u32, &mut [i64]) + Sync)) -> Vec<i64> {
        let mut acc = vec![0i64; len];
        for x in 0..n {
            f(x, &mut acc);
        }
        acc
    }

    fn map_collect(&self, n: u32, f: &(dyn Fn(u32) -> Vec<i64> + Sync)) -> Vec<Vec<i64>> {
        (0..n).map(f).collect()
    }
}

/// The field split into contiguous ranges summed on a dedicated rayon pool.
pub struct Partitioned {
    threads: usize,
    pool: rayon::ThreadPool,
}

impl Partitioned {
    pub fn new(threads: usize) -> Self {
        let threads = threads.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("rayon pool construction");
        Partitioned { threads, pool }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl Enumerator for Partitioned {
    fn name(&self) -> String {
        format!("partitioned-{}", self.threads)
    }

    fn accumulate(&self, n: u32, len: usize, f: &(dyn Fn(u32, &mut [i64]) + Sync)) -> Vec<i64> {
        let parts = (self.threads * 4).max(1) as u32;
        let chunk = n.div_ceil(parts).max(1);
        self.pool.install(|| {
            (0..parts)
                .into_par_iter()
                .map(|i| {
                    let mut acc = vec![0i64; len];
                    let lo = (i * chunk).min(n);
                    let hi = ((i + 1) * chunk).min(n);
                    for x in lo..hi {
                        f(x, &mut acc);
                    }
                    acc
                })
                .reduce(
                    || vec![0i64; len],
                    |mut a, b| {
                        for (u, v) in a.iter_mut().zip(b) {
                            *u += v;
                        }
                        a
                    },
                )
        })
    }

    fn map_collect(&self, n: u32, f: &(dyn Fn(u32) -> Vec<i64> + Sync)) -> Vec<Vec<i64>> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Names accepted by [`by_name`].
pub fn registry_names() -> Vec<&'static str> {
    vec!["serial", "partitioned-2", "partitioned-4", "partitioned-8"]
}

/// Look up a backend by registry name (`serial` or `partitioned-<k>`).
pub fn by_name(name: &str) -> Option<Arc<dyn Enumerator>> {
    if name == "serial" {
        return Some(Arc::new(Serial));
    }
    let k: usize = name.strip_prefix("partitioned-")?.parse().ok()?;
    (k >= 1).then(|| Arc::new(Partitioned::new(k)) as Arc<dyn Enumerator>)
}

fn slot() -> &'static RwLock<Arc<dyn Enumerator>> {
    static CURRENT: OnceLock<RwLock<Arc<dyn Enumerator>>> = OnceLock::new();
    CURRENT.get_or_init(|| RwLock::new(Arc::new(Serial)))
}

/// The process-wide backend used by sums and the oracle.
pub fn current() -> Arc<dyn Enumerator> {
    slot().read().unwrap().clone()
}

/// Replace the process-wide backend.
pub fn set_current(e: Arc<dyn Enumerator>) {
    *slot().write().unwrap() = e;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backends_agree() {
        let f = |x: u32, acc: &mut [i64]| acc[(x % 7) as usize] += x as i64;
        let a = Serial.accumulate(1000, 7, &f);
        for name in registry_names() {
            let b = by_name(name).unwrap().accumulate(1000, 7, &f);
            assert_eq!(a, b, "{name}");
        }
        assert!(by_name("bogus").is_none());
    }
}
