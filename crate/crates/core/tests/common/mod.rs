#![allow(dead_code)]

use hetnet_core::model::{gen_synthetic, SyntheticParams};
use hetnet_core::Scenario;

pub fn synthetic(n: usize, n_bs: usize, sigma_db: f64, seed: u64) -> Scenario {
    gen_synthetic(&SyntheticParams { n, n_bs, sigma_db, seed, ..Default::default() }).unwrap()
}

/// Shannon throughput of user `i` served by `j` under linear gains `g`.
pub fn shannon(power: &[f64], g: &[f64], noise: f64, share: f64, bandwidth: f64, j: usize) -> f64 {
    let interference: f64 = (0..power.len()).filter(|&k| k != j).map(|k| power[k] * g[k]).sum();
    share * bandwidth * (1.0 + power[j] * g[j] / (noise + interference)).log2()
}
