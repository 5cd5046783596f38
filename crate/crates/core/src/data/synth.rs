//! Seeded synthetic surrogate for the TE process at desk scale.
//!
//! The base process is a 52-dimensional correlated Gaussian built from a
//! small set of shared latent factors; its parameters (means, spreads,
//! factor loadings) come from a fixed structural seed, so every user seed
//! samples the *same* process. Each fault imprints the signature of its
//! catalog type: steps shift a fault-specific feature subset, random
//! variations inflate variance, the slow drift ramps a shift across the
//! sample window, sticking clamps a feature to a constant, and the unknown
//! faults mix a mild step with mild variance inflation.
//!
//! The harness accepts real TE CSVs through [`super::load_csv`] with zero
//! code change; this generator only stands in for the unavailable simulator.

use super::catalog::{included_faults, FaultType};
use super::{catalog, Dataset, FEATURE_COUNT};
use crate::linalg::{Matrix, Rng};

const STRUCTURE_SEED: u64 = 0x7e5f_00d5_eed0_0001;
const N_FACTORS: usize = 8;

struct Process {
    mean: Vec<f32>,
    std: Vec<f32>,
    factor_of: Vec<usize>,
    loading: Vec<f32>,
}

fn process() -> Process {
    let mut rng = Rng::new(STRUCTURE_SEED);
    let mut mean = Vec::with_capacity(FEATURE_COUNT);
    let mut std = Vec::with_capacity(FEATURE_COUNT);
    let mut factor_of = Vec::with_capacity(FEATURE_COUNT);
    let mut loading = Vec::with_capacity(FEATURE_COUNT);
    for f in 0..FEATURE_COUNT {
        mean.push(rng.uniform(-2.0, 2.0));
        std.push(rng.uniform(0.5, 1.5));
        factor_of.push(f % N_FACTORS);
        loading.push(rng.uniform(0.4, 0.9));
    }
    Process {
        mean,
        std,
        factor_of,
        loading,
    }
}

/// Base process mean and standard deviation per feature (seed-independent);
/// exposed so statistical checks can compare against the generator's truth.
pub fn base_process_stats() -> (Vec<f32>, Vec<f32>) {
    let p = process();
    (p.mean, p.std)
}

enum Signature {
    None,
    Step { features: Vec<usize>, shifts: Vec<f32> },
    Variation { features: Vec<usize>, factor: f32 },
    Drift { features: Vec<usize>, shifts: Vec<f32> },
    Stick { feature: usize, offset: f32 },
    Mixed {
        step_features: Vec<usize>,
        step_shifts: Vec<f32>,
        var_features: Vec<usize>,
        factor: f32,
    },
}

fn pick_features(rng: &mut Rng, count: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..FEATURE_COUNT).collect();
    rng.shuffle(&mut all);
    let mut picked: Vec<usize> = all.into_iter().take(count).collect();
    picked.sort_unstable();
    picked
}

/// The deterministic signature of one fault, derived from the structural
/// seed and the fault number.
fn signature(fault: u8) -> Signature {
    let mut rng = Rng::new(STRUCTURE_SEED).split(0x51_6000 + fault as u64);
    let fault_type = match catalog::info(fault).and_then(|i| i.fault_type) {
        Some(t) => t,
        None => return Signature::None,
    };
    match fault_type {
        FaultType::Step => {
            // Fault 6 (A feed loss) is the large step of the catalog.
            let (count, lo, hi) = if fault == 6 {
                (8, 2.5f32, 3.5f32)
            } else {
                (4 + rng.below(3), 1.2, 2.2)
            };
            let features = pick_features(&mut rng, count);
            let shifts = features.iter().map(|_| rng.uniform(lo, hi)).collect();
            Signature::Step { features, shifts }
        }
        FaultType::RandomVariation => {
            let count = 6 + rng.below(3);
            Signature::Variation {
                features: pick_features(&mut rng, count),
                factor: rng.uniform(2.5, 3.5),
            }
        }
        FaultType::SlowDrift => {
            let count = 5 + rng.below(3);
            let features = pick_features(&mut rng, count);
            let shifts = features.iter().map(|_| rng.uniform(2.0, 3.0)).collect();
            Signature::Drift { features, shifts }
        }
        FaultType::Sticking => Signature::Stick {
            feature: rng.below(FEATURE_COUNT),
            offset: 2.5,
        },
        FaultType::Unknown => {
            let step_count = 3 + rng.below(2);
            let step_features = pick_features(&mut rng, step_count);
            let step_shifts = step_features.iter().map(|_| rng.uniform(1.2, 2.0)).collect();
            let var_count = 3 + rng.below(2);
            Signature::Mixed {
                step_features,
                step_shifts,
                var_features: pick_features(&mut rng, var_count),
                factor: rng.uniform(2.2, 3.0),
            }
        }
    }
}

/// Generate `samples_per_fault` samples for each of the 18 included fault
/// types. Identical seeds produce bit-identical datasets.
pub fn synth_te(seed: u64, samples_per_fault: usize) -> Dataset {
    assert!(samples_per_fault >= 1, "samples_per_fault must be >= 1");
    let p = process();
    let faults = included_faults();
    let total = faults.len() * samples_per_fault;
    let mut rows = Vec::with_capacity(total * FEATURE_COUNT);
    let mut labels = Vec::with_capacity(total);
    let master = Rng::new(seed);

    for &fault in &faults {
        let mut rng = master.split(0xDA7A_0000 + fault as u64);
        let sig = signature(fault);
        let denom = (samples_per_fault.max(2) - 1) as f32;
        for t in 0..samples_per_fault {
            // Fixed draw order per sample: factors first, then noise.
            let factors: Vec<f32> = (0..N_FACTORS).map(|_| rng.normal()).collect();
            let mut x = [0.0f32; FEATURE_COUNT];
            for f in 0..FEATURE_COUNT {
                let w = p.loading[f];
                let raw = w * factors[p.factor_of[f]] + (1.0 - w * w).sqrt() * rng.normal();
                x[f] = p.mean[f] + p.std[f] * raw;
            }
            match &sig {
                Signature::None => {}
                Signature::Step { features, shifts } => {
                    for (&f, &s) in features.iter().zip(shifts) {
                        x[f] += s * p.std[f];
                    }
                }
                Signature::Variation { features, factor } => {
                    for &f in features {
                        x[f] = p.mean[f] + factor * (x[f] - p.mean[f]);
                    }
                }
                Signature::Drift { features, shifts } => {
                    let ramp = t as f32 / denom;
                    for (&f, &s) in features.iter().zip(shifts) {
                        x[f] += s * p.std[f] * ramp;
                    }
                }
                Signature::Stick { feature, offset } => {
                    x[*feature] = p.mean[*feature] + offset * p.std[*feature];
                }
                Signature::Mixed {
                    step_features,
                    step_shifts,
                    var_features,
                    factor,
                } => {
                    for (&f, &s) in step_features.iter().zip(step_shifts) {
                        x[f] += s * p.std[f];
                    }
                    for &f in var_features {
                        x[f] = p.mean[f] + factor * (x[f] - p.mean[f]);
                    }
                }
            }
            rows.extend_from_slice(&x);
            labels.push(fault);
        }
    }

    Dataset::new(
        Matrix::from_vec(total, FEATURE_COUNT, rows).unwrap(),
        labels,
    )
    .expect("generator emits the schema")
}
