use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::params::ErrorParams;
use crate::ptm::{circuit_probabilities, GateSet};

use super::{Dataset, ExperimentDesign, ExperimentError};

/// Independent RNG stream for circuit `index`, so draws do not depend on
/// evaluation order.
pub(crate) fn circuit_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Multinomial draw via successive conditional binomials.
pub(crate) fn sample_counts(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>, ExperimentError> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0;
    for (b, &p) in probs.iter().enumerate() {
        if b + 1 == probs.len() {
            counts[b] = remaining;
            break;
        }
        if remaining == 0 {
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| ExperimentError::Invalid(format!("binomial({remaining}, {q}): {e}")))?
            .sample(rng);
        counts[b] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}

/// Samples `shots` outcomes per design circuit under the noisy gate set.
pub fn simulate_counts(
    design: &ExperimentDesign,
    true_params: &ErrorParams,
    shots: u64,
    seed: u64,
) -> Result<Dataset, ExperimentError> {
    if shots == 0 {
        return Err(ExperimentError::Invalid("shots must be at least 1".into()));
    }
    true_params.validate().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let gateset = GateSet::noisy(design.n_qubits, design.gate_labels(), true_params)?;
    let mut counts = Vec::with_capacity(design.circuits.len());
    for (i, circuit) in design.circuits.iter().enumerate() {
        let probs = circuit_probabilities(circuit, &gateset)?;
        let mut rng = circuit_rng(seed, i as u64);
        counts.push(sample_counts(&probs, shots, &mut rng)?);
    }
    Ok(Dataset {
        n_qubits: design.n_qubits,
        circuits: design.circuits.clone(),
        counts,
        shots: vec![shots; design.circuits.len()],
        seed: Some(seed),
        ground_truth: Some(true_params.clone()),
    })
}

/// Exact outcome probabilities of every design circuit.
pub fn true_probabilities(design: &ExperimentDesign, params: &ErrorParams) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let gateset = GateSet::noisy(design.n_qubits, design.gate_labels(), params)?;
    design
        .circuits
        .iter()
        .map(|c| circuit_probabilities(c, &gateset).map_err(ExperimentError::from))
        .collect()
}

/// Nonparametric resample: per circuit, redraw counts from its observed frequencies.
pub fn resample(dataset: &Dataset, seed: u64) -> Result<Dataset, ExperimentError> {
    let mut out = dataset.clone();
    for i in 0..dataset.len() {
        let f = dataset.frequencies(i);
        let mut rng = circuit_rng(seed, i as u64);
        out.counts[i] = sample_counts(&f, dataset.shots[i], &mut rng)?;
    }
    out.seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, GateLabel};
    use crate::experiment::{default_design, standard_design};
    use crate::params::{parametrized_kinds, GateKind};

    fn gx_design() -> ExperimentDesign {
        let gx = Circuit(vec![GateLabel::single(GateKind::Gx, 0)]);
        standard_design(1, 1, &[gx], &[Circuit::empty()]).unwrap()
    }

    #[test]
    fn binomial_statistics_of_ideal_gx() {
        let design = gx_design();
        let truth = ErrorParams::zeros(&parametrized_kinds(1));
        let ds = simulate_counts(&design, &truth, 10_000, 11).unwrap();
        let idx = ds.circuits.iter().position(|c| c.len() == 1).unwrap();
        let f0 = ds.frequencies(idx)[0];
        assert!((f0 - 0.5).abs() < 4.0 * 0.005, "{f0}");
    }

    #[test]
    fn counts_sum_to_shots_two_qubits() {
        let design = default_design(2, 4).unwrap();
        let truth = ErrorParams::uniform(&parametrized_kinds(2), 0.1, 0.01);
        let ds = simulate_counts(&design, &truth, 1000, 3).unwrap();
        for (c, &n) in ds.counts.iter().zip(&ds.shots) {
            assert_eq!(c.len(), 4);
            assert_eq!(c.iter().sum::<u64>(), 1000);
            assert_eq!(n, 1000);
        }
        for i in 0..ds.len() {
            assert!((ds.frequencies(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let design = default_design(1, 4).unwrap();
        let truth = ErrorParams::uniform(&parametrized_kinds(1), 0.1, 0.01);
        let a = simulate_counts(&design, &truth, 500, 9).unwrap();
        let b = simulate_counts(&design, &truth, 500, 9).unwrap();
        let c = simulate_counts(&design, &truth, 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn zero_shots_rejected() {
        let truth = ErrorParams::zeros(&parametrized_kinds(1));
        assert!(simulate_counts(&gx_design(), &truth, 0, 1).is_err());
    }

    #[test]
    fn frequencies_converge_with_shots() {
        // ≤1% of circuits may fall outside a 4σ band at each shot count.
        let design = default_design(1, 8).unwrap();
        let truth = ErrorParams::uniform(&parametrized_kinds(1), 0.1, 0.01);
        let probs = true_probabilities(&design, &truth).unwrap();
        let mut prev_max = f64::INFINITY;
        for (k, shots) in [100u64, 1000, 10_000].into_iter().enumerate() {
            let ds = simulate_counts(&design, &truth, shots, 100 + k as u64).unwrap();
            let mut outside = 0;
            let mut max_dev: f64 = 0.0;
            for i in 0..ds.len() {
                let p = probs[i][0];
                let f = ds.frequencies(i)[0];
                let sigma = (p * (1.0 - p) / shots as f64).sqrt().max(1.0 / shots as f64);
                if (f - p).abs() > 4.0 * sigma {
                    outside += 1;
                }
                max_dev = max_dev.max((f - p).abs());
            }
            assert!(outside as f64 <= 0.01 * ds.len() as f64, "{outside} outside at {shots}");
            assert!(max_dev < prev_max);
            prev_max = max_dev;
        }
    }
}
