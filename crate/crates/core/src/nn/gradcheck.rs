use alloc::string::String;

use super::mlp::{init_mlp, Gradients, Mlp, MlpSpec};
use super::tensor::Matrix;
use crate::error::{config_err, Result};
use crate::rng::{derive, SplitMix64};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

const BATCH: usize = 4;
/// Floor on the relative-error denominator so exact zeros compare sanely.
const REL_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_relative_error: f64,
    /// Tensor holding the worst entry.
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares `backward` against central finite differences of a random
/// linear functional of the outputs, on a random input batch.
pub fn gradient_check(spec: &MlpSpec, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    gradient_check_with(spec, seed, tolerance, |_| {})
}

/// As [`gradient_check`], letting `tamper` edit the analytic gradients
/// before comparison.
pub fn gradient_check_with(
    spec: &MlpSpec,
    seed: u64,
    tolerance: f64,
    mut tamper: impl FnMut(&mut Gradients),
) -> Result<GradCheckReport> {
    if spec.num_params() > 1000 {
        return Err(config_err("gradient_check is meant for networks of at most 1000 parameters"));
    }
    let mut net = init_mlp(spec, derive(seed, 0), "check")?;
    // Nonzero biases so their gradients are exercised away from the origin.
    let mut rng = SplitMix64::new(derive(seed, 1));
    for l in 0..spec.num_layers() {
        net.params_mut()[2 * l + 1]
            .values
            .iter_mut()
            .for_each(|b| *b = rng.uniform(-0.5, 0.5));
    }
    let input = Matrix::from_vec(
        BATCH,
        spec.input_width(),
        (0..BATCH * spec.input_width())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect(),
    )?;
    let weights = Matrix::from_vec(
        BATCH,
        spec.output_width(),
        (0..BATCH * spec.output_width())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect(),
    )?;

    let (_, record) = net.forward(&input)?;
    let (mut analytic, _) = net.backward(&record, &weights)?;
    tamper(&mut analytic);

    let objective = |net: &Mlp| -> Result<f64> {
        let (out, _) = net.forward(&input)?;
        Ok(out.data.iter().zip(&weights.data).map(|(o, w)| o * w).sum())
    };

    let mut report = GradCheckReport {
        passed: true,
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    let h = DEFAULT_FD_STEP;
    for k in 0..net.params().len() {
        for i in 0..net.params()[k].len() {
            let orig = net.params()[k].values[i];
            net.params_mut()[k].values[i] = orig + h;
            let up = objective(&net)?;
            net.params_mut()[k].values[i] = orig - h;
            let down = objective(&net)?;
            net.params_mut()[k].values[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.checked += 1;
            if rel > report.max_relative_error || report.worst_param.is_empty() {
                report.max_relative_error = rel;
                report.worst_param = net.params()[k].name.clone();
                report.worst_index = i;
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    Ok(report)
}

/// Fault injection: scales the largest-magnitude gradient entry and returns
/// its `(tensor, index)`.
pub fn corrupt_largest(grads: &mut Gradients, factor: f64) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_mag = -1.0;
    for (k, g) in grads.iter().enumerate() {
        for (i, v) in g.iter().enumerate() {
            if v.abs() > best_mag {
                best_mag = v.abs();
                best = (k, i);
            }
        }
    }
    grads[best.0][best.1] *= factor;
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    #[test]
    fn tanh_mlp_passes() {
        let spec = MlpSpec::new(&[4, 8, 3], Activation::Identity);
        for seed in 0..20 {
            let r = gradient_check(&spec, seed, 1e-4).unwrap();
            assert!(r.passed, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn sigmoid_and_softmax_heads_pass() {
        for out in [Activation::Sigmoid, Activation::Softmax, Activation::Tanh] {
            let spec = MlpSpec::new(&[3, 6, 5, 4], out);
            let r = gradient_check(&spec, 3, 1e-4).unwrap();
            assert!(r.passed, "{out:?}: {r:?}");
        }
    }

    #[test]
    fn corrupted_gradient_fails_and_names_tensor() {
        let spec = MlpSpec::new(&[4, 8, 3], Activation::Identity);
        let mut hit = (0, 0);
        let r = gradient_check_with(&spec, 5, 1e-4, |g| hit = corrupt_largest(g, 2.0)).unwrap();
        assert!(!r.passed);
        let names = ["check.l0.weight", "check.l0.bias", "check.l1.weight", "check.l1.bias"];
        assert_eq!(r.worst_param, names[hit.0]);
        assert_eq!(r.worst_index, hit.1);
    }

    #[test]
    fn refuses_large_networks() {
        let spec = MlpSpec::new(&[40, 40, 3], Activation::Identity);
        assert!(gradient_check(&spec, 0, 1e-4).is_err());
    }
}
