use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, slot, Architecture, ModuleParams, ModuleRegistry};
use crate::autodiff::{grad_check, Tensor};
use crate::error::{Error, Result};

/// Pre-activations closer to zero than this are pushed away so that no
/// finite-difference probe crosses a ReLU kink.
const KINK_MARGIN: f64 = 0.05;

fn random_row(rng: &mut ChaCha8Rng, d: usize) -> Tensor {
    Tensor::row((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
}

/// Max relative error between analytic and central-difference gradients
/// of `mse(module(concat(x_1..x_N)), t)` for a fresh seeded module and
/// seeded inputs and target.
pub fn module_grad_check(arch: Architecture, fan_in: usize, dim: usize, seed: u64, epsilon: f64) -> Result<f64> {
    if fan_in == 0 || dim == 0 {
        return Err(Error::InvalidConfig("fan_in and dim must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon * 10.0 < KINK_MARGIN) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, {}), got {epsilon}", KINK_MARGIN / 10.0)));
    }
    let mut rng = ChaCha8Rng::from_seed(derive_seed("grad-check", seed, &format!("{arch}/{fan_in}/{dim}")));
    let inputs: Vec<Tensor> = (0..fan_in).map(|_| random_row(&mut rng, dim)).collect();
    let target = random_row(&mut rng, dim);
    let mut module = ModuleParams::init("CHECK", fan_in, arch, dim, seed);

    let w1 = module.tensor(slot::W1).expect("W1").clone();
    let mut b1 = random_row(&mut rng, dim);
    let x: Vec<f64> = inputs.iter().flat_map(|t| t.as_slice().iter().copied()).collect();
    if arch != Architecture::Linear {
        for i in 0..dim {
            let z = b1.as_slice()[i] + (0..x.len()).map(|j| w1.get(i, j) * x[j]).sum::<f64>();
            if z.abs() < KINK_MARGIN {
                let shift = if z >= 0.0 { 2.0 * KINK_MARGIN } else { -2.0 * KINK_MARGIN };
                b1.as_mut_slice()[i] += shift;
            }
        }
    }
    module.set_tensor(slot::B1, b1)?;
    if arch.has_second_layer() {
        module.set_tensor(slot::B2, random_row(&mut rng, dim))?;
    }
    let mut registry = ModuleRegistry::new(dim, arch, seed).with_pos_layer(false);
    registry.insert(module)?;

    grad_check(
        |tape, reg: &ModuleRegistry| {
            let parts: Vec<_> = inputs.iter().map(|t| tape.constant_owned(t.clone())).collect();
            let x = tape.concat(&parts)?;
            let y = reg.get("CHECK").expect("registered").forward(0, x, tape)?;
            let t = tape.constant_owned(target.clone());
            tape.mse(y, t)
        },
        &registry,
        epsilon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_architectures_pass() {
        for arch in Architecture::ALL {
            for n in 1..=3 {
                let err = module_grad_check(arch, n, 4, 1, 1e-4).unwrap();
                assert!(err < 1e-5, "{arch} N={n}: {err}");
            }
        }
    }

    #[test]
    fn epsilon_bounds() {
        assert!(module_grad_check(Architecture::Linear, 1, 2, 0, 0.0).is_err());
        assert!(module_grad_check(Architecture::Linear, 1, 2, 0, 0.1).is_err());
    }
}
