use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::autodiff::{NodeId, ParamId, Tape, Tensor};
use crate::error::{Error, Result};

/// Internal layout shared by every module of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// One affine map.
    Linear,
    /// Affine map followed by ReLU.
    Nonlin,
    /// Affine, ReLU, affine.
    Double,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Linear, Architecture::Nonlin, Architecture::Double];

    pub fn tag(self) -> u8 {
        match self {
            Architecture::Linear => 0,
            Architecture::Nonlin => 1,
            Architecture::Double => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn has_second_layer(self) -> bool {
        self == Architecture::Double
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Linear => "linear",
            Architecture::Nonlin => "nonlin",
            Architecture::Double => "double",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Architecture::Linear),
            "nonlin" => Ok(Architecture::Nonlin),
            "double" => Ok(Architecture::Double),
            other => Err(Error::InvalidConfig(format!(
                "unknown architecture `{other}` (expected linear|nonlin|double)"
            ))),
        }
    }
}

/// Parameter slots within a module.
pub mod slot {
    pub const W1: u8 = 0;
    pub const B1: u8 = 1;
    pub const W2: u8 = 2;
    pub const B2: u8 = 3;
}

/// Weights of one rule-keyed module mapping `1 x N*D` to `1 x D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleParams {
    key: String,
    arch: Architecture,
    fan_in: usize,
    dim: usize,
    w1: Tensor,
    b1: Tensor,
    second: Option<(Tensor, Tensor)>,
}

/// 32 bytes of seed material for `(key, seed)`, stable across platforms.
pub(crate) fn derive_seed(domain: &str, seed: u64, key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    h.finalize().into()
}

fn uniform_f32(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let b = bound as f32;
    let data = (0..rows * cols).map(|_| rng.gen_range(-b..=b) as f64).collect();
    Tensor::from_raw(rows, cols, data)
}

impl ModuleParams {
    /// Fresh module: weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// (fan_in = N*D for the first layer, D for the second), zero biases.
    /// Weights are drawn as `f32` so they survive checkpointing exactly.
    /// Deterministic in `(key, seed)`.
    pub fn init(key: impl Into<String>, fan_in: usize, arch: Architecture, dim: usize, seed: u64) -> Self {
        assert!(fan_in >= 1 && dim >= 1, "fan_in and dim must be positive");
        let key = key.into();
        let mut rng = ChaCha8Rng::from_seed(derive_seed("module-init", seed, &key));
        let in1 = fan_in * dim;
        let w1 = uniform_f32(&mut rng, dim, in1, 1.0 / (in1 as f64).sqrt());
        let second = arch
            .has_second_layer()
            .then(|| (uniform_f32(&mut rng, dim, dim, 1.0 / (dim as f64).sqrt()), Tensor::zeros(1, dim)));
        Self { key, arch, fan_in, dim, w1, b1: Tensor::zeros(1, dim), second }
    }

    /// Assemble a module from explicit tensors, checking every shape.
    pub fn from_parts(
        key: impl Into<String>,
        arch: Architecture,
        fan_in: usize,
        dim: usize,
        w1: Tensor,
        b1: Tensor,
        second: Option<(Tensor, Tensor)>,
    ) -> Result<Self> {
        let key = key.into();
        let check = |name: &str, t: &Tensor, shape: (usize, usize)| {
            if t.shape() == shape {
                Ok(())
            } else {
                Err(Error::ShapeMismatch {
                    op: "module",
                    expected: format!("{name} of {}x{}", shape.0, shape.1),
                    found: t.shape_string(),
                })
            }
        };
        if fan_in == 0 || dim == 0 {
            return Err(Error::InvalidConfig("fan_in and dim must be positive".into()));
        }
        check("W1", &w1, (dim, fan_in * dim))?;
        check("b1", &b1, (1, dim))?;
        match (&second, arch.has_second_layer()) {
            (Some((w2, b2)), true) => {
                check("W2", w2, (dim, dim))?;
                check("b2", b2, (1, dim))?;
            }
            (None, false) => {}
            _ => {
                return Err(Error::InvalidConfig(format!("second layer presence does not match {arch}")));
            }
        }
        Ok(Self { key, arch, fan_in, dim, w1, b1, second })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Slots present for this architecture, in declaration order.
    pub fn slots(&self) -> &'static [u8] {
        if self.second.is_some() {
            &[slot::W1, slot::B1, slot::W2, slot::B2]
        } else {
            &[slot::W1, slot::B1]
        }
    }

    pub fn tensor(&self, s: u8) -> Option<&Tensor> {
        match s {
            slot::W1 => Some(&self.w1),
            slot::B1 => Some(&self.b1),
            slot::W2 => self.second.as_ref().map(|p| &p.0),
            slot::B2 => self.second.as_ref().map(|p| &p.1),
            _ => None,
        }
    }

    /// Mutable access to one tensor. Callers must keep its shape.
    pub fn tensor_mut(&mut self, s: u8) -> Option<&mut Tensor> {
        match s {
            slot::W1 => Some(&mut self.w1),
            slot::B1 => Some(&mut self.b1),
            slot::W2 => self.second.as_mut().map(|p| &mut p.0),
            slot::B2 => self.second.as_mut().map(|p| &mut p.1),
            _ => None,
        }
    }

    /// Replace one tensor, keeping shapes fixed.
    pub fn set_tensor(&mut self, s: u8, value: Tensor) -> Result<()> {
        let t = self.tensor_mut(s).ok_or_else(|| Error::UnknownParam(format!("slot {s}")))?;
        if t.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "set_tensor",
                expected: t.shape_string(),
                found: value.shape_string(),
            });
        }
        *t = value;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.slots().iter().map(|&s| self.tensor(s).map_or(0, Tensor::len)).sum()
    }

    /// Round every weight to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for &s in self.slots() {
            if let Some(t) = self.tensor_mut(s) {
                t.as_mut_slice().iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
        }
    }

    /// Record this module on `tape` applied to `x` (`1 x N*D`). `owner`
    /// namespaces the parameter ids.
    pub fn forward<'a>(&'a self, owner: u32, x: NodeId, tape: &mut Tape<'a>) -> Result<NodeId> {
        let width = tape.value(x).len();
        if !tape.value(x).is_row() || width != self.fan_in * self.dim {
            return Err(Error::ShapeMismatch {
                op: "module_forward",
                expected: format!("1x{}", self.fan_in * self.dim),
                found: tape.value(x).shape_string(),
            });
        }
        let w1 = tape.param(ParamId::new(owner, slot::W1), &self.w1);
        let b1 = tape.param(ParamId::new(owner, slot::B1), &self.b1);
        let h = tape.affine(w1, b1, x)?;
        match (self.arch, &self.second) {
            (Architecture::Linear, _) => Ok(h),
            (Architecture::Nonlin, _) => Ok(tape.relu(h)),
            (Architecture::Double, Some((w2, b2))) => {
                let a = tape.relu(h);
                let w2 = tape.param(ParamId::new(owner, slot::W2), w2);
                let b2 = tape.param(ParamId::new(owner, slot::B2), b2);
                tape.affine(w2, b2, a)
            }
            (Architecture::Double, None) => unreachable!("Double modules always carry a second layer"),
        }
    }
}

/// Free-function form of [`ModuleParams::forward`].
pub fn module_forward<'a>(params: &'a ModuleParams, owner: u32, x: NodeId, tape: &mut Tape<'a>) -> Result<NodeId> {
    params.forward(owner, x, tape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(m: &ModuleParams, x: Vec<f64>) -> Vec<f64> {
        let x = Tensor::row(x);
        let mut tape = Tape::new();
        let nx = tape.constant(&x);
        let y = m.forward(0, nx, &mut tape).unwrap();
        tape.value(y).as_slice().to_vec()
    }

    #[test]
    fn full_scale_parameter_count() {
        let m = ModuleParams::init("S -> NP VP", 2, Architecture::Linear, 768, 0);
        assert_eq!(m.tensor(slot::W1).unwrap().shape(), (768, 1536));
        assert_eq!(m.tensor(slot::B1).unwrap().shape(), (1, 768));
        assert_eq!(m.parameter_count(), 1_180_416);
    }

    #[test]
    fn init_is_deterministic_and_key_dependent() {
        let a = ModuleParams::init("NP -> DT NN", 2, Architecture::Double, 6, 11);
        let b = ModuleParams::init("NP -> DT NN", 2, Architecture::Double, 6, 11);
        let c = ModuleParams::init("NP -> DT JJ", 2, Architecture::Double, 6, 11);
        let d = ModuleParams::init("NP -> DT NN", 2, Architecture::Double, 6, 12);
        assert_eq!(a, b);
        assert_ne!(a.tensor(slot::W1), c.tensor(slot::W1));
        assert_ne!(a.tensor(slot::W1), d.tensor(slot::W1));
    }

    #[test]
    fn init_bounds_and_shapes() {
        let m = ModuleParams::init("NN", 1, Architecture::Double, 4, 3);
        assert_eq!(m.tensor(slot::W1).unwrap().shape(), (4, 4));
        assert_eq!(m.tensor(slot::W2).unwrap().shape(), (4, 4));
        assert_eq!(m.tensor(slot::B1).unwrap().len(), 4);
        assert_eq!(m.tensor(slot::B2).unwrap().len(), 4);
        let m = ModuleParams::init("X -> A B C", 3, Architecture::Linear, 5, 3);
        let bound = 1.0 / 15f64.sqrt() + 1e-7;
        assert!(m.tensor(slot::W1).unwrap().as_slice().iter().all(|v| v.abs() <= bound));
        assert!(m.tensor(slot::B1).unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(m.tensor(slot::W2).is_none());
    }

    #[test]
    fn left_block_identity_selects_first_child() {
        let d = 3;
        let mut w = Tensor::zeros(d, 2 * d);
        for i in 0..d {
            w.set(i, i, 1.0);
        }
        let m = ModuleParams::from_parts("NP -> DT NN", Architecture::Linear, 2, d, w, Tensor::zeros(1, d), None)
            .unwrap();
        assert_eq!(run(&m, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn nonlin_saturates() {
        let mut m = ModuleParams::init("A -> B", 1, Architecture::Nonlin, 3, 0);
        m.set_tensor(slot::B1, Tensor::filled(1, 3, -100.0)).unwrap();
        assert_eq!(run(&m, vec![1.0, -1.0, 0.5]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn double_identity() {
        let m = ModuleParams::from_parts(
            "NN",
            Architecture::Double,
            1,
            3,
            Tensor::identity(3),
            Tensor::zeros(1, 3),
            Some((Tensor::identity(3), Tensor::zeros(1, 3))),
        )
        .unwrap();
        assert_eq!(run(&m, vec![0.0, 2.5, 1.0]), [0.0, 2.5, 1.0]);
    }

    #[test]
    fn forward_checks_width() {
        let m = ModuleParams::init("A -> B C", 2, Architecture::Linear, 3, 0);
        let x = Tensor::row(vec![1.0; 5]);
        let mut tape = Tape::new();
        let nx = tape.constant(&x);
        assert!(matches!(m.forward(0, nx, &mut tape), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn from_parts_checks_shapes() {
        let bad = ModuleParams::from_parts(
            "A -> B",
            Architecture::Linear,
            1,
            2,
            Tensor::zeros(2, 3),
            Tensor::zeros(1, 2),
            None,
        );
        assert!(bad.is_err());
        let missing = ModuleParams::from_parts(
            "A -> B",
            Architecture::Double,
            1,
            2,
            Tensor::zeros(2, 2),
            Tensor::zeros(1, 2),
            None,
        );
        assert!(missing.is_err());
    }

    #[test]
    fn architecture_text() {
        for a in Architecture::ALL {
            assert_eq!(a.to_string().parse::<Architecture>().unwrap(), a);
            assert_eq!(Architecture::from_tag(a.tag()), Some(a));
        }
        assert!("deep".parse::<Architecture>().is_err());
    }
}
