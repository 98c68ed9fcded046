use std::collections::HashMap;

use super::{Architecture, ModuleParams};
use crate::autodiff::{NodeId, ParamId, Parameters, Tape, Tensor};
use crate::error::{Error, Result};
use crate::treebank::SyntaxTree;

/// Rule-keyed modules sharing one embedding width and architecture.
///
/// Keys are canonical production strings (`"NP -> DT NN"`) or POS tags.
/// A module's [`ParamId`] owner is its insertion index, which is stable
/// for the lifetime of the registry.
#[derive(Debug, Clone)]
pub struct ModuleRegistry {
    dim: usize,
    arch: Architecture,
    seed: u64,
    pos_layer: bool,
    modules: Vec<ModuleParams>,
    index: HashMap<String, usize>,
}

impl PartialEq for ModuleRegistry {
    /// Content equality: same settings and same modules per key,
    /// regardless of insertion order. The init seed is not compared.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.arch == other.arch
            && self.pos_layer == other.pos_layer
            && self.modules.len() == other.modules.len()
            && self.modules.iter().all(|m| other.get(m.key()) == Some(m))
    }
}

impl ModuleRegistry {
    pub fn new(dim: usize, arch: Architecture, seed: u64) -> Self {
        assert!(dim >= 1, "embedding dimension must be positive");
        Self { dim, arch, seed, pos_layer: true, modules: Vec::new(), index: HashMap::new() }
    }

    /// Enable or disable the bottom layer of POS modules.
    pub fn with_pos_layer(mut self, enabled: bool) -> Self {
        self.pos_layer = enabled;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn pos_layer(&self) -> bool {
        self.pos_layer
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&ModuleParams> {
        self.index.get(key).map(|&i| &self.modules[i])
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut ModuleParams> {
        self.index.get(key).map(|&i| &mut self.modules[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Parameter owner id of a module.
    pub fn owner_of(&self, key: &str) -> Option<u32> {
        self.index.get(key).map(|&i| i as u32)
    }

    /// Keys in lexicographic order.
    pub fn keys(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = self.modules.iter().map(ModuleParams::key).collect();
        keys.sort_unstable();
        keys
    }

    /// Modules in lexicographic key order.
    pub fn iter(&self) -> impl Iterator<Item = &ModuleParams> {
        let mut sorted: Vec<&ModuleParams> = self.modules.iter().collect();
        sorted.sort_by(|a, b| a.key().cmp(b.key()));
        sorted.into_iter()
    }

    /// Add or replace a module; it must match the registry's width and
    /// architecture.
    pub fn insert(&mut self, module: ModuleParams) -> Result<()> {
        if module.dim() != self.dim || module.arch() != self.arch {
            return Err(Error::InvalidConfig(format!(
                "module `{}` is {} D={}, registry is {} D={}",
                module.key(),
                module.arch(),
                module.dim(),
                self.arch,
                self.dim
            )));
        }
        match self.index.get(module.key()) {
            Some(&i) => self.modules[i] = module,
            None => {
                self.index.insert(module.key().to_string(), self.modules.len());
                self.modules.push(module);
            }
        }
        Ok(())
    }

    /// Look up a module, initializing it from `(key, seed)` if absent.
    pub fn ensure(&mut self, key: &str, fan_in: usize) -> Result<&ModuleParams> {
        let i = match self.index.get(key) {
            Some(&i) => i,
            None => {
                let m = ModuleParams::init(key, fan_in, self.arch, self.dim, self.seed);
                self.index.insert(key.to_string(), self.modules.len());
                self.modules.push(m);
                self.modules.len() - 1
            }
        };
        let m = &self.modules[i];
        if m.fan_in() != fan_in {
            return Err(Error::ShapeMismatch {
                op: "ensure",
                expected: format!("fan-in {}", m.fan_in()),
                found: format!("fan-in {fan_in}"),
            });
        }
        Ok(m)
    }

    /// Initialize every module `tree` needs.
    pub fn ensure_tree(&mut self, tree: &SyntaxTree) -> Result<()> {
        for key in required_modules(tree, self.pos_layer) {
            self.ensure(&key.0, key.1)?;
        }
        Ok(())
    }

    /// First module key `tree` needs that is not registered.
    pub fn missing_module(&self, tree: &SyntaxTree) -> Option<String> {
        required_modules(tree, self.pos_layer).into_iter().map(|(k, _)| k).find(|k| !self.contains(k))
    }

    pub fn count_parameters(&self) -> usize {
        self.modules.iter().map(ModuleParams::parameter_count).sum()
    }

    pub fn round_to_f32(&mut self) {
        self.modules.iter_mut().for_each(ModuleParams::round_to_f32);
    }

    /// Root embedding for a tree, evaluated on a scratch tape.
    pub fn embed(&self, tree: &SyntaxTree, words: &[Tensor]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let root = compose_sentence(tree, words, self, &mut tape)?;
        Ok(tape.value(root).clone())
    }
}

/// `(key, fan_in)` for every module a tree uses, POS modules included
/// when `pos_layer` is set. Keys are deduplicated, first occurrence first.
pub fn required_modules(tree: &SyntaxTree, pos_layer: bool) -> Vec<(String, usize)> {
    fn walk(t: &SyntaxTree, pos_layer: bool, seen: &mut Vec<(String, usize)>) {
        if t.is_preterminal() {
            if pos_layer && !seen.iter().any(|(k, _)| k == t.label()) {
                seen.push((t.label().to_string(), 1));
            }
            return;
        }
        let rule = t.production().expect("phrase node").to_string();
        if !seen.iter().any(|(k, _)| *k == rule) {
            seen.push((rule, t.children().len()));
        }
        for c in t.children() {
            walk(c, pos_layer, seen);
        }
    }
    let mut seen = Vec::new();
    walk(tree, pos_layer, &mut seen);
    seen
}

impl Parameters for ModuleRegistry {
    fn param_ids(&self) -> Vec<ParamId> {
        self.modules
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.slots().iter().map(move |&s| ParamId::new(i as u32, s)))
            .collect()
    }

    fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.modules.get(id.owner as usize)?.tensor(id.slot)
    }

    fn param_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        self.modules.get_mut(id.owner as usize)?.tensor_mut(id.slot)
    }
}

/// Build the sentence network for `tree` on `tape` and return its root.
///
/// Each word embedding passes through the module of its POS tag (unless
/// the registry's POS layer is off); each phrase node concatenates its
/// children's outputs and applies the module of its production. Every
/// module must already be registered.
pub fn compose_sentence<'a>(
    tree: &SyntaxTree,
    words: &'a [Tensor],
    registry: &'a ModuleRegistry,
    tape: &mut Tape<'a>,
) -> Result<NodeId> {
    let leaves = tree.leaf_count();
    if leaves != words.len() {
        return Err(Error::LeafCountMismatch { leaves, words: words.len() });
    }
    let mut next_leaf = 0;
    compose_node(tree, words, registry, tape, &mut next_leaf)
}

/// Training-mode composition: missing modules are initialized first.
pub fn compose_sentence_lazy<'a>(
    tree: &SyntaxTree,
    words: &'a [Tensor],
    registry: &'a mut ModuleRegistry,
    tape: &mut Tape<'a>,
) -> Result<NodeId> {
    registry.ensure_tree(tree)?;
    compose_sentence(tree, words, registry, tape)
}

fn lookup<'a>(registry: &'a ModuleRegistry, key: &str) -> Result<(u32, &'a ModuleParams)> {
    let i = *registry.index.get(key).ok_or_else(|| Error::MissingModule(key.to_string()))?;
    Ok((i as u32, &registry.modules[i]))
}

fn compose_node<'a>(
    tree: &SyntaxTree,
    words: &'a [Tensor],
    registry: &'a ModuleRegistry,
    tape: &mut Tape<'a>,
    next_leaf: &mut usize,
) -> Result<NodeId> {
    if tree.is_preterminal() {
        let x = tape.constant(&words[*next_leaf]);
        *next_leaf += 1;
        if !registry.pos_layer {
            return Ok(x);
        }
        let (owner, module) = lookup(registry, tree.label())?;
        return module.forward(owner, x, tape);
    }
    let rule = tree.production().expect("phrase node").to_string();
    let (owner, module) = lookup(registry, &rule)?;
    let mut inputs = Vec::with_capacity(tree.children().len());
    for child in tree.children() {
        inputs.push(compose_node(child, words, registry, tape, next_leaf)?);
    }
    let x = tape.concat(&inputs)?;
    module.forward(owner, x, tape)
}
