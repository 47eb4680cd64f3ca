//! Versioned binary checkpoints.
//!
//! Layout: magic `NDRL`, format version, section count, then sections.
//! Each section is a 4-byte tag (`POLI` for an actor-critic policy,
//! `ICMP` for curiosity parameters), a UTF-8 name, and a length-prefixed
//! payload. Weights are little-endian f32 in row-major layer order.
//!
//! A sub-agent file holds one `POLI` section under the agent's registry
//! name, plus an optional `ICMP` section. A hierarchical file holds a
//! `POLI` section named `controller` followed by one `POLI` per
//! sub-agent in registry order.

use std::fs;
use std::path::Path;

use netdef_core::hierarchy::{HierarchicalPolicy, SubAgentRegistry, CONTROLLER_INPUT_DIM};
use netdef_core::icm::IcmParams;
use netdef_core::netsim::{NUM_BLUE_ACTIONS, OBS_BITS};
use netdef_core::nn::{Activation, MlpSpec};
use netdef_core::ppo::PolicyParams;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"NDRL";
pub const FORMAT_VERSION: u32 = 1;
pub const TAG_POLICY: [u8; 4] = *b"POLI";
pub const TAG_ICM: [u8; 4] = *b"ICMP";

/// Name of the controller section in a hierarchical checkpoint.
pub const CONTROLLER_SECTION: &str = "controller";
/// Name of the curiosity section in a sub-agent checkpoint.
pub const CURIOSITY_SECTION: &str = "curiosity";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("unsupported checkpoint format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint while reading {context}")]
    Truncated { context: String },
    #[error("section `{section}`: {reason}")]
    BadSection { section: String, reason: String },
    #[error("missing required section `{section}`")]
    MissingSection { section: String },
    #[error("unexpected extra section `{section}`")]
    UnexpectedSection { section: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub tag: [u8; 4],
    pub name: String,
    pub payload: Vec<u8>,
}

// --- primitive writers ------------------------------------------------------

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_weights(buf: &mut Vec<u8>, weights: &[f64]) {
    put_u32(buf, weights.len() as u32);
    for w in weights {
        buf.extend_from_slice(&(*w as f32).to_le_bytes());
    }
}

// --- primitive readers ------------------------------------------------------

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Reader<'a> {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.data.len() {
            return Err(CheckpointError::Truncated {
                context: context.to_string(),
            });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, context: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, context)?.try_into().unwrap()))
    }

    fn u64(&mut self, context: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, context)?.try_into().unwrap()))
    }

    fn u8(&mut self, context: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, context)?[0])
    }

    fn weights(&mut self, context: &str) -> Result<Vec<f64>, CheckpointError> {
        let n = self.u32(context)? as usize;
        let bytes = self.take(4 * n, context)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    fn is_empty(&self) -> bool {
        self.pos == self.data.len()
    }
}

// --- section payloads -------------------------------------------------------

fn encode_spec(buf: &mut Vec<u8>, spec: &MlpSpec) {
    put_u32(buf, spec.input_dim as u32);
    put_u32(buf, spec.hidden.len() as u32);
    for h in &spec.hidden {
        put_u32(buf, *h as u32);
    }
    put_u32(buf, spec.n_actions as u32);
    buf.push(match spec.activation {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    });
}

fn decode_spec(r: &mut Reader, section: &str) -> Result<MlpSpec, CheckpointError> {
    let input_dim = r.u32("spec.input_dim")? as usize;
    let n_hidden = r.u32("spec.hidden.len")? as usize;
    if n_hidden > 64 {
        return Err(CheckpointError::BadSection {
            section: section.to_string(),
            reason: format!("implausible hidden layer count {n_hidden}"),
        });
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(r.u32("spec.hidden")? as usize);
    }
    let n_actions = r.u32("spec.n_actions")? as usize;
    let activation = match r.u8("spec.activation")? {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        other => {
            return Err(CheckpointError::BadSection {
                section: section.to_string(),
                reason: format!("unknown activation tag {other}"),
            })
        }
    };
    let mut spec = MlpSpec::new(input_dim, hidden, n_actions);
    spec.activation = activation;
    Ok(spec)
}

fn encode_policy(params: &PolicyParams) -> Vec<u8> {
    let mut buf = Vec::new();
    encode_spec(&mut buf, &params.spec);
    put_u32(&mut buf, params.version);
    put_weights(&mut buf, params.actor.params());
    put_weights(&mut buf, params.critic.params());
    buf
}

fn decode_policy(payload: &[u8], section: &str) -> Result<PolicyParams, CheckpointError> {
    let mut r = Reader::new(payload);
    let spec = decode_spec(&mut r, section)?;
    let version = r.u32("policy.version")?;
    let actor_w = r.weights("policy.actor")?;
    let critic_w = r.weights("policy.critic")?;
    if !r.is_empty() {
        return Err(CheckpointError::BadSection {
            section: section.to_string(),
            reason: "trailing bytes after critic weights".to_string(),
        });
    }
    let mut params = PolicyParams::zeros(spec);
    params.version = version;
    for (net, weights, what) in [
        (&mut params.actor, actor_w, "actor"),
        (&mut params.critic, critic_w, "critic"),
    ] {
        if net.n_params() != weights.len() {
            return Err(CheckpointError::BadSection {
                section: section.to_string(),
                reason: format!(
                    "{what} weight count {} does not match spec ({})",
                    weights.len(),
                    net.n_params()
                ),
            });
        }
        net.params_mut().copy_from_slice(&weights);
    }
    Ok(params)
}

fn encode_icm(params: &IcmParams) -> Vec<u8> {
    let mut buf = Vec::new();
    put_u32(&mut buf, params.obs_dim as u32);
    put_u32(&mut buf, params.n_actions as u32);
    put_u32(&mut buf, params.feature_dim as u32);
    put_u32(&mut buf, params.version);
    put_weights(&mut buf, params.encoder.params());
    put_weights(&mut buf, params.forward_model.params());
    put_weights(&mut buf, params.inverse_model.params());
    buf
}

fn decode_icm(payload: &[u8], section: &str) -> Result<IcmParams, CheckpointError> {
    let mut r = Reader::new(payload);
    let obs_dim = r.u32("icm.obs_dim")? as usize;
    let n_actions = r.u32("icm.n_actions")? as usize;
    let feature_dim = r.u32("icm.feature_dim")? as usize;
    let version = r.u32("icm.version")?;
    let mut params = IcmParams::zeros(obs_dim, n_actions, feature_dim);
    params.version = version;
    for (net, what) in [
        (&mut params.encoder, "encoder"),
        (&mut params.forward_model, "forward model"),
        (&mut params.inverse_model, "inverse model"),
    ] {
        let weights = r.weights(what)?;
        if net.n_params() != weights.len() {
            return Err(CheckpointError::BadSection {
                section: section.to_string(),
                reason: format!(
                    "{what} weight count {} does not match dims ({})",
                    weights.len(),
                    net.n_params()
                ),
            });
        }
        net.params_mut().copy_from_slice(&weights);
    }
    if !r.is_empty() {
        return Err(CheckpointError::BadSection {
            section: section.to_string(),
            reason: "trailing bytes after inverse model weights".to_string(),
        });
    }
    Ok(params)
}

// --- file assembly ----------------------------------------------------------

pub fn encode_file(sections: &[Section]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, sections.len() as u32);
    for section in sections {
        buf.extend_from_slice(&section.tag);
        put_u32(&mut buf, section.name.len() as u32);
        buf.extend_from_slice(section.name.as_bytes());
        put_u64(&mut buf, section.payload.len() as u64);
        buf.extend_from_slice(&section.payload);
    }
    buf
}

pub fn decode_file(data: &[u8]) -> Result<Vec<Section>, CheckpointError> {
    let mut r = Reader::new(data);
    if r.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32("section count")? as usize;
    let mut sections = Vec::with_capacity(count);
    for _ in 0..count {
        let tag: [u8; 4] = r.take(4, "section tag")?.try_into().unwrap();
        let name_len = r.u32("section name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "section name")?.to_vec()).map_err(|_| {
            CheckpointError::BadSection {
                section: "<unnamed>".to_string(),
                reason: "section name is not UTF-8".to_string(),
            }
        })?;
        let payload_len = r.u64(&format!("payload of `{name}`"))? as usize;
        let payload = r.take(payload_len, &format!("payload of `{name}`"))?.to_vec();
        sections.push(Section { tag, name, payload });
    }
    if !r.is_empty() {
        return Err(CheckpointError::Truncated {
            context: "trailing bytes after last section".to_string(),
        });
    }
    Ok(sections)
}

fn read(path: &Path) -> Result<Vec<u8>, CheckpointError> {
    fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, data: &[u8]) -> Result<(), CheckpointError> {
    fs::write(path, data).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn expect_policy_spec(
    params: &PolicyParams,
    section: &str,
    input_dim: usize,
    n_actions: Option<usize>,
) -> Result<(), CheckpointError> {
    if params.spec.input_dim != input_dim {
        return Err(CheckpointError::BadSection {
            section: section.to_string(),
            reason: format!(
                "input_dim {} does not match expected {}",
                params.spec.input_dim, input_dim
            ),
        });
    }
    if let Some(n) = n_actions {
        if params.spec.n_actions != n {
            return Err(CheckpointError::BadSection {
                section: section.to_string(),
                reason: format!(
                    "n_actions {} does not match expected {}",
                    params.spec.n_actions, n
                ),
            });
        }
    }
    Ok(())
}

// --- sub-agent checkpoints --------------------------------------------------

/// Serialized sub-agent: the policy under its registry name, plus its
/// curiosity module when present.
#[derive(Debug, Clone, PartialEq)]
pub struct SubAgentCheckpoint {
    pub name: String,
    pub policy: PolicyParams,
    pub icm: Option<IcmParams>,
}

pub fn save_sub_agent(path: &Path, ckpt: &SubAgentCheckpoint) -> Result<(), CheckpointError> {
    let mut sections = vec![Section {
        tag: TAG_POLICY,
        name: ckpt.name.clone(),
        payload: encode_policy(&ckpt.policy),
    }];
    if let Some(icm) = &ckpt.icm {
        sections.push(Section {
            tag: TAG_ICM,
            name: CURIOSITY_SECTION.to_string(),
            payload: encode_icm(icm),
        });
    }
    write(path, &encode_file(&sections))
}

pub fn load_sub_agent(path: &Path) -> Result<SubAgentCheckpoint, CheckpointError> {
    let sections = decode_file(&read(path)?)?;
    let mut policy = None;
    let mut icm = None;
    for section in sections {
        match section.tag {
            TAG_POLICY => {
                if policy.is_some() {
                    return Err(CheckpointError::UnexpectedSection {
                        section: section.name,
                    });
                }
                let params = decode_policy(&section.payload, &section.name)?;
                expect_policy_spec(&params, &section.name, OBS_BITS, Some(NUM_BLUE_ACTIONS))?;
                policy = Some((section.name, params));
            }
            TAG_ICM => {
                if icm.is_some() {
                    return Err(CheckpointError::UnexpectedSection {
                        section: section.name,
                    });
                }
                icm = Some(decode_icm(&section.payload, &section.name)?);
            }
            _ => {
                return Err(CheckpointError::BadSection {
                    section: section.name,
                    reason: format!("unknown section tag {:?}", section.tag),
                })
            }
        }
    }
    let (name, policy) = policy.ok_or(CheckpointError::MissingSection {
        section: "<policy>".to_string(),
    })?;
    Ok(SubAgentCheckpoint { name, policy, icm })
}

// --- hierarchical checkpoints -----------------------------------------------

pub fn save_hierarchy(path: &Path, policy: &HierarchicalPolicy) -> Result<(), CheckpointError> {
    let mut sections = vec![Section {
        tag: TAG_POLICY,
        name: CONTROLLER_SECTION.to_string(),
        payload: encode_policy(&policy.controller),
    }];
    for (name, params) in policy.registry.iter() {
        sections.push(Section {
            tag: TAG_POLICY,
            name: name.to_string(),
            payload: encode_policy(params),
        });
    }
    write(path, &encode_file(&sections))
}

pub fn load_hierarchy(path: &Path) -> Result<HierarchicalPolicy, CheckpointError> {
    let sections = decode_file(&read(path)?)?;
    let mut controller = None;
    let mut registry = SubAgentRegistry::new();
    for section in sections {
        if section.tag != TAG_POLICY {
            return Err(CheckpointError::BadSection {
                section: section.name,
                reason: format!("unexpected tag {:?} in hierarchical checkpoint", section.tag),
            });
        }
        let params = decode_policy(&section.payload, &section.name)?;
        if section.name == CONTROLLER_SECTION {
            if controller.is_some() {
                return Err(CheckpointError::UnexpectedSection {
                    section: section.name,
                });
            }
            expect_policy_spec(&params, &section.name, CONTROLLER_INPUT_DIM, None)?;
            controller = Some(params);
        } else {
            expect_policy_spec(&params, &section.name, OBS_BITS, Some(NUM_BLUE_ACTIONS))?;
            registry
                .push(&section.name, params)
                .map_err(|e| CheckpointError::BadSection {
                    section: section.name.clone(),
                    reason: e.to_string(),
                })?;
        }
    }
    let controller = controller.ok_or(CheckpointError::MissingSection {
        section: CONTROLLER_SECTION.to_string(),
    })?;
    if registry.is_empty() {
        return Err(CheckpointError::MissingSection {
            section: "<sub-agents>".to_string(),
        });
    }
    if controller.spec.n_actions != registry.len() {
        return Err(CheckpointError::BadSection {
            section: CONTROLLER_SECTION.to_string(),
            reason: format!(
                "controller has {} outputs but the checkpoint holds {} sub-agents",
                controller.spec.n_actions,
                registry.len()
            ),
        });
    }
    Ok(HierarchicalPolicy {
        controller,
        registry,
    })
}

/// Re-encode a checkpoint file without interpreting it beyond the
/// section framing. Used to verify save -> load -> save stability.
pub fn reencode(path: &Path) -> Result<Vec<u8>, CheckpointError> {
    Ok(encode_file(&decode_file(&read(path)?)?))
}
