//! Versioned binary checkpoint format; byte layout documented in
//! docs/checkpoint-format.md.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};

const MAGIC: &[u8; 8] = b"WRDNCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub params: Vec<f64>,
    /// Optimizer state: (step, first moments, second moments).
    pub opt: Option<(u64, Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    /// Free-form key=value metadata (architecture dims, variant, seed).
    pub meta: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            write_str(&mut buf, k);
            write_str(&mut buf, v);
        }
        buf.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for s in &self.sections {
            write_str(&mut buf, &s.name);
            buf.extend_from_slice(&(s.params.len() as u64).to_le_bytes());
            for p in &s.params {
                buf.extend_from_slice(&p.to_le_bytes());
            }
            match &s.opt {
                None => buf.push(0),
                Some((step, m, v)) => {
                    buf.push(1);
                    buf.extend_from_slice(&step.to_le_bytes());
                    buf.extend_from_slice(&(m.len() as u64).to_le_bytes());
                    for x in m.iter().chain(v.iter()) {
                        buf.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        std::fs::write(path, buf).with_context(|| format!("write checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let data =
            std::fs::read(path).with_context(|| format!("read checkpoint {}", path.display()))?;
        let mut r = &data[..];
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            bail!("not a checkpoint file: bad magic");
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            bail!("unsupported checkpoint version {version}");
        }
        let meta_count = read_u32(&mut r)? as usize;
        let mut meta = Vec::with_capacity(meta_count);
        for _ in 0..meta_count {
            let k = read_str(&mut r)?;
            let v = read_str(&mut r)?;
            meta.push((k, v));
        }
        let n = read_u32(&mut r)? as usize;
        let mut sections = Vec::with_capacity(n);
        for _ in 0..n {
            let name = read_str(&mut r)?;
            let len = read_u64(&mut r)? as usize;
            let mut params = Vec::with_capacity(len);
            for _ in 0..len {
                params.push(read_f64(&mut r)?);
            }
            let has_opt = {
                let mut b = [0u8; 1];
                r.read_exact(&mut b)?;
                b[0] == 1
            };
            let opt = if has_opt {
                let step = read_u64(&mut r)?;
                let mlen = read_u64(&mut r)? as usize;
                let mut m = Vec::with_capacity(mlen);
                for _ in 0..mlen {
                    m.push(read_f64(&mut r)?);
                }
                let mut v = Vec::with_capacity(mlen);
                for _ in 0..mlen {
                    v.push(read_f64(&mut r)?);
                }
                Some((step, m, v))
            } else {
                None
            };
            sections.push(Section { name, params, opt });
        }
        Ok(Checkpoint { meta, sections })
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_str(r: &mut &[u8]) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    Ok(String::from_utf8(b).context("checkpoint string not utf8")?)
}

/// Snapshot of an extractor model.
pub fn extractor_to_checkpoint(
    model: &warden_core::extractor::ExtractorModel,
    meta: Vec<(String, String)>,
) -> Checkpoint {
    Checkpoint {
        meta,
        sections: vec![Section {
            name: "extractor".to_string(),
            params: model.params.as_slice().to_vec(),
            opt: None,
        }],
    }
}

/// Restores an extractor for the given environment; the architecture is
/// derived from the env, the weights from the checkpoint.
pub fn extractor_from_checkpoint(
    ckpt: &Checkpoint,
    env: &warden_core::env::CmdpEnv,
) -> Result<warden_core::extractor::ExtractorModel> {
    let section = ckpt
        .section("extractor")
        .context("checkpoint has no extractor section")?;
    let spec = warden_core::extractor::ExtractorSpec::for_env(env);
    if section.params.len() != spec.param_count() {
        bail!(
            "extractor checkpoint has {} params, expected {}",
            section.params.len(),
            spec.param_count()
        );
    }
    let mut rng = warden_core::rng::DetRng::seed_from(0);
    let mut model = warden_core::extractor::ExtractorModel::new(
        spec,
        warden_core::extractor::ExtractorModel::adjacency_of(env),
        &mut rng,
    );
    model
        .params
        .as_mut_slice()
        .copy_from_slice(&section.params);
    Ok(model)
}

/// Snapshot of trained agent nets (actors, critics, their targets, and
/// auxiliary models when present).
pub fn nets_to_checkpoint(
    nets: &warden_core::learn::AgentNets,
    meta: Vec<(String, String)>,
) -> Checkpoint {
    let mut sections = Vec::new();
    for (i, a) in nets.actors.iter().enumerate() {
        let (step, m, v) = a.opt.state();
        sections.push(Section {
            name: format!("actor_{i}"),
            params: a.params.as_slice().to_vec(),
            opt: Some((step, m.to_vec(), v.to_vec())),
        });
        sections.push(Section {
            name: format!("actor_{i}_target"),
            params: a.target.as_slice().to_vec(),
            opt: None,
        });
    }
    for (i, c) in nets.critics.iter().enumerate() {
        let (step, m, v) = c.opt.state();
        sections.push(Section {
            name: format!("critic_{i}"),
            params: c.params.as_slice().to_vec(),
            opt: Some((step, m.to_vec(), v.to_vec())),
        });
        sections.push(Section {
            name: format!("critic_{i}_target"),
            params: c.target.as_slice().to_vec(),
            opt: None,
        });
    }
    if let Some(rnd) = &nets.rnd {
        sections.push(Section {
            name: "rnd_target".to_string(),
            params: rnd.target.as_slice().to_vec(),
            opt: None,
        });
        sections.push(Section {
            name: "rnd_predictor".to_string(),
            params: rnd.predictor.as_slice().to_vec(),
            opt: None,
        });
    }
    if let Some(avft) = &nets.avft {
        sections.push(Section {
            name: "avft".to_string(),
            params: avft.params.as_slice().to_vec(),
            opt: None,
        });
        sections.push(Section {
            name: "avft_target".to_string(),
            params: avft.target.as_slice().to_vec(),
            opt: None,
        });
    }
    Checkpoint { meta, sections }
}
