//! Binary extractor-dataset format; byte layout documented in
//! docs/dataset-format.md. Frames are stored once and shared by the
//! samples of an episode.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use warden_core::extractor::{ExtractorDataset, ExtractorSample, NODE_FEAT};

const MAGIC: &[u8; 8] = b"WRDNDSET";
const VERSION: u32 = 1;

pub fn save_dataset(path: &Path, d: &ExtractorDataset) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&d.seed.to_le_bytes());
    buf.extend_from_slice(&(d.window as u32).to_le_bytes());
    buf.extend_from_slice(&(d.obs_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(NODE_FEAT as u32).to_le_bytes());
    buf.extend_from_slice(&(d.frames.len() as u64).to_le_bytes());
    for frame in &d.frames {
        buf.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        for node in frame {
            debug_assert_eq!(node.len(), NODE_FEAT);
            for &v in node {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    buf.extend_from_slice(&(d.samples.len() as u64).to_le_bytes());
    for s in &d.samples {
        buf.extend_from_slice(&(s.frame_range.0 as u64).to_le_bytes());
        buf.extend_from_slice(&(s.frame_range.1 as u64).to_le_bytes());
        for &v in &s.obs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&s.label_mc);
        buf.extend_from_slice(&(s.label_hc as u32).to_le_bytes());
    }
    std::fs::write(path, buf).with_context(|| format!("write dataset {}", path.display()))
}

pub fn load_dataset(path: &Path) -> Result<ExtractorDataset> {
    let data = std::fs::read(path).with_context(|| format!("read dataset {}", path.display()))?;
    let mut r = &data[..];
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        bail!("not a dataset file: bad magic");
    }
    if read_u32(&mut r)? != VERSION {
        bail!("unsupported dataset version");
    }
    let seed = read_u64(&mut r)?;
    let window = read_u32(&mut r)? as usize;
    let obs_dim = read_u32(&mut r)? as usize;
    let node_feat = read_u32(&mut r)? as usize;
    if node_feat != NODE_FEAT {
        bail!("dataset node feature dim {node_feat} does not match build ({NODE_FEAT})");
    }
    let frame_count = read_u64(&mut r)? as usize;
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let nodes = read_u32(&mut r)? as usize;
        let mut frame = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            let mut node = Vec::with_capacity(NODE_FEAT);
            for _ in 0..NODE_FEAT {
                node.push(read_f64(&mut r)?);
            }
            frame.push(node);
        }
        frames.push(frame);
    }
    let sample_count = read_u64(&mut r)? as usize;
    let mut samples = Vec::with_capacity(sample_count);
    for _ in 0..sample_count {
        let start = read_u64(&mut r)? as usize;
        let end = read_u64(&mut r)? as usize;
        let mut obs = Vec::with_capacity(obs_dim);
        for _ in 0..obs_dim {
            obs.push(read_f64(&mut r)?);
        }
        let mut label_mc = vec![0u8; window * window];
        r.read_exact(&mut label_mc)?;
        let label_hc = read_u32(&mut r)? as u64;
        if start > end || end > frames.len() {
            bail!("dataset sample frame range out of bounds");
        }
        samples.push(ExtractorSample {
            frame_range: (start, end),
            obs,
            label_mc,
            label_hc,
        });
    }
    Ok(ExtractorDataset {
        window,
        obs_dim,
        frames,
        samples,
        seed,
    })
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
