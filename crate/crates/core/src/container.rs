//! Binary checkpoint container for trained policies.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"LNAV"
//! version u16           (currently 1)
//! count   u32           number of sections
//! section repeated:
//!     name_len u16, name utf-8
//!     rank u8, dims u32 * rank
//!     len  u64, values f64 * len   (len == product of dims)
//! ```
//!
//! Tensors are stored at double precision regardless of the in-memory
//! scalar type. Structural metadata (cell kind, dims, solver, conv shape)
//! travels in `meta.*` sections so a file is self-describing: loading
//! rebuilds the policy without any side channel, and a round trip through
//! disk is bit-exact for `f64` policies.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as IoRead, Write as IoWrite};
use std::path::Path;

use thiserror::Error;

use crate::cell::{
    CellKind, CellParams, SolverConfig, SolverMethod, CTGRU_SCALES,
};
use crate::conv::{ConvHead, ConvLayerSpec, ConvSpec};
use crate::linalg::Mat;
use crate::policy::{Policy, Readout, CONTROL_DIM};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"LNAV";
pub const VERSION: u16 = 1;

#[derive(Error, Debug)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a policy container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0} (expected {VERSION})")]
    BadVersion(u16),
    #[error("malformed container: {0}")]
    Corrupt(String),
    #[error("container is missing section `{0}`")]
    Missing(String),
    #[error("invalid policy in container: {0}")]
    Invalid(String),
}

struct Section {
    name: String,
    dims: Vec<u32>,
    data: Vec<f64>,
}

fn write_u16(w: &mut impl IoWrite, v: u16) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn write_u32(w: &mut impl IoWrite, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn write_u64(w: &mut impl IoWrite, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_exact<const N: usize>(r: &mut impl IoRead) -> Result<[u8; N], ContainerError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn write_sections(path: &Path, sections: &[Section]) -> Result<(), ContainerError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    write_u16(&mut w, VERSION)?;
    write_u32(&mut w, sections.len() as u32)?;
    for s in sections {
        let name = s.name.as_bytes();
        write_u16(&mut w, name.len() as u16)?;
        w.write_all(name)?;
        w.write_all(&[s.dims.len() as u8])?;
        for &d in &s.dims {
            write_u32(&mut w, d)?;
        }
        write_u64(&mut w, s.data.len() as u64)?;
        for &v in &s.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_sections(path: &Path) -> Result<Vec<Section>, ContainerError> {
    let mut r = BufReader::new(File::open(path)?);
    if read_exact::<4>(&mut r)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = u16::from_le_bytes(read_exact::<2>(&mut r)?);
    if version != VERSION {
        return Err(ContainerError::BadVersion(version));
    }
    let count = u32::from_le_bytes(read_exact::<4>(&mut r)?);
    let mut sections = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(read_exact::<2>(&mut r)?) as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| ContainerError::Corrupt("section name is not utf-8".into()))?;
        let rank = read_exact::<1>(&mut r)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(read_exact::<4>(&mut r)?));
        }
        let len = u64::from_le_bytes(read_exact::<8>(&mut r)?) as usize;
        let expect: u64 = dims.iter().map(|&d| d as u64).product();
        if !dims.is_empty() && expect != len as u64 {
            return Err(ContainerError::Corrupt(format!(
                "section `{name}`: dims product {expect} vs payload {len}"
            )));
        }
        if len > (1 << 28) {
            return Err(ContainerError::Corrupt(format!(
                "section `{name}` claims {len} values"
            )));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(read_exact::<8>(&mut r)?));
        }
        sections.push(Section { name, dims, data });
    }
    Ok(sections)
}

fn kind_code(kind: CellKind) -> f64 {
    match kind {
        CellKind::Ltc => 0.0,
        CellKind::CtRnn => 1.0,
        CellKind::OdeRnn => 2.0,
        CellKind::CtGru => 3.0,
        CellKind::Lstm => 4.0,
    }
}

fn kind_from_code(code: f64) -> Result<CellKind, ContainerError> {
    match code as i64 {
        0 => Ok(CellKind::Ltc),
        1 => Ok(CellKind::CtRnn),
        2 => Ok(CellKind::OdeRnn),
        3 => Ok(CellKind::CtGru),
        4 => Ok(CellKind::Lstm),
        c => Err(ContainerError::Corrupt(format!("unknown cell kind code {c}"))),
    }
}

fn method_code(m: SolverMethod) -> f64 {
    match m {
        SolverMethod::ExplicitEuler => 0.0,
        SolverMethod::SemiImplicitFused => 1.0,
        SolverMethod::Rk4 => 2.0,
    }
}

fn method_from_code(code: f64) -> Result<SolverMethod, ContainerError> {
    match code as i64 {
        0 => Ok(SolverMethod::ExplicitEuler),
        1 => Ok(SolverMethod::SemiImplicitFused),
        2 => Ok(SolverMethod::Rk4),
        c => Err(ContainerError::Corrupt(format!("unknown solver code {c}"))),
    }
}

pub fn save_policy<S: Real>(path: &Path, policy: &Policy<S>) -> Result<(), ContainerError> {
    let mut sections = Vec::new();
    sections.push(Section {
        name: "meta.policy".into(),
        dims: vec![8],
        data: vec![
            kind_code(policy.cell.kind),
            policy.cell.state_dim as f64,
            policy.cell.input_dim as f64,
            policy.src_start as f64,
            method_code(policy.solver.method),
            policy.solver.dt,
            policy.solver.unfold_steps as f64,
            if policy.conv.is_some() { 1.0 } else { 0.0 },
        ],
    });
    if let Some(head) = &policy.conv {
        let mut data = vec![
            head.input_h as f64,
            head.input_w as f64,
            head.input_ch as f64,
            head.layers.len() as f64,
        ];
        for l in &head.layers {
            data.extend([l.spec.filters as f64, l.spec.kernel as f64, l.spec.stride as f64]);
        }
        let n = data.len() as u32;
        sections.push(Section { name: "meta.conv".into(), dims: vec![n], data });
    }
    let mask_section = |name: &str, m: &Mat<S>| Section {
        name: name.into(),
        dims: vec![m.rows() as u32, m.cols() as u32],
        data: m.data().iter().map(|v| v.as_f64()).collect(),
    };
    if let Some(m) = &policy.cell.rec_mask {
        sections.push(mask_section("mask.recurrent", m));
    }
    if let Some(m) = &policy.cell.in_mask {
        sections.push(mask_section("mask.input", m));
    }
    if let crate::cell::ExtraParams::CtGru { log_scales, .. } = &policy.cell.extra {
        sections.push(Section {
            name: "meta.log_scales".into(),
            dims: vec![log_scales.len() as u32],
            data: log_scales.iter().map(|v| v.as_f64()).collect(),
        });
    }
    policy.visit(&mut |name, xs| {
        sections.push(Section {
            name: name.into(),
            dims: vec![xs.len() as u32],
            data: xs.iter().map(|v| v.as_f64()).collect(),
        });
    });
    write_sections(path, &sections)
}

pub fn load_policy<S: Real>(path: &Path) -> Result<Policy<S>, ContainerError> {
    let sections = read_sections(path)?;
    let find = |name: &str| -> Result<&Section, ContainerError> {
        sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ContainerError::Missing(name.into()))
    };

    let meta = &find("meta.policy")?.data;
    if meta.len() != 8 {
        return Err(ContainerError::Corrupt("meta.policy must hold 8 values".into()));
    }
    let kind = kind_from_code(meta[0])?;
    let state_dim = meta[1] as usize;
    let input_dim = meta[2] as usize;
    let src_start = meta[3] as usize;
    let solver = SolverConfig {
        method: method_from_code(meta[4])?,
        dt: meta[5],
        unfold_steps: meta[6] as usize,
    };
    if state_dim == 0 || input_dim == 0 || src_start >= state_dim {
        return Err(ContainerError::Invalid(format!(
            "dims d={state_dim} m={input_dim} readout start {src_start}"
        )));
    }

    let mut cell = CellParams::<S>::zeros(kind, state_dim, input_dim);
    if let Ok(s) = find("meta.log_scales") {
        if let crate::cell::ExtraParams::CtGru { log_scales, .. } = &mut cell.extra {
            if s.data.len() != CTGRU_SCALES {
                return Err(ContainerError::Corrupt("log scale bank has wrong width".into()));
            }
            for (dst, &v) in log_scales.iter_mut().zip(&s.data) {
                *dst = S::cast(v);
            }
        }
    }
    let load_mask = |s: &Section, rows: usize, cols: usize| -> Result<Mat<S>, ContainerError> {
        if s.dims != [rows as u32, cols as u32] {
            return Err(ContainerError::Corrupt(format!(
                "section `{}`: dims {:?} vs expected {rows}x{cols}",
                s.name, s.dims
            )));
        }
        let mut m = Mat::zeros(rows, cols);
        for (dst, &v) in m.data_mut().iter_mut().zip(&s.data) {
            *dst = S::cast(v);
        }
        Ok(m)
    };
    if let Ok(s) = find("mask.recurrent") {
        cell.rec_mask = Some(load_mask(s, state_dim, state_dim)?);
    }
    if let Ok(s) = find("mask.input") {
        cell.in_mask = Some(load_mask(s, state_dim, input_dim)?);
    }

    let conv = if meta[7] != 0.0 {
        let cm = &find("meta.conv")?.data;
        if cm.len() < 4 {
            return Err(ContainerError::Corrupt("meta.conv too short".into()));
        }
        let nlayers = cm[3] as usize;
        if cm.len() != 4 + 3 * nlayers {
            return Err(ContainerError::Corrupt("meta.conv layer list truncated".into()));
        }
        let spec = ConvSpec {
            input_h: cm[0] as usize,
            input_w: cm[1] as usize,
            input_ch: cm[2] as usize,
            layers: (0..nlayers)
                .map(|i| ConvLayerSpec {
                    filters: cm[4 + 3 * i] as usize,
                    kernel: cm[5 + 3 * i] as usize,
                    stride: cm[6 + 3 * i] as usize,
                })
                .collect(),
        };
        Some(ConvHead::zeros(&spec).map_err(|e| ContainerError::Invalid(e.to_string()))?)
    } else {
        None
    };

    let mut policy = Policy {
        conv,
        cell,
        readout: Readout::zeros(state_dim - src_start),
        solver,
        src_start,
    };

    let mut problems: Vec<String> = Vec::new();
    policy.visit_mut(&mut |name, xs| {
        match sections.iter().find(|s| s.name == name) {
            Some(s) if s.data.len() == xs.len() => {
                for (dst, &v) in xs.iter_mut().zip(&s.data) {
                    *dst = S::cast(v);
                }
            }
            Some(s) => problems.push(format!(
                "section `{name}` holds {} values, tensor wants {}",
                s.data.len(),
                xs.len()
            )),
            None => problems.push(format!("missing tensor section `{name}`")),
        }
    });
    if let Some(p) = problems.first() {
        return Err(ContainerError::Corrupt(p.clone()));
    }
    if policy.readout.b.len() != CONTROL_DIM {
        return Err(ContainerError::Invalid("readout width".into()));
    }
    policy
        .cell
        .validate()
        .map_err(|e| ContainerError::Invalid(e.to_string()))?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{init_cell, init_ncp, NcpWiring};
    use crate::policy::vision_policy;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("lnav-container-{}-{name}", std::process::id()))
    }

    #[test]
    fn roundtrip_is_bitwise_for_every_kind() {
        for (i, kind) in CellKind::ALL.into_iter().enumerate() {
            let cell = init_cell(kind, 9, 5, 40 + i as u64);
            let policy =
                Policy::new(None, cell, SolverConfig::default_for(kind), 0, 7).unwrap();
            let path = tmp(&format!("kind-{}.lnav", kind.name()));
            save_policy(&path, &policy).unwrap();
            let loaded: Policy<f64> = load_policy(&path).unwrap();
            assert_eq!(loaded, policy, "{} round trip drifted", kind.name());
            std::fs::remove_file(&path).ok();
        }
    }

    #[test]
    fn roundtrip_keeps_wiring_and_conv_head() {
        let wiring = NcpWiring::default_for(32, 5);
        let cell = init_ncp::<f64>(&wiring, 5).unwrap();
        let d = cell.state_dim;
        let policy =
            vision_policy(cell, 64, d - 3, SolverConfig::default_for(CellKind::Ltc), 5).unwrap();
        let path = tmp("wired.lnav");
        save_policy(&path, &policy).unwrap();
        let loaded: Policy<f64> = load_policy(&path).unwrap();
        assert_eq!(loaded, policy);
        assert!(loaded.cell.rec_mask.is_some());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn rejects_foreign_and_stale_files() {
        let path = tmp("junk.lnav");
        std::fs::write(&path, b"P6\n2 2\n255\n0123456789ab").unwrap();
        assert!(matches!(load_policy::<f64>(&path), Err(ContainerError::BadMagic)));

        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&9u16.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_policy::<f64>(&path), Err(ContainerError::BadVersion(9))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn truncated_file_reports_corruption_not_panic() {
        let cell = init_cell::<f64>(CellKind::CtRnn, 6, 3, 2);
        let policy =
            Policy::new(None, cell, SolverConfig::default_for(CellKind::CtRnn), 0, 2).unwrap();
        let path = tmp("trunc.lnav");
        save_policy(&path, &policy).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() / 2]).unwrap();
        match load_policy::<f64>(&path) {
            Err(ContainerError::Io(_)) | Err(ContainerError::Corrupt(_)) => {}
            other => panic!("expected corruption error, got {other:?}"),
        }
        std::fs::remove_file(&path).ok();
    }
}
