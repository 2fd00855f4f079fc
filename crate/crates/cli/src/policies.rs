//! Policy construction for each controller family: a shared convolutional
//! front end feeding the recurrent cell, motor command read from the last
//! three state units.

use crate::config::{Arch, ExperimentConfig};
use crate::error::Result;
use lnav_core::cell::{init_cell, init_ncp, NcpWiring, SolverConfig};
use lnav_core::conv::{ConvHead, ConvSpec};
use lnav_core::policy::{vision_policy, Policy, CONTROL_DIM};

/// Feature width the standard conv head produces at this input resolution.
pub fn sensory_dim(resolution: usize) -> Result<usize> {
    let head = ConvHead::<f64>::init(&ConvSpec::nav(resolution, resolution), 0)
        .map_err(crate::error::CliError::from)?;
    Ok(head.feature_dim())
}

/// Build a freshly initialized vision policy of the given family.
pub fn build_policy(cfg: &ExperimentConfig, arch: Arch, seed: u64) -> Result<Policy<f64>> {
    let sensory = sensory_dim(cfg.resolution)?;
    let cell = match arch {
        Arch::Ncp => {
            let wiring = NcpWiring::default_for(sensory, seed);
            init_ncp(&wiring, seed)?
        }
        dense => init_cell(dense.cell_kind(), cfg.hidden_dim, sensory, seed),
    };
    let d = cell.state_dim;
    let solver = SolverConfig::default_for(arch.cell_kind());
    Ok(vision_policy(cell, cfg.resolution, d - CONTROL_DIM, solver, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lnav_core::cell::CellKind;

    #[test]
    fn every_family_builds_at_the_default_resolution() {
        let cfg = ExperimentConfig::default();
        for arch in Arch::ALL {
            let p = build_policy(&cfg, arch, 11).unwrap();
            assert_eq!(p.cell.kind, arch.cell_kind());
            assert_eq!(p.cell.input_dim, 32);
            assert_eq!(p.src_start, p.cell.state_dim - 3);
            if arch == Arch::Ncp {
                assert!(p.cell.rec_mask.is_some(), "wired cell carries its masks");
            } else {
                assert_eq!(p.cell.state_dim, cfg.hidden_dim);
            }
        }
    }

    #[test]
    fn wired_policy_is_sparser_than_dense_at_same_size() {
        let cfg = ExperimentConfig::default();
        let ncp = build_policy(&cfg, Arch::Ncp, 1).unwrap();
        let dense = build_policy(&cfg, Arch::CtRnn, 1).unwrap();
        assert_eq!(ncp.cell.state_dim, dense.cell.state_dim);
        assert!(ncp.param_count() < dense.param_count());
    }

    #[test]
    fn seeds_change_weights_but_not_shapes() {
        let cfg = ExperimentConfig::default();
        let a = build_policy(&cfg, Arch::CtGru, 1).unwrap();
        let b = build_policy(&cfg, Arch::CtGru, 2).unwrap();
        assert_eq!(a.flat_len(), b.flat_len());
        assert_ne!(a.flatten(), b.flatten());
        assert_eq!(a.cell.kind, CellKind::CtGru);
        let a2 = build_policy(&cfg, Arch::CtGru, 1).unwrap();
        assert_eq!(a.flatten(), a2.flatten());
    }
}
