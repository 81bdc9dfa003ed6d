use serde::{Deserialize, Serialize};

use super::{f_k_constant, scan_fit, ExperimentSpec, NamedFit, SummaryFlags};
use crate::error::Result;
use crate::gkdv::{critical_norm, track_norm_growth, KdvRunConfig, KdvSample, NormGrowth};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormGrowthReport {
    pub growth: NormGrowth,
    pub samples: Vec<KdvSample>,
    /// Log-log fit of `||W(tau)||_{H^s}` against `tau > 0`.
    pub fits: Vec<NamedFit>,
    /// `(A, K)` with `delta(tau) <= A e^{K tau}` on the run.
    pub envelope: (f64, f64),
    pub critical_norm: f64,
    /// `F_K` at the measured `K` (`None` when `K = 0`).
    pub f_k: Option<f64>,
    pub flags: SummaryFlags,
}

impl NormGrowthReport {
    pub fn exponent(&self) -> Option<f64> {
        self.fits.first().map(|f| f.fit.slope)
    }
}

/// KdV run from the spec's initial profile to `tau_end`, tracking the
/// `H^s` norm at `samples + 1` times.
pub fn run_norm_growth(spec: &ExperimentSpec) -> Result<NormGrowthReport> {
    spec.validate()?;
    let w0 = spec.initial_profile()?;
    let cfg = KdvRunConfig {
        p: spec.p,
        length: spec.length,
        points: spec.points,
        dtau: spec.dtau,
        tau_end: spec.tau_end,
        dealias: true,
    };
    let critical = critical_norm(&w0, spec.p)?;
    let (growth, run) = match track_norm_growth(&w0, &cfg, spec.s, spec.samples) {
        Ok(r) => r,
        Err(e) if e.is_numerical() => {
            return Ok(NormGrowthReport {
                growth: NormGrowth {
                    p: spec.p,
                    s: spec.s,
                    series: Vec::new(),
                    resolution_warning: false,
                },
                samples: Vec::new(),
                fits: Vec::new(),
                envelope: (f64::INFINITY, f64::INFINITY),
                critical_norm: critical,
                f_k: None,
                flags: SummaryFlags {
                    blow_up: true,
                    ..Default::default()
                },
            })
        }
        Err(e) => return Err(e),
    };
    let pts: Vec<(f64, f64)> = growth.series.iter().filter(|s| s.0 > 0.0).cloned().collect();
    let fits = scan_fit("hs_norm", &pts).into_iter().collect();
    let envelope = growth.exponential_envelope();
    Ok(NormGrowthReport {
        f_k: (envelope.1 > 0.0).then(|| f_k_constant(spec.p, envelope.1)),
        flags: SummaryFlags {
            under_resolved: growth.resolution_warning,
            ..Default::default()
        },
        growth,
        samples: run.samples,
        fits,
        envelope,
        critical_norm: critical,
    })
}
