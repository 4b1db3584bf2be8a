use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{lama, linear, EqualizerOutput, LamaOptions, LinearKind, OperatingPoint};
use crate::error::{Error, Result};
use crate::model::{fuse_partials, gram, matched_filter, ChannelRealization, ClusterView, Constellation, SystemConfig};
use crate::se::fuse_variances;
use crate::EqualizerKind;

/// Dispatches to the requested equalizer on (y_mrc, G).
pub fn run_equalizer(
    y_mrc: &DVector<Complex64>,
    gram: &DMatrix<Complex64>,
    op: &OperatingPoint<'_>,
    kind: EqualizerKind,
    lama_opts: &LamaOptions,
) -> Result<EqualizerOutput> {
    match kind {
        EqualizerKind::Mrc => linear(y_mrc, gram, op, LinearKind::Mrc),
        EqualizerKind::Zf => linear(y_mrc, gram, op, LinearKind::Zf),
        EqualizerKind::Lmmse => linear(y_mrc, gram, op, LinearKind::Lmmse),
        EqualizerKind::Lama => Ok(lama(y_mrc, gram, op, lama_opts)?.output),
    }
}

/// PD pipeline: adder tree over the cluster partials, then one equalizer.
pub fn equalize_pd(
    views: &[ClusterView],
    cfg: &SystemConfig,
    kind: EqualizerKind,
    max_iter: usize,
) -> Result<EqualizerOutput> {
    let (y_mrc, g) = fuse_partials(views)?;
    run_equalizer(
        &y_mrc,
        &g,
        &OperatingPoint::from_config(cfg),
        kind,
        &LamaOptions::with_max_iter(max_iter),
    )
}

/// Reference path: equalize on Hᴴy and HᴴH computed from the full array.
pub fn equalize_centralized(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    kind: EqualizerKind,
    max_iter: usize,
) -> Result<EqualizerOutput> {
    run_equalizer(
        &matched_filter(&real.h, &real.y),
        &gram(&real.h),
        &OperatingPoint::from_config(cfg),
        kind,
        &LamaOptions::with_max_iter(max_iter),
    )
}

/// FD pipeline. Cluster c is rescaled by 1/√w_c, so its partials become
/// (y_mrc_c/w_c, G_c/w_c) and it runs at (N0/w_c, β/w_c). The cluster
/// outputs are then combined by [`fuse_soft_symbols`].
///
/// The fusion node only sees each cluster's self-reported variances; the
/// scalar σ̄_c² is their mean over users.
pub fn equalize_fd(
    views: &[ClusterView],
    cfg: &SystemConfig,
    kind: EqualizerKind,
    max_iter: usize,
) -> Result<EqualizerOutput> {
    if views.is_empty() {
        return Err(Error::DimensionMismatch("FD needs at least one cluster".into()));
    }
    let op = OperatingPoint::from_config(cfg);
    let opts = LamaOptions::with_max_iter(max_iter);
    let outputs = views
        .iter()
        .map(|v| {
            let scale = Complex64::from(1.0 / v.weight);
            let y = &v.y_mrc * scale;
            let g = &v.gram * scale;
            run_equalizer(&y, &g, &op.cluster(v.weight), kind, &opts).map_err(|e| Error::Cluster {
                cluster: v.index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fuse_soft_symbols(&outputs, cfg.constellation())
}

/// Inverse-variance combination z = Σ ν_c z_c with
/// ν_c = (1/σ̄_c²)/Σ_c' (1/σ̄_c'²) and fused variance (Σ_c 1/σ̄_c²)⁻¹.
pub fn fuse_soft_symbols(outputs: &[EqualizerOutput], con: &Constellation) -> Result<EqualizerOutput> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("nothing to fuse".into()))?;
    let u = first.z.len();
    if outputs.iter().any(|o| o.z.len() != u) {
        return Err(Error::DimensionMismatch("cluster outputs differ in user count".into()));
    }
    let per_cluster: Vec<f64> = outputs.iter().map(EqualizerOutput::mean_sigma2).collect();
    let analysis = fuse_variances(&per_cluster)?;
    let mut z = DVector::zeros(u);
    for (o, &nu) in outputs.iter().zip(&analysis.weights) {
        z += &o.z * Complex64::from(nu);
    }
    EqualizerOutput::new(z, vec![analysis.sigma2_fd; u], con)
}
