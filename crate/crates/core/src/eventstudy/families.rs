use super::kernels::{
    bmp_adjust, bmp_z, corrado_statistics, crude_dependence_t, cross_t, grank_statistics, patell_adjust, patell_z,
    skew_t, standardized_sum_variance,
};
use super::registry::*;
use super::AbnormalPanel;
use crate::error::{Error, Result};
use crate::stats::sample_sd;

/// Stations with a complete event window, as used by the parametric tests.
struct Parametric {
    cac: Vec<f64>,
    csar: Vec<f64>,
    est_counts: Vec<usize>,
}

fn parametric(abn: &AbnormalPanel, min: usize) -> Result<Parametric> {
    let counts = abn.estimation_counts();
    let mut p = Parametric {
        cac: Vec::new(),
        csar: Vec::new(),
        est_counts: Vec::new(),
    };
    for (s, &c) in abn.cac().iter().enumerate() {
        if c.is_nan() {
            continue;
        }
        p.cac.push(c);
        p.csar.push(c / abn.sigma_hat()[s]);
        p.est_counts.push(counts[s]);
    }
    if p.cac.len() < min {
        return Err(Error::Data(format!(
            "{} station(s) with a complete event window, need at least {min}",
            p.cac.len()
        )));
    }
    Ok(p)
}

fn t_ref(df: usize) -> Reference {
    Reference::StudentT { df: df as f64 }
}

/// `cross_T_test`, `crude_dep_T_test` and `T_skew`.
pub fn t_family(abn: &AbnormalPanel) -> Result<Vec<TestResult>> {
    let p = parametric(abn, 3)?;
    let n = p.cac.len();
    let (crude, n_est) = crude_dependence_t(abn.ac(), abn.tau0())?;
    Ok(vec![
        TestResult::new(CROSS_T, cross_t(&p.cac)?, Family::T, false, t_ref(n - 1)),
        TestResult::new(CRUDE_DEP_T, crude, Family::T, false, t_ref(n_est - 1)),
        TestResult::new(T_SKEW, skew_t(&p.cac)?, Family::T, false, t_ref(n - 1)),
    ])
}

/// `Z_patell` and `Z_patell_adj`.
pub fn patell_family(abn: &AbnormalPanel) -> Result<Vec<TestResult>> {
    let p = parametric(abn, 1)?;
    let z = patell_z(&p.csar, &p.est_counts, abn.tau1())?;
    let adj = patell_adjust(z, p.csar.len(), abn.r_bar())?;
    Ok(vec![
        TestResult::new(Z_PATELL, z, Family::Patell, false, Reference::StandardNormal),
        TestResult::new(Z_PATELL_ADJ, adj, Family::Patell, true, Reference::StandardNormal),
    ])
}

fn scar(csar: f64, tau1: usize, est_count: usize) -> Result<f64> {
    Ok(csar / standardized_sum_variance(tau1, est_count)?.sqrt())
}

/// `Z_BMP` and `Z_BMP_adj`.
pub fn bmp_family(abn: &AbnormalPanel) -> Result<Vec<TestResult>> {
    let p = parametric(abn, 3)?;
    let scars = p
        .csar
        .iter()
        .zip(&p.est_counts)
        .map(|(&c, &n)| scar(c, abn.tau1(), n))
        .collect::<Result<Vec<_>>>()?;
    let n = scars.len();
    let z = bmp_z(&scars)?;
    let adj = bmp_adjust(z, n, abn.r_bar())?;
    Ok(vec![
        TestResult::new(Z_BMP, z, Family::Bmp, false, t_ref(n - 1)),
        TestResult::new(Z_BMP_ADJ, adj, Family::Bmp, true, t_ref(n - 1)),
    ])
}

/// `CumRank`, `CumRank_mod`, `CumRank_T`, `CumRank_Z` and `CumRank_Z_adj`.
pub fn corrado_family(abn: &AbnormalPanel) -> Result<Vec<TestResult>> {
    let c = corrado_statistics(abn.ac(), abn.tau0())?;
    let z = Reference::StandardNormal;
    Ok(vec![
        TestResult::new(CUMRANK, c.cumrank, Family::Corrado, true, z),
        TestResult::new(CUMRANK_MOD, c.cumrank_mod, Family::Corrado, true, z),
        TestResult::new(
            CUMRANK_T,
            c.cumrank_t,
            Family::Corrado,
            true,
            Reference::StudentT { df: c.cumrank_t_df },
        ),
        TestResult::new(CUMRANK_Z, c.cumrank_z, Family::Corrado, false, z),
        TestResult::new(CUMRANK_Z_ADJ, c.cumrank_z_adj, Family::Corrado, true, z),
    ])
}

/// `Z_grank`, `Z_grank_adj` and `T_grank`.
///
/// The event value of each station is its SCAR over the non-missing event
/// days, divided by the cross-sectional sd of the SCARs.
pub fn grank_family(abn: &AbnormalPanel) -> Result<Vec<TestResult>> {
    let sac = abn.standardized();
    let tau0 = abn.tau0();
    let counts = abn.estimation_counts();
    let mut event = Vec::with_capacity(abn.n_stations());
    for s in 0..abn.n_stations() {
        let ev: Vec<f64> = (tau0..sac.ncols()).map(|t| sac[(s, t)]).filter(|v| !v.is_nan()).collect();
        event.push(if ev.is_empty() {
            f64::NAN
        } else {
            scar(ev.iter().sum(), ev.len(), counts[s])?
        });
    }
    let present: Vec<f64> = event.iter().copied().filter(|v| !v.is_nan()).collect();
    if present.len() >= 2 {
        let sd = sample_sd(&present);
        if sd > 0.0 {
            event.iter_mut().for_each(|v| *v /= sd);
        }
    }
    let g = grank_statistics(&sac.columns(0, tau0).into_owned(), &event)?;
    Ok(vec![
        TestResult::new(Z_GRANK, g.z, Family::Grank, false, Reference::StandardNormal),
        TestResult::new(Z_GRANK_ADJ, g.z_adj, Family::Grank, true, Reference::StandardNormal),
        TestResult::new(T_GRANK, g.t, Family::Grank, true, Reference::StudentT { df: g.t_df }),
    ])
}

pub(crate) fn run_family(family: Family, abn: &AbnormalPanel) -> Result<Vec<TestResult>> {
    match family {
        Family::T => t_family(abn),
        Family::Patell => patell_family(abn),
        Family::Bmp => bmp_family(abn),
        Family::Corrado => corrado_family(abn),
        Family::Grank => grank_family(abn),
    }
}
