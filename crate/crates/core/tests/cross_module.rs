use proptest::prelude::*;
use wfe_core::analytics::{fixation_prob_inefficient_m1, fixation_prob_numeric};
use wfe_core::aseg::{pgf_estimate, AsegParams, CountSampler};
use wfe_core::csv_out::{write_trajectory, RunStamp};
use wfe_core::diffusion::{absorption_trial, Boundary, DiffusionSpec};
use wfe_core::discrete::{simulate_trajectory, DiscreteConfig, StoppingRule};
use wfe_core::duality::{generator_duality_check, moment_estimate_diffusion};
use wfe_core::{mc, QuadratureSpec, Rational, StreamFamily};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generator_identity_off_grid(x in 0.0..=1.0f64, n in 1u32..=12, kappa in 0.0..=1.0f64, alpha in 0.0..=2.0f64) {
        prop_assert!(generator_duality_check(x, n, kappa, alpha).unwrap() <= 1e-12);
    }

    #[test]
    fn closed_form_fixation_matches_quadrature(kappa in 0.0..0.99f64, alpha in 0.0..3.0f64, y in 0.0..=1.0f64) {
        let spec = DiffusionSpec::m1(kappa, alpha).unwrap();
        let a = fixation_prob_inefficient_m1(kappa, alpha, y).unwrap();
        let b = fixation_prob_numeric(&spec, y, &QuadratureSpec::default()).unwrap();
        prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn moment_dual_single_cell() {
    let (kappa, alpha, x, n, t) = (0.4, 0.3, 0.6, 3u32, 0.5);
    let family = StreamFamily::new(5);
    let spec = DiffusionSpec::m1(kappa, alpha).unwrap();
    let lhs = moment_estimate_diffusion(&spec, x, n, t, 1e-3, 20_000, family.child("lhs")).unwrap();
    let params = AsegParams::new(n as u64, alpha, kappa, t, x).unwrap();
    let rhs = pgf_estimate(&params, 20_000, &CountSampler::default(), family.child("rhs")).unwrap();
    assert_eq!(rhs.exploded, 0);
    let se = (lhs.std_error().powi(2) + rhs.summary.std_error().powi(2)).sqrt();
    assert!((lhs.mean - rhs.summary.mean).abs() < 4.0 * se, "{} vs {}", lhs.mean, rhs.summary.mean);
}

#[test]
fn absorption_frequency_matches_scale_function() {
    let (kappa, alpha, y) = (0.5, 1.0, 0.4);
    let spec = DiffusionSpec::m1(kappa, alpha).unwrap();
    let s = mc::try_summarize(StreamFamily::new(6), 4_000, |_, rng| {
        let (b, _) = absorption_trial(&spec, 1.0 - y, 1e-3, rng)?;
        Ok(if b == Boundary::Zero { 1.0 } else { 0.0 })
    })
    .unwrap();
    let p = fixation_prob_inefficient_m1(kappa, alpha, y).unwrap();
    assert!((s.mean - p).abs() < 3.5 * s.std_error(), "{} vs {p}", s.mean);
}

#[test]
fn trajectory_csv_round_trips() {
    let cfg = DiscreteConfig::new(40, Rational::new(1, 4).unwrap(), 0.05, StoppingRule::M2, 0.5).unwrap();
    let traj = simulate_trajectory(&cfg, &mut StreamFamily::new(8).stream(0)).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&mut buf, &RunStamp::new("cfg", 8), &traj).unwrap();

    let text = String::from_utf8(buf).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), traj.generations.len());
    for (r, g) in rows.iter().zip(&traj.generations) {
        assert_eq!(r[1].parse::<u64>().unwrap(), g.size_m);
        assert_eq!(r[2].parse::<u64>().unwrap(), g.count_type0);
        assert_eq!(r[3].parse::<f64>().unwrap(), g.frequency());
    }
}
