//! The flow against closed forms and conserved quantities.

use donaldson_lab::bundle::{BundleSpec, MetricField};
use donaldson_lab::field::TwistedField;
use donaldson_lab::flow::{DonaldsonFlow, FlowControls, Verdict};
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;
use num_complex::Complex64 as C64;

#[test]
fn split_flow_is_exponential_for_any_degrees() {
    let g = TorusGeometry::standard(1, 16).unwrap();
    for degrees in [[1i64, -1], [2, 0], [3, -2]] {
        let spec = BundleSpec::direct_sum(&g, &degrees).unwrap();
        let flow = DonaldsonFlow::new(&spec, None);
        let ctl = FlowControls {
            t_max: 1.0,
            snapshot_stride: 10,
            ..Default::default()
        };
        let traj = flow.run(&ctl).unwrap();
        // μ_i − μ with μ_i = degree_i, so h_ii = exp(−2(d_i − μ) t)
        let mu = (degrees[0] + degrees[1]) as f64 / 2.0;
        for s in &traj.snapshots {
            let m = s.h.h.at(7);
            for (i, &d) in degrees.iter().enumerate() {
                let want = (-2.0 * (d as f64 - mu) * s.t).exp();
                let rel = (m[3 * i].re / want - 1.0).abs();
                // RK4 truncation grows with the rate 2(d_i − μ)
                assert!(rel < 1e-7, "{degrees:?} t={} rel {rel:e}", s.t);
            }
        }
    }
}

#[test]
fn line_bundle_flow_converges_to_constant_curvature() {
    let g = TorusGeometry::standard(1, 16).unwrap();
    let spec = presets::build("line_random", &g, None, 5, None).unwrap();
    let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default()).unwrap();
    assert_eq!(traj.verdict, Verdict::Converged);
    assert!(!traj.normalize_det);
    let k = spec.contracted_curvature(&traj.last().h).unwrap();
    let mu = spec.slope();
    let worst = k.data().iter().map(|z| (z.re - mu).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn hermitian_einstein_start_stays_put() {
    let g = TorusGeometry::standard(1, 16).unwrap();
    let spec = BundleSpec::direct_sum(&g, &[1, 1]).unwrap();
    let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default()).unwrap();
    assert_eq!(traj.verdict, Verdict::Converged);
    assert_eq!(traj.accepted_steps, 0);
}

#[test]
fn constant_gauge_conjugates_the_flow() {
    // for a split bundle a constant diagonal start h0 evolves as h0 · e^{−2(K−μ)t}
    let g = TorusGeometry::standard(1, 16).unwrap();
    let spec = BundleSpec::direct_sum(&g, &[1, -1]).unwrap();
    let h0 = TwistedField::identity(&g, &[1, -1]).map_points(|_, m, o| {
        o.copy_from_slice(m);
        o[0] = C64::new(2.0, 0.0);
        o[3] = C64::new(0.5, 0.0);
    });
    let ctl = FlowControls {
        t_max: 0.5,
        ..Default::default()
    };
    let traj = DonaldsonFlow::new(&spec, None)
        .run_from(MetricField::new(h0).unwrap(), &ctl)
        .unwrap();
    let s = traj.last();
    let m = s.h.h.at(100);
    assert!((m[0].re / (2.0 * (-2.0 * s.t).exp()) - 1.0).abs() < 1e-8);
    assert!((m[3].re / (0.5 * (2.0 * s.t).exp()) - 1.0).abs() < 1e-8);
}

#[test]
fn residual_dissipation_is_monotone_on_a_stable_bundle() {
    let g = TorusGeometry::standard(1, 16).unwrap();
    let spec = presets::build("stable_extension_r2", &g, None, 2, Some(0.2)).unwrap();
    let ctl = FlowControls {
        t_max: 2.0,
        ..Default::default()
    };
    let traj = DonaldsonFlow::new(&spec, None).run(&ctl).unwrap();
    let d = &traj.diagnostics;
    assert!(d.residual.windows(2).all(|w| w[1] <= w[0]));
    assert!(d.dissipation.windows(2).all(|w| w[1] >= w[0]));
    assert!(d.sup_h.iter().all(|&s| s < 10.0));
}
