use beb_wasm::{attractor_xd, profile, sweep};

#[test]
fn attractor_pairs_are_finite() {
    let v = attractor_xd(0.05, 1.0, 100).unwrap();
    assert_eq!(v.len(), 200);
    assert!(v.iter().all(|x| x.is_finite()));
    assert!(attractor_xd(0.05, -1.0, 10).is_err());
}

#[test]
fn profile_triples() {
    let v = profile(0.05, -0.006, 0.002, 5, 5).unwrap();
    assert_eq!(v.len(), 15);
    assert_eq!(v[0], -0.006);
    assert_eq!(v[12], 0.002);
    assert!(profile(0.05, 0.002, -0.006, 5, 5).is_err());
}

#[test]
fn sweep_pairs_per_step() {
    let v = sweep(0.3, 0.35, 3, 200, 10).unwrap();
    assert_eq!(v.len(), 3 * 10 * 2);
    // stable fixed point: all samples at one parameter agree
    let xs: Vec<f64> = v.chunks(2).filter(|p| p[0] == 0.35).map(|p| p[1]).collect();
    assert!(xs.iter().all(|x| (x - xs[0]).abs() < 1e-9));
}
